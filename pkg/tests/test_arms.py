import itertools
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from perc.arms import (ArmSpec, arm_event, arm_events, arm_probabilities, dual_separation, edge_arm_probability,
                       edge_four_arm, edge_three_arm, lemma3_estimator, pivotal_edges, pivotal_for_connection,
                       pivotal_sum_estimate)
from perc.config import Configuration, SeedSpec, enumerate_all, sample
from perc.lattice import (HORIZONTAL, VERTICAL, Kind, LatticeSpec, bond_endpoints, dual_bond, encode_element,
                          geometry, max_norm)
from perc.observables import crossing_event, kappa_estimate
from perc.oracle import brute_force_arm_event, cluster_count_poly, exact_expectation, exhaustive_arm_polynomials

BOND = Kind.SQUARE_BOND
TRI = Kind.TRIANGULAR_SITE
B1 = LatticeSpec(BOND, 1)


def _cyclic_classes(k):
    seen, out = set(), []
    for w in itertools.product("OV", repeat=k):
        rots = {"".join(w[i:] + w[:i]) for i in range(k)}
        if not rots & seen:
            seen |= rots
            out.append(min(rots))
    return out


ALL_WORDS = [w for k in range(1, 5) for w in _cyclic_classes(k)]


def _swap(word):
    return word.translate(str.maketrans("OV", "VO"))


def test_word_classes():
    assert len(ALL_WORDS) == 15


def test_arm_spec_validation():
    assert ArmSpec("OVOV", 1, 4).k == 4
    assert ArmSpec.alternating(3, 1, 4).word() == "VOV"
    with pytest.raises(ValueError):
        ArmSpec("OVOVO", 1, 4)
    with pytest.raises(ValueError):
        ArmSpec("", 1, 4)
    with pytest.raises(ValueError):
        ArmSpec("OV", 3, 3)
    with pytest.raises(ValueError):
        arm_events(Configuration.empty(LatticeSpec(TRI, 4)), ["OVOVO"], 1, 3)


@pytest.mark.parametrize("kind", [BOND, TRI])
def test_arm_event_extremes(kind):
    spec = LatticeSpec(kind, 5)
    full, empty = Configuration.full(spec), Configuration.empty(spec)
    assert arm_event(full, ArmSpec("O", 1, 4))
    assert not arm_event(full, ArmSpec("OV", 1, 4))
    for w in ALL_WORDS:
        if "O" in w:
            assert not arm_event(empty, ArmSpec(w, 1, 4))
    assert arm_event(empty, ArmSpec("VVVV", 1, 4))


def test_exhaustive_triangular_annulus():
    """Every configuration of the 24 sites of A(1,2): detector == disjoint-path oracle."""
    res = exhaustive_arm_polynomials(LatticeSpec(TRI, 2), ALL_WORDS, 1, 2)
    assert res.free_elements == 24
    assert all(v == 0 for v in res.mismatches.values()), res.mismatches
    for w in ALL_WORDS:
        assert res.detector[w] == res.oracle[w]
        # colour swap is p -> 1 - p
        assert res.detector[w].reflect() == res.detector[min(_swap(w)[i:] + _swap(w)[:i] for i in range(len(w)))]
    half = Fraction(1, 2)
    assert res.detector["O"](half) == res.detector["V"](half)


@pytest.mark.parametrize("m, n, box", [(1, 2, 3), (1, 3, 4), (2, 3, 4)])
def test_bond_arms_against_brute_force(m, n, box):
    spec = LatticeSpec(BOND, box)
    rng = np.random.default_rng(m * 10 + n)
    checked = 0
    for i in range(600):
        c = sample(spec, float(rng.uniform(0.3, 0.7)), (m * 100 + n, i))
        ref = brute_force_arm_event(c, ALL_WORDS, m, n)
        if ref is None:
            continue
        checked += 1
        assert arm_events(c, ALL_WORDS, m, n) == ref, (i, c.to_int())
    assert checked >= 400


@pytest.mark.parametrize("center", [(0, 0), (1, -1)])
def test_triangular_arms_against_brute_force_larger(center):
    spec = LatticeSpec(TRI, 5)
    for i in range(400):
        c = sample(spec, 0.5, (77, i))
        ref = brute_force_arm_event(c, ALL_WORDS, 1, 3, center)
        if ref is not None:
            assert arm_events(c, ALL_WORDS, 1, 3, center) == ref


def _drop_one(word):
    return {word[:i] + word[i + 1:] for i in range(len(word))} - {""}


@given(st.sampled_from([BOND, TRI]), st.floats(0.2, 0.8), st.integers(0, 2 ** 32))
def test_containment_dropping_an_arm(kind, p, s):
    c = sample(LatticeSpec(kind, 6), p, (s, 0))
    res = dict(zip(ALL_WORDS, arm_events(c, ALL_WORDS, 1, 5)))

    def canon(w):
        return min(w[i:] + w[:i] for i in range(len(w)))

    for w in ALL_WORDS:
        if res[w]:
            for sub in _drop_one(w):
                assert res[canon(sub)], (w, sub)


@given(st.sampled_from([BOND, TRI]), st.floats(0.2, 0.8), st.integers(0, 2 ** 32))
def test_monotone_in_outer_radius(kind, p, s):
    c = sample(LatticeSpec(kind, 7), p, (s, 1))
    for w in ("OV", "OVV", "OVOV"):
        seq = [arm_events(c, [w], 1, n)[0] for n in range(2, 8)]
        assert all(a >= b for a, b in zip(seq, seq[1:]))


def _outside_elements(spec, m, n):
    g = geometry(spec)
    if spec.kind is TRI:
        return [v for v in range(spec.element_count) if g.radius[v] > n or g.radius[v] < m]
    r = g.radius
    return [e for e in range(spec.element_count)
            if max(r[g.edge_u[e]], r[g.edge_v[e]]) > n or min(r[g.edge_u[e]], r[g.edge_v[e]]) < m]


@given(st.sampled_from([BOND, TRI]), st.integers(0, 2 ** 32), st.data())
def test_locality(kind, s, data):
    spec = LatticeSpec(kind, 6)
    c = sample(spec, 0.5, (s, 2))
    outside = _outside_elements(spec, 2, 4)
    e = data.draw(st.sampled_from(outside))
    assert arm_events(c, ALL_WORDS, 2, 4) == arm_events(c.flipped(e), ALL_WORDS, 2, 4)


def test_arm_probabilities_match_per_configuration():
    spec = LatticeSpec(TRI, 8)
    seed = SeedSpec(5, 100)
    est = arm_probabilities(spec, 0.5, ["OV", "OVOV"], 1, [4, 8], 300, seed)
    counts = {k: 0 for k in est}
    for i in range(300):
        c = sample(spec, 0.5, seed.child(i))
        for n in (4, 8):
            for w, hit in zip(["OV", "OVOV"], arm_events(c, ["OV", "OVOV"], 1, n)):
                counts[(w, n)] += hit
    assert {k: int(v.total) for k, v in est.items()} == counts


# ---------------------------------------------------------------------------
# edge-centred events


def _edge_reference(config, e, n, three):
    """Edge arm events from networkx: reachability / node-disjoint paths in the region around v1(e)."""
    spec = config.spec
    occ = config.occupied
    v1, v2 = bond_endpoints(spec, e)
    inside = lambda v: max_norm((v[0] - v1[0], v[1] - v1[1])) <= n
    P, D = nx.Graph(), nx.Graph()
    for b in range(spec.element_count):
        a, c = bond_endpoints(spec, b)
        if b == e or not (inside(a) and inside(c)):
            continue
        if occ[b]:
            P.add_edge(a, c)
        else:
            d = dual_bond(spec, b)
            D.add_edge(d.u, d.w)
    du, dw = dual_bond(spec, e)
    P.add_nodes_from([v1, v2])
    D.add_nodes_from([du, dw, "T"])
    P.add_node("T")
    outer_p = [v for v in P if v != "T" and max_norm((v[0] - v1[0], v[1] - v1[1])) == n]
    outer_d = [v for v in D if v != "T" and max(abs(v[0] - v1[0]), abs(v[1] - v1[1])) == n + 0.5]
    P.add_edges_from(("T", v) for v in outer_p)
    D.add_edges_from(("T", v) for v in outer_d)
    if not nx.has_path(P, v1, "T"):
        return False
    if three:
        D.add_edges_from([("S", du), ("S", dw)])
        return len(list(nx.node_disjoint_paths(D, "S", "T"))) >= 2 if nx.has_path(D, "S", "T") else False
    return nx.has_path(P, v2, "T") and nx.has_path(D, du, "T") and nx.has_path(D, dw, "T")


def test_edge_arms_exhaustive_n1():
    e = encode_element(B1, 0, 0, HORIZONTAL)
    for three in (False, True):
        fn = edge_three_arm if three else edge_four_arm
        for c in enumerate_all(B1):
            assert fn(c, e, 1) == _edge_reference(c, e, 1, three)
    assert not edge_four_arm(Configuration.full(B1), e, 1)
    poly = exact_expectation(B1, lambda c: edge_four_arm(c, e, 1))
    est = edge_arm_probability(B1, 0.5, e, 1, 100000, 3)
    assert abs(est.mean - poly(0.5)) <= 4 * est.stderr


@pytest.mark.parametrize("direction", [HORIZONTAL, VERTICAL])
def test_edge_arms_fuzz(direction):
    spec = LatticeSpec(BOND, 6)
    e = encode_element(spec, 0, 0, direction)
    for i in range(300):
        c = sample(spec, 0.5, (9, i))
        for n in (2, 4):
            assert edge_four_arm(c, e, n) == _edge_reference(c, e, n, False)
            assert edge_three_arm(c, e, n) == _edge_reference(c, e, n, True)


def test_edge_arm_implies_annulus_arms():
    spec = LatticeSpec(BOND, 6)
    e = encode_element(spec, 0, 0, HORIZONTAL)
    hits = 0
    for i in range(3000):
        c = sample(spec, 0.5, (21, i))
        for n in (2, 5):
            if edge_four_arm(c, e, n):
                hits += 1
                assert arm_events(c, ["OVOV"], 1, n)[0]
            if edge_three_arm(c, e, n):
                assert arm_events(c, ["OVV"], 1, n)[0]
    assert hits > 100


def test_edge_arm_rejects_boundary_bonds():
    spec = LatticeSpec(BOND, 3)
    with pytest.raises(ValueError):
        edge_four_arm(Configuration.empty(spec), encode_element(spec, 2, 0, VERTICAL), 2)


# ---------------------------------------------------------------------------
# pivotality


def _interior_bonds(spec):
    g = geometry(spec)
    return [b for b in range(spec.element_count) if max(g.radius[g.edge_u[b]], g.radius[g.edge_v[b]]) < spec.n]


def test_pivotal_connection_examples():
    spec = LatticeSpec(BOND, 3)
    for b in range(spec.element_count):
        assert pivotal_for_connection(Configuration.empty(spec), b)
    for b in _interior_bonds(spec):
        assert not pivotal_for_connection(Configuration.full(spec), b)


def test_dual_separation_examples():
    spec = LatticeSpec(BOND, 3)
    for b in range(spec.element_count):
        assert dual_separation(Configuration.empty(spec), b)
        assert not dual_separation(Configuration.full(spec), b)


def test_russo_cluster_count_exact():
    K = cluster_count_poly(B1)
    piv = exact_expectation(B1, lambda c: sum(pivotal_for_connection(c, b) for b in range(12)))
    assert K.derivative() + piv == exact_expectation(B1, lambda c: 0)


def test_d_equals_e_with_outer_face_exhaustive():
    for c in enumerate_all(B1):
        for b in range(12):
            assert dual_separation(c, b) == pivotal_for_connection(c, b)


@given(st.integers(1, 6), st.floats(0, 1), st.integers(0, 2 ** 32), st.data())
def test_d_contained_in_e(n, p, s, data):
    spec = LatticeSpec(BOND, n)
    c = sample(spec, p, (s, 0))
    b = data.draw(st.integers(0, spec.element_count - 1))
    strict = dual_separation(c, b, through_outer_face=False)
    loose = dual_separation(c, b)
    e = pivotal_for_connection(c, b)
    assert (not strict or loose) and (not loose or e)


def test_pivot_counts_match_per_configuration():
    spec = LatticeSpec(BOND, 4)
    seed = SeedSpec(3, 50)
    for strict in (False, True):
        est = lemma3_estimator(spec, 0.4, 64, seed, through_outer_face=not strict)
        total = sum(sum(dual_separation(sample(spec, 0.4, seed.child(i)), b, not strict)
                        for b in range(spec.element_count)) for i in range(64))
        assert est.total == pytest.approx(-total / spec.vertex_count, rel=1e-12)
    s = pivotal_sum_estimate(spec, 0.4, 64, seed)
    total = sum(sum(pivotal_for_connection(sample(spec, 0.4, seed.child(i)), b)
                    for b in range(spec.element_count)) for i in range(64))
    assert s.total == pytest.approx(total / spec.vertex_count, rel=1e-12)


def test_lemma3_examples():
    spec = LatticeSpec(BOND, 5)
    est = lemma3_estimator(spec, 0.0, 50, 1)
    assert est.mean == pytest.approx(-spec.element_count / spec.vertex_count, rel=1e-15)
    exact = -exact_expectation(B1, lambda c: sum(dual_separation(c, b) for b in range(12))) / 9
    for p in (0.2, 0.5):
        est = lemma3_estimator(B1, p, 100000, 2)
        assert abs(est.mean - exact(p)) <= 4 * est.stderr


def test_lemma3_matches_kappa_finite_difference():
    spec = LatticeSpec(BOND, 64)
    h = 0.01
    up = kappa_estimate(spec, 0.3 + h, 40000, 11)
    dn = kappa_estimate(spec, 0.3 - h, 40000, 12)
    fd = (up.mean - dn.mean) / (2 * h)
    fd_err = np.hypot(up.stderr, dn.stderr) / (2 * h)
    l3 = lemma3_estimator(spec, 0.3, 20000, 13)
    # kappa''' is O(1) here, so the O(h^2) truncation is below 1e-3
    assert abs(fd - l3.mean) <= 4 * np.hypot(fd_err, l3.stderr) + 1e-3


def test_pivotal_edges_examples():
    spec = LatticeSpec(BOND, 2)
    c = sample(spec, 0.5, 4)
    assert pivotal_edges(c, lambda x: True).count == 0
    rep = pivotal_edges(c, lambda x: x[7])
    assert rep.count == 1 and rep.pivotal[7]


def test_russo_crossing_exact():
    P = exact_expectation(B1, crossing_event)
    S = exact_expectation(B1, lambda c: pivotal_edges(c, crossing_event).count)
    assert P.derivative() == S


@given(st.integers(0, 4095), st.integers(0, 11))
def test_pivotal_symmetric_in_flip(pattern, e):
    c = Configuration.from_int(B1, pattern)
    assert pivotal_edges(c, crossing_event).pivotal[e] == pivotal_edges(c.flipped(e), crossing_event).pivotal[e]


@given(st.integers(0, 4095))
def test_pivotal_refined_classification(pattern):
    c = Configuration.from_int(B1, pattern)
    from perc.observables import Medium, Orientation
    tb = lambda x: crossing_event(x, Orientation.TOP_BOTTOM, Medium.OCCUPIED)
    rep = pivotal_edges(c, crossing_event, tb)
    assert np.array_equal(rep.a_only | rep.both, rep.pivotal)
    assert not np.any(rep.a_only & rep.b_only)
