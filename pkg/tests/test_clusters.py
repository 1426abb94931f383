import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from perc.clusters import cluster_count, cluster_of, connects, label, vacant_label
from perc.config import Configuration, enumerate_all, sample
from perc.lattice import Kind, LatticeSpec, geometry, vertex_coords, vertex_index
from perc.oracle import bfs_labels, cluster_counts

BOND = Kind.SQUARE_BOND
TRI = Kind.TRIANGULAR_SITE

SMALL = [LatticeSpec(BOND, 1), LatticeSpec(TRI, 1), LatticeSpec.torus(TRI, 3), LatticeSpec.torus(TRI, 4),
         LatticeSpec.torus(BOND, 3)]


def _partition(labels):
    groups = {}
    for v, c in enumerate(labels):
        if c >= 0:
            groups.setdefault(int(c), []).append(v)
    return sorted(tuple(g) for g in groups.values())


def _nx_graph(config):
    spec = config.spec
    g = geometry(spec)
    occ = config.occupied
    G = nx.MultiGraph()
    if spec.kind is BOND:
        G.add_nodes_from(range(spec.vertex_count))
        G.add_edges_from((int(g.edge_u[e]), int(g.edge_v[e])) for e in range(spec.element_count) if occ[e])
    else:
        G.add_nodes_from(v for v in range(spec.vertex_count) if occ[v])
        G.add_edges_from((int(a), int(b)) for a, b in zip(g.edge_u, g.edge_v) if occ[a] and occ[b])
    return G


def test_cluster_count_examples():
    b1 = LatticeSpec(BOND, 1)
    assert cluster_count(Configuration.empty(b1)) == 9
    assert cluster_count(Configuration.full(b1)) == 1
    assert cluster_count(Configuration.empty(LatticeSpec(TRI, 1))) == 0


def test_cluster_of_examples():
    b2 = LatticeSpec(BOND, 2)
    assert tuple(cluster_of(Configuration.full(b2), (0, 0))) == (25, True)
    assert cluster_of(Configuration.empty(LatticeSpec(TRI, 3)), (0, 0)).size == 0
    one = Configuration.empty(b2).flipped(0)
    e = [e for e in range(b2.element_count) if geometry(b2).edge_u[e] == vertex_index(b2, (0, 0))][0]
    one = Configuration.empty(b2).flipped(e)
    assert tuple(cluster_of(one, (0, 0))) == (2, False)


def test_connects_examples():
    spec = LatticeSpec(BOND, 2)
    full, empty = Configuration.full(spec), Configuration.empty(spec)
    assert connects(full, [(-2, -2)], [(2, 2)])
    assert not connects(empty, [(-2, -2)], [(2, 2)])
    assert connects(empty, [(0, 0), (1, 1)], [(1, 1)])


def test_connects_exhaustive_bond_n1():
    spec = LatticeSpec(BOND, 1)
    left = [(-1, y) for y in (-1, 0, 1)]
    right = [(1, y) for y in (-1, 0, 1)]
    corner_a, corner_b = [(-1, -1)], [(1, 1)]
    for c in enumerate_all(spec):
        lab = bfs_labels(spec, c.occupied)
        lr = {lab[vertex_index(spec, v)] for v in left} & {lab[vertex_index(spec, v)] for v in right}
        assert connects(c, left, right) == bool(lr)
        ab = lab[vertex_index(spec, corner_a[0])] == lab[vertex_index(spec, corner_b[0])]
        assert connects(c, corner_a, corner_b) == ab


@pytest.mark.parametrize("spec", SMALL, ids=lambda s: s.label())
def test_union_find_matches_bfs_exhaustive(spec):
    counts = cluster_counts(spec)
    for pattern in range(1 << spec.element_count):
        occ = [(pattern >> i) & 1 for i in range(spec.element_count)]
        ref = bfs_labels(spec, occ)
        assert counts[pattern] == len(set(ref) - {-1})
        if spec.element_count <= 16 or pattern % 17 == 0:
            lab = label(Configuration.from_int(spec, pattern))
            assert _partition(lab.labels) == _partition(ref)
            assert lab.cluster_count == counts[pattern]


@pytest.mark.parametrize("kind", [BOND, TRI])
def test_union_find_matches_networkx_fuzz(kind):
    rng = np.random.default_rng(1)
    for i in range(1000):
        n = int(rng.integers(2, 9))
        spec = LatticeSpec.torus(kind, n + 2) if i % 4 == 0 else LatticeSpec(kind, n)
        c = sample(spec, float(rng.uniform(0.2, 0.8)), (7, i))
        lab = label(c)
        ref = sorted(tuple(sorted(cc)) for cc in nx.connected_components(_nx_graph(c)))
        assert _partition(lab.labels) == ref
        assert int(lab.sizes.sum()) == (spec.vertex_count if kind is BOND else c.occupied_count())


def test_vacant_dual_labels_match_networkx():
    rng = np.random.default_rng(2)
    for i in range(200):
        spec = LatticeSpec(BOND, int(rng.integers(1, 7)))
        c = sample(spec, 0.5, (3, i))
        g = geometry(spec)
        occ = c.occupied
        G = nx.Graph()
        G.add_nodes_from(range(g.dual_count))
        G.add_edges_from((int(g.dual_u[e]), int(g.dual_w[e])) for e in range(spec.element_count) if not occ[e])
        assert _partition(vacant_label(c).labels) == sorted(tuple(sorted(x)) for x in nx.connected_components(G))


@given(st.integers(1, 6), st.floats(0, 1), st.integers(0, 2 ** 32))
def test_bond_euler_identity(n, p, s):
    c = sample(LatticeSpec(BOND, n), p, (s, 0))
    G = nx.Graph(_nx_graph(c))
    cycles = len(nx.cycle_basis(G))
    assert cluster_count(c) == c.spec.vertex_count - c.occupied_count() + cycles


@given(st.sampled_from([BOND, TRI]), st.integers(1, 5), st.floats(0, 1), st.integers(0, 2 ** 32), st.data())
def test_adding_an_element(kind, n, p, s, data):
    spec = LatticeSpec(kind, n)
    c = sample(spec, p, (s, 1))
    e = data.draw(st.integers(0, spec.element_count - 1))
    lo, hi = c.with_state(e, False), c.with_state(e, True)
    delta = cluster_count(hi) - cluster_count(lo)
    if kind is BOND:
        assert delta in (-1, 0)
    else:
        # a new site is one cluster that absorbs its distinct neighbouring clusters
        lab = label(lo)
        g = geometry(spec)
        nbrs = g.adj_vertex[g.adj_start[e]:g.adj_start[e + 1]]
        k = len({int(lab.labels[u]) for u in nbrs} - {-1})
        assert delta == 1 - k


def test_histogram_and_boundary_touch():
    spec = LatticeSpec(BOND, 3)
    lab = label(Configuration.full(spec))
    assert lab.size_histogram == {49: 1}
    assert bool(lab.boundary_touch[0])
    lab = label(Configuration.empty(spec))
    assert lab.size_histogram == {1: 49}
    touching = sum(bool(lab.boundary_touch[lab.component(vertex_coords(spec, v))]) for v in range(49))
    assert touching == 24
