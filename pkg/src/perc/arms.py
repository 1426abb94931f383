"""Arm events, edge-centred four/three-arm events, pivotality and the pivotal-bond estimator."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numba as nb
import numpy as np

from ._kernels import Workspace, annulus_arms, components, edge_arm_event, reset_bits
from .config import Configuration, as_seed
from .lattice import (Kind, LatticeSpec, bond_endpoints, geometry, node_graph, vertex_index)
from .observables import Estimate, _threshold
from .parallel import run_chunks, thread_cache, tree_merge
from .rng import fill_bits


class Color(enum.IntEnum):
    VACANT = 0
    OCCUPIED = 1


def parse_colors(text) -> tuple[Color, ...]:
    """``"OVOV"`` / ``"o,v"`` / sequence of colours -> tuple of :class:`Color`."""
    if isinstance(text, str):
        letters = [c for c in text.upper() if c in "OV"]
        return tuple(Color.OCCUPIED if c == "O" else Color.VACANT for c in letters)
    return tuple(Color(int(c)) for c in text)


@dataclass(frozen=True)
class ArmSpec:
    """Cyclic colour word of ``k`` arms crossing the annulus ``A(m, n)``."""

    colors: tuple
    m: int
    n: int

    def __post_init__(self):
        colors = parse_colors(self.colors)
        object.__setattr__(self, "colors", colors)
        if not colors:
            raise ValueError("an arm event needs k >= 1 arms")
        if len(colors) > 4:
            raise ValueError(f"k = {len(colors)} arms is unsupported (k <= 4)")
        if not 1 <= self.m < self.n:
            raise ValueError(f"arm events need 1 <= m < n, got m={self.m}, n={self.n}")

    @property
    def k(self) -> int:
        return len(self.colors)

    @classmethod
    def alternating(cls, k: int, m: int, n: int) -> "ArmSpec":
        """``O``, ``OV``, ``VOV`` or ``OVOV``: the polychromatic words used for ``k = 1..4``."""
        words = {1: "O", 2: "OV", 3: "VOV", 4: "OVOV"}
        if k not in words:
            raise ValueError(f"k = {k} arms is unsupported (k <= 4)")
        return cls(words[k], m, n)

    def word(self) -> str:
        return "".join("O" if c else "V" for c in self.colors)


# ---------------------------------------------------------------------------
# annulus geometry


class Attachments(NamedTuple):
    src: np.ndarray
    dst: np.ndarray
    edge: np.ndarray
    kind: np.ndarray


def _crossing_angle(ax, ay, bx, by, radius):
    """Angle of the point where segment a -> b leaves the square of half-side ``radius``."""
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        x = ax + mid * (bx - ax)
        y = ay + mid * (by - ay)
        if max(abs(x), abs(y)) < radius:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return math.atan2(ay + t * (by - ay), ax + t * (bx - ax))


@lru_cache(maxsize=128)
def attachments(spec: LatticeSpec, center: tuple[int, int], m: int) -> Attachments:
    """Edges from the inner ring of ``A(m, .)`` around ``center`` into the rest of the annulus.

    The inner ring holds primal vertices at max-norm ``m`` and, on the bond
    lattice, dual vertices at max-norm ``m - 1/2``.  Edges are listed in the
    angular order in which they cross the square of half-side ``m + 1/4``.
    """
    ng = node_graph(spec)
    cx2, cy2 = 2 * center[0], 2 * center[1]
    dx = ng.node_x2 - cx2
    dy = ng.node_y2 - cy2
    r2 = np.maximum(np.abs(dx), np.abs(dy))
    dual = ng.node_dual.astype(bool)
    ring = np.where(dual, r2 == 2 * m - 1, r2 == 2 * m)
    outside = np.where(dual, r2 >= 2 * m + 1, r2 >= 2 * m + 2)
    rows = []
    for s in np.flatnonzero(ring):
        for j in range(ng.adj_start[s], ng.adj_start[s + 1]):
            w = ng.adj_node[j]
            if not outside[w]:
                continue
            kind = int(ng.adj_kind[j])
            edge = int(ng.adj_edge[j])
            if kind != 0:
                a, b = ng.edge_u[edge], ng.edge_v[edge]
                if r2[a] < 2 * m or r2[b] < 2 * m:
                    continue
            ang = _crossing_angle(float(dx[s]), float(dy[s]), float(dx[w]), float(dy[w]), 2 * m + 0.5)
            rows.append((ang, int(s), int(w), edge, kind))
    rows.sort()
    arr = np.array([r[1:] for r in rows], dtype=np.int64).reshape(-1, 4)
    return Attachments(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())


def _check_annulus(spec: LatticeSpec, center, n: int):
    if spec.is_torus:
        raise ValueError("arm events are defined on free boxes")
    if max(abs(center[0]), abs(center[1])) + n > spec.n:
        raise ValueError(f"annulus of radius {n} around {center} leaves the box of radius {spec.n}")


def _encode_words(words: Sequence[ArmSpec | Sequence]):
    seqs = np.zeros((len(words), 4), dtype=np.int64)
    lens = np.zeros(len(words), dtype=np.int64)
    for i, w in enumerate(words):
        colors = w.colors if isinstance(w, ArmSpec) else parse_colors(w)
        seqs[i, :len(colors)] = [int(c) for c in colors]
        lens[i] = len(colors)
    return seqs, lens


def _flow_ws(spec):
    ng = node_graph(spec)
    return thread_cache(("flow", spec), lambda: Workspace(ng, spec.element_count, True))


def _region(center, m, n, excluded=-1, exclude_inner=1):
    return np.array([2 * center[0], 2 * center[1], m, n, excluded, exclude_inner], dtype=np.int64)


def _run_annulus(ws, spec, reg, att, seqs, lens, out):
    ng = node_graph(spec)
    annulus_arms(reg, seqs, lens, out, att.src, att.dst, att.edge, att.kind, ng.node_elem, ng.node_fixed,
                 ng.node_dual, ng.node_x2, ng.node_y2, ng.adj_start, ng.adj_node, ng.adj_edge, ng.adj_kind,
                 ng.edge_u, ng.edge_v, ws.bits, ws.rs, ws.touched, ws.nt, ws.comp, ws.cstamp, ws.use,
                 ws.mark, ws.order, ws.fnext, ws.fprev, ws.fstamp, ws.par, ws.pstamp, ws.ctr, ws.queue)


def arm_events(config: Configuration, words: Sequence, m: int, n: int, center=(0, 0)) -> list[bool]:
    """Evaluate several colour words on the annulus ``A(m, n)`` around ``center``."""
    spec = config.spec
    _check_annulus(spec, center, n)
    if not 1 <= m < n:
        raise ValueError(f"arm events need 1 <= m < n, got m={m}, n={n}")
    seqs, lens = _encode_words(words)
    if lens.max() > 4 or lens.min() < 1:
        raise ValueError("colour words need 1 <= k <= 4 arms")
    ws = _flow_ws(spec)
    ws.load(config.occupied)
    out = np.zeros(len(words), dtype=np.uint8)
    try:
        _run_annulus(ws, spec, _region(center, m, n), attachments(spec, tuple(center), m), seqs, lens, out)
    finally:
        ws.bits[:] = 255
    return [bool(v) for v in out]


def arm_event(config: Configuration, arm_spec: ArmSpec, center=(0, 0)) -> bool:
    """Do disjoint arms of the given cyclic colours cross ``A(m, n)``?"""
    return arm_events(config, [arm_spec], arm_spec.m, arm_spec.n, center)[0]


@nb.njit(cache=True, nogil=True)
def _arms_chunk(m, n_list, seqs, lens, att_src, att_dst, att_edge, att_kind, node_elem, node_fixed,
                dual, x2, y2, adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched, nt,
                comp, cstamp, use, mark, order, fnext, fprev, fstamp, par, pstamp, ctr, queue,
                stream0, first, count, counts):
    reg = np.zeros(6, dtype=np.int64)
    reg[2] = m
    reg[4] = -1
    reg[5] = 1
    out = np.zeros(seqs.shape[0], dtype=np.uint8)
    for i in range(count):
        rs[1] = stream0 + np.uint64(first + i)
        for j in range(n_list.size):
            reg[3] = n_list[j]
            annulus_arms(reg, seqs, lens, out, att_src, att_dst, att_edge, att_kind, node_elem,
                         node_fixed, dual, x2, y2, adj_start, adj_node, adj_edge, adj_kind, eu, ev,
                         bits, rs, touched, nt, comp, cstamp, use, mark, order, fnext, fprev, fstamp,
                         par, pstamp, ctr, queue)
            alive = False
            for s in range(seqs.shape[0]):
                if out[s]:
                    counts[s, j] += 1
                    alive = True
            # the events shrink as n grows
            if not alive:
                break
        reset_bits(bits, touched, nt)


def arm_probabilities(spec: LatticeSpec, p: float, words: Sequence, m: int, n_list: Sequence[int],
                      samples: int, seed) -> dict[tuple[str, int], Estimate]:
    """Monte Carlo ``P(Q(m, n))`` for every word and every ``n``, sharing replicates."""
    seed = as_seed(seed)
    n_list = sorted(int(n) for n in n_list)
    _check_annulus(spec, (0, 0), n_list[-1])
    if m < 1 or n_list[0] <= m:
        raise ValueError("arm events need 1 <= m < n")
    seqs, lens = _encode_words(words)
    ng = node_graph(spec)
    att = attachments(spec, (0, 0), m)
    thr, always = _threshold(p)
    nl = np.array(n_list, dtype=np.int64)

    def chunk(first, count):
        ws = _flow_ws(spec)
        ws.set_stream(seed.master_seed, 0, thr, always)
        counts = np.zeros((len(words), nl.size), dtype=np.int64)
        _arms_chunk(m, nl, seqs, lens, att.src, att.dst, att.edge, att.kind, ng.node_elem, ng.node_fixed,
                    ng.node_dual, ng.node_x2, ng.node_y2, ng.adj_start, ng.adj_node, ng.adj_edge,
                    ng.adj_kind, ng.edge_u, ng.edge_v, ws.bits, ws.rs, ws.touched, ws.nt, ws.comp,
                    ws.cstamp, ws.use, ws.mark, ws.order, ws.fnext, ws.fprev, ws.fstamp, ws.par,
                    ws.pstamp, ws.ctr, ws.queue, np.uint64(seed.stream_index), first, count, counts)
        return counts

    total = tree_merge(run_chunks(chunk, samples), lambda a, b: a + b)
    out = {}
    for i, w in enumerate(words):
        name = w.word() if isinstance(w, ArmSpec) else "".join("O" if c else "V" for c in parse_colors(w))
        for j, n in enumerate(n_list):
            k = int(total[i, j])
            out[(name, n)] = Estimate(samples, float(k), float(k), seed)
    return out


def arm_probability(spec: LatticeSpec, p: float, arm_spec: ArmSpec, samples: int, seed) -> Estimate:
    return arm_probabilities(spec, p, [arm_spec], arm_spec.m, [arm_spec.n], samples, seed)[
        (arm_spec.word(), arm_spec.n)]


# ---------------------------------------------------------------------------
# edge-centred events (square-bond)


def _check_edge(spec: LatticeSpec, e: int, n: int):
    if spec.kind is not Kind.SQUARE_BOND or spec.is_torus:
        raise ValueError("edge arm events are defined on free square-bond boxes")
    (x, y), _ = bond_endpoints(spec, e)
    if max(abs(x), abs(y)) + n > spec.n:
        raise ValueError(f"bond {e} is closer than {n} to the box boundary")
    return x, y


def _edge_event(ws, spec, e, n, three):
    ng = node_graph(spec)
    g = geometry(spec)
    return edge_arm_event(e, n, three, ng.primal_count, g.dual_u, g.dual_w, ng.node_elem, ng.node_fixed,
                          ng.node_dual, ng.node_x2, ng.node_y2, ng.adj_start, ng.adj_node, ng.adj_edge,
                          ng.adj_kind, ng.edge_u, ng.edge_v, ws.bits, ws.rs, ws.touched, ws.nt,
                          ws.stamp, ws.use, ws.fnext, ws.fprev, ws.fstamp, ws.par, ws.pstamp, ws.ctr,
                          ws.queue)


def _edge_on_config(config, e, n, three):
    spec = config.spec
    _check_edge(spec, e, n)
    ws = _flow_ws(spec)
    ws.load(config.occupied)
    try:
        return bool(_edge_event(ws, spec, e, n, three))
    finally:
        ws.bits[:] = 255


def edge_four_arm(config: Configuration, e: int, n: int) -> bool:
    """Occupied arms from both endpoints of ``e`` and vacant dual arms from both endpoints of ``e*``
    to the boundary of ``v1(e) + B(n)``, with ``e`` and ``e*`` themselves removed."""
    return _edge_on_config(config, e, n, False)


def edge_three_arm(config: Configuration, e: int, n: int) -> bool:
    """One occupied arm from ``v1(e)`` and two disjoint vacant dual arms from the endpoints of ``e*``."""
    return _edge_on_config(config, e, n, True)


@nb.njit(cache=True, nogil=True)
def _edge_chunk(e, n, three, primal_count, dual_u, dual_w, node_elem, node_fixed, dual, x2, y2,
                adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, use,
                fnext, fprev, fstamp, par, pstamp, ctr, queue, stream0, first, count, out):
    for i in range(count):
        rs[1] = stream0 + np.uint64(first + i)
        hit = edge_arm_event(e, n, three, primal_count, dual_u, dual_w, node_elem, node_fixed, dual,
                             x2, y2, adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched,
                             nt, stamp, use, fnext, fprev, fstamp, par, pstamp, ctr, queue)
        out[i] = 1.0 if hit else 0.0
        reset_bits(bits, touched, nt)


def edge_arm_probability(spec: LatticeSpec, p: float, e: int, n: int, samples: int, seed,
                         three: bool = False) -> Estimate:
    seed = as_seed(seed)
    _check_edge(spec, e, n)
    ng = node_graph(spec)
    g = geometry(spec)
    thr, always = _threshold(p)

    def chunk(first, count):
        ws = _flow_ws(spec)
        ws.set_stream(seed.master_seed, 0, thr, always)
        out = np.empty(count, dtype=np.float64)
        _edge_chunk(e, n, three, ng.primal_count, g.dual_u, g.dual_w, ng.node_elem, ng.node_fixed,
                    ng.node_dual, ng.node_x2, ng.node_y2, ng.adj_start, ng.adj_node, ng.adj_edge,
                    ng.adj_kind, ng.edge_u, ng.edge_v, ws.bits, ws.rs, ws.touched, ws.nt, ws.stamp,
                    ws.use, ws.fnext, ws.fprev, ws.fstamp, ws.par, ws.pstamp, ws.ctr, ws.queue,
                    np.uint64(seed.stream_index), first, count, out)
        return out

    return Estimate.from_chunks(run_chunks(chunk, samples), seed)


# ---------------------------------------------------------------------------
# pivotality


def _bond_spec(config):
    spec = config.spec
    if spec.kind is not Kind.SQUARE_BOND:
        raise ValueError("pivotal-bond events are defined on the square-bond lattice")
    return spec


def pivotal_for_connection(config: Configuration, b: int) -> bool:
    """Event ``E(b)``: no occupied path inside ``B(n)`` minus ``b`` joins the endpoints of ``b``."""
    spec = _bond_spec(config)
    g = geometry(spec)
    occ = config.occupied
    occ[b] = 0
    count = spec.vertex_count
    labels = np.empty(count, dtype=np.int64)
    components(count, g.edge_u, g.edge_v, occ, 1, np.ones(count, np.uint8), 1, np.zeros(count, np.uint8),
               np.empty(count, np.int64), np.empty(count, np.int64), labels)
    return bool(labels[g.edge_u[b]] != labels[g.edge_v[b]])


def dual_separation(config: Configuration, b: int, through_outer_face: bool = True) -> bool:
    """Event ``D(b)``: a vacant dual path joins the endpoints of ``b*`` without using ``b*``.

    Dual paths run across vacant bonds of ``B(n)``.  With ``through_outer_face``
    the region outside the box is one dual vertex (the planar dual of the box
    graph), so paths may pass around the box; otherwise the outer dual ring
    vertices stay separate.
    """
    spec = _bond_spec(config)
    g = geometry(spec)
    occ = config.occupied
    occ[b] = 1  # removes b* from the vacant dual graph
    count = g.dual_count
    outer = (g.dual_radius2 == 2 * spec.n + 1) if not spec.is_torus else np.zeros(count, bool)
    merge = (outer & through_outer_face).astype(np.uint8)
    labels = np.empty(count, dtype=np.int64)
    components(count, g.dual_u, g.dual_w, occ, 0, np.ones(count, np.uint8), 1, merge,
               np.empty(count, np.int64), np.empty(count, np.int64), labels)
    return bool(labels[g.dual_u[b]] == labels[g.dual_w[b]])


@nb.njit(cache=True, nogil=True)
def _pivot_chunk(vertex_count, eu, ev, dual_count, du, dw, outer, border, strict, k0, stream0, first,
                 count, thr, always, out_e, out_d):
    """Per replicate: number of bonds with ``E(b)`` and with ``D(b)``.

    Planar duality of the box graph (exterior face = one dual vertex) gives:
    an occupied ``b`` has ``E(b)`` iff its dual endpoints are joined by vacant
    duals; a vacant ``b`` has it iff its endpoints lie in different clusters.
    Without the exterior face the dual graph is the dual of the box whose
    boundary vertices are all joined outside, hence the ``border`` merge.
    """
    E = eu.size
    bits = np.empty(E, dtype=np.uint8)
    pl = np.empty(vertex_count, dtype=np.int64)
    plb = np.empty(vertex_count, dtype=np.int64)
    dl = np.empty(dual_count, dtype=np.int64)
    dls = np.empty(dual_count, dtype=np.int64)
    pp = np.empty(max(vertex_count, dual_count), dtype=np.int64)
    ps = np.empty(max(vertex_count, dual_count), dtype=np.int64)
    ones_v = np.ones(vertex_count, dtype=np.uint8)
    ones_d = np.ones(dual_count, dtype=np.uint8)
    no_v = np.zeros(vertex_count, dtype=np.uint8)
    no_d = np.zeros(dual_count, dtype=np.uint8)
    for i in range(count):
        fill_bits(bits, k0, stream0 + np.uint64(first + i), thr, always)
        components(vertex_count, eu, ev, bits, 1, ones_v, 1, no_v, pp, ps, pl)
        components(dual_count, du, dw, bits, 0, ones_d, 1, outer, pp, ps, dl)
        if strict:
            components(vertex_count, eu, ev, bits, 1, ones_v, 1, border, pp, ps, plb)
            components(dual_count, du, dw, bits, 0, ones_d, 1, no_d, pp, ps, dls)
        se = 0
        sd = 0
        for b in range(E):
            if bits[b]:
                se += dl[du[b]] == dl[dw[b]]
                if strict:
                    sd += dls[du[b]] == dls[dw[b]]
            else:
                se += pl[eu[b]] != pl[ev[b]]
                if strict:
                    sd += plb[eu[b]] != plb[ev[b]]
        out_e[i] = se
        out_d[i] = sd if strict else se


def pivot_counts(spec: LatticeSpec, p: float, samples: int, seed, through_outer_face: bool = True):
    """Chunks of per-replicate ``(sum_b 1[E(b)], sum_b 1[D(b)])``."""
    if spec.kind is not Kind.SQUARE_BOND or spec.is_torus:
        raise ValueError("pivotal-bond estimators are defined on free square-bond boxes")
    seed = as_seed(seed)
    g = geometry(spec)
    thr, always = _threshold(p)
    outer = (g.dual_radius2 == 2 * spec.n + 1).astype(np.uint8)
    border = (g.radius == spec.n).astype(np.uint8)

    def chunk(first, count):
        oe = np.empty(count, dtype=np.float64)
        od = np.empty(count, dtype=np.float64)
        _pivot_chunk(spec.vertex_count, g.edge_u, g.edge_v, g.dual_count, g.dual_u, g.dual_w, outer,
                     border, not through_outer_face, np.uint64(seed.master_seed),
                     np.uint64(seed.stream_index), first, count, thr, always, oe, od)
        return oe, od

    return run_chunks(chunk, samples)


def lemma3_estimator(spec: LatticeSpec, p: float, samples: int, seed,
                     through_outer_face: bool = True) -> Estimate:
    """Monte Carlo ``N_n(p) / |B(n)|`` with ``N_n(p) = -sum_b P_p(D(b))``.

    Each replicate contributes ``-(1/|B(n)|) sum_b 1[D(b)]``.  Since adding a
    bond lowers the cluster count exactly when it is pivotal for its own
    endpoints, the mean converges to ``kappa'(p)`` itself (a negative number).
    """
    seed = as_seed(seed)
    chunks = pivot_counts(spec, p, samples, seed, through_outer_face)
    norm = -1.0 / spec.vertex_count
    return Estimate.from_chunks([od * norm for _, od in chunks], seed)


def pivotal_sum_estimate(spec: LatticeSpec, p: float, samples: int, seed) -> Estimate:
    """``(1/|B(n)|) sum_b 1[E(b)]`` per replicate; its mean is ``-K_n'(p)/|B(n)|``."""
    chunks = pivot_counts(spec, p, samples, seed, True)
    norm = 1.0 / spec.vertex_count
    return Estimate.from_chunks([oe * norm for oe, _ in chunks], as_seed(seed))


class PivotalReport(NamedTuple):
    """``pivotal[e]``: flipping ``e`` changes the event.  With an ``(A, B)`` pair the
    refined arrays split pivotal elements into A only, B only, and both."""

    pivotal: np.ndarray
    count: int
    a_only: np.ndarray | None = None
    b_only: np.ndarray | None = None
    both: np.ndarray | None = None


def pivotal_edges(config: Configuration, event: Callable[[Configuration], bool],
                  second: Callable[[Configuration], bool] | None = None) -> PivotalReport:
    """Evaluate ``event`` with each element forced occupied and forced vacant."""
    count = config.spec.element_count

    def flips(pred):
        out = np.zeros(count, dtype=bool)
        for e in range(count):
            out[e] = bool(pred(config.with_state(e, True))) != bool(pred(config.with_state(e, False)))
        return out

    piv = flips(event)
    if second is None:
        return PivotalReport(piv, int(piv.sum()))
    piv_b = flips(second)
    return PivotalReport(piv, int(piv.sum()), piv & ~piv_b, piv_b & ~piv, piv & piv_b)
