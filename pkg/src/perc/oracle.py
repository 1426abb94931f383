"""Exact enumeration oracle: rational polynomials in p from all ``2**E`` configurations.

Observables are summed exactly per occupied-count bucket ``S_k``; the
expectation is then ``sum_k S_k p^k (1-p)^(E-k)`` expanded into monomials with
``Fraction`` coefficients.  Independent reference implementations (plain BFS,
brute-force disjoint-arm search) live here as well.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numba as nb
import numpy as np

from ._kernels import annulus_arms, count_bond_clusters, count_site_clusters
from .config import ENUMERATION_GUARD, Configuration, GuardError, check_guard
from .lattice import Kind, LatticeSpec, geometry, node_graph
from .parallel import run_chunks

ENUM_CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# polynomials


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


@dataclass(frozen=True)
class ExactPoly:
    """``sum_i coeffs[i] * p**i`` with exact rational coefficients (trailing zeros trimmed)."""

    coeffs: tuple

    def __post_init__(self):
        c = [_frac(x) for x in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def constant(cls, value) -> "ExactPoly":
        return cls((value,))

    @classmethod
    def monomial(cls, degree: int, value=1) -> "ExactPoly":
        return cls((0,) * degree + (value,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, p):
        """Exact value for ``int``/``Fraction`` arguments; a float (from the exact value) otherwise."""
        exact = isinstance(p, (int, Fraction, np.integer))
        x = _frac(p)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc if exact else float(acc)

    def derivative(self, r: int = 1) -> "ExactPoly":
        if r < 0:
            raise ValueError("derivative order must be >= 0")
        c = list(self.coeffs)
        for _ in range(r):
            c = [i * c[i] for i in range(1, len(c))]
        return ExactPoly(tuple(c))

    def reflect(self) -> "ExactPoly":
        """``q(p) = self(1 - p)``."""
        out = [Fraction(0)] * max(len(self.coeffs), 1)
        for i, c in enumerate(self.coeffs):
            for j in range(i + 1):
                out[j] += c * math.comb(i, j) * (-1) ** j
        return ExactPoly(tuple(out))

    def _binary(self, other, sign):
        other = other if isinstance(other, ExactPoly) else ExactPoly.constant(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return ExactPoly(tuple(x + sign * y for x, y in zip(a, b)))

    def __add__(self, other):
        return self._binary(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return ExactPoly(tuple(-c for c in self.coeffs))

    def __mul__(self, other):
        if not isinstance(other, ExactPoly):
            s = _frac(other)
            return ExactPoly(tuple(c * s for c in self.coeffs))
        if self.is_zero() or other.is_zero():
            return ExactPoly(())
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ExactPoly(tuple(out))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / _frac(other))

    def to_json(self) -> dict:
        return {"degree": self.degree,
                "coefficients": [{"num": str(c.numerator), "den": str(c.denominator)} for c in self.coeffs]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj) -> "ExactPoly":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(tuple(Fraction(int(c["num"]), int(c["den"])) for c in obj["coefficients"]))

    def __repr__(self):
        terms = [f"({c})*p^{i}" for i, c in enumerate(self.coeffs) if c]
        return "ExactPoly(" + (" + ".join(terms) if terms else "0") + ")"


def exact_derivative(poly: ExactPoly, r: int = 1) -> ExactPoly:
    if r < 1:
        raise ValueError("derivative order must be >= 1")
    return poly.derivative(r)


def bernstein(E: int, m: int) -> ExactPoly:
    """``p^m (1-p)^(E-m)``."""
    return ExactPoly.monomial(m) * _one_minus_power(E - m)


def _one_minus_power(k: int) -> ExactPoly:
    return ExactPoly(tuple(math.comb(k, j) * (-1) ** j for j in range(k + 1)))


def poly_from_buckets(E: int, sums: Sequence) -> ExactPoly:
    """``sum_k sums[k] p^k (1-p)^(E-k)`` in monomial form."""
    out = [Fraction(0)] * (E + 1)
    for k, s in enumerate(sums):
        s = _frac(s)
        if s == 0:
            continue
        for j in range(E - k + 1):
            out[k + j] += s * math.comb(E - k, j) * (-1) ** j
    return ExactPoly(tuple(out))


# ---------------------------------------------------------------------------
# exhaustive evaluation


def popcounts(E: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << E, dtype=np.uint64)).astype(np.int64)


def bucket_sums(E: int, values) -> list:
    """Exact per-popcount sums of a per-pattern value array (ints, floats or Fractions)."""
    pc = popcounts(E)
    values = np.asarray(values)
    if values.dtype == object:
        sums = [Fraction(0)] * (E + 1)
        for k, v in zip(pc, values):
            sums[k] += _frac(v)
        return sums
    if np.issubdtype(values.dtype, np.integer) or values.dtype == bool:
        v = values.astype(np.int64)
        return [int(v[pc == k].sum()) for k in range(E + 1)]
    return [sum((Fraction(float(x)) for x in values[pc == k]), Fraction(0)) for k in range(E + 1)]


def pattern_bits(E: int) -> np.ndarray:
    """``(2**E, E)`` uint8 matrix; row ``i`` is the configuration with bit pattern ``i``."""
    idx = np.arange(1 << E, dtype=np.uint64)[:, None]
    return ((idx >> np.arange(E, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(np.uint8)


def evaluate_all(spec: LatticeSpec, observable: Callable[[Configuration], object]) -> np.ndarray:
    """Observable value for every configuration, indexed by bit pattern."""
    E = check_guard(spec)
    vals = [observable(Configuration.from_int(spec, i)) for i in range(1 << E)]
    if all(isinstance(v, (bool, int, np.integer, np.bool_)) for v in vals):
        return np.array(vals, dtype=np.int64)
    return np.array(vals, dtype=object)


def exact_expectation(spec: LatticeSpec, observable) -> ExactPoly:
    """``E_p[observable]`` as an exact polynomial in ``p``.

    ``observable`` is a function of a :class:`Configuration` or a precomputed
    array of values indexed by bit pattern.
    """
    E = check_guard(spec)
    values = observable if isinstance(observable, np.ndarray) else evaluate_all(spec, observable)
    if values.shape != (1 << E,):
        raise ValueError("value array must have one entry per configuration")
    return poly_from_buckets(E, bucket_sums(E, values))


def microcanonical_exact(spec: LatticeSpec, values: np.ndarray) -> list[Fraction]:
    """``A_m`` = average of ``values`` over all configurations with exactly ``m`` occupied elements."""
    E = check_guard(spec)
    sums = bucket_sums(E, values)
    return [_frac(s) / math.comb(E, m) for m, s in enumerate(sums)]


@nb.njit(cache=True, nogil=True)
def _all_cluster_counts(site, vertex_count, eu, ev, E, first, out):
    bits = np.zeros(E, dtype=np.uint8)
    parent = np.empty(vertex_count, dtype=np.int64)
    size = np.empty(vertex_count, dtype=np.int64)
    for i in range(out.size):
        pat = first + i
        for j in range(E):
            bits[j] = (pat >> j) & 1
        if site:
            out[i] = count_site_clusters(vertex_count, eu, ev, bits, parent, size)
        else:
            out[i] = count_bond_clusters(vertex_count, eu, ev, bits, parent, size)


def cluster_counts(spec: LatticeSpec) -> np.ndarray:
    """``M(w)`` for every configuration ``w`` (bit-pattern order), pattern ranges split across threads."""
    E = check_guard(spec)
    g = geometry(spec)
    site = spec.kind is Kind.TRIANGULAR_SITE

    def chunk(first, count):
        out = np.empty(count, dtype=np.int64)
        _all_cluster_counts(site, spec.vertex_count, g.edge_u, g.edge_v, E, first, out)
        return out

    return np.concatenate(run_chunks(chunk, 1 << E, ENUM_CHUNK))


def cluster_count_poly(spec: LatticeSpec) -> ExactPoly:
    """Exact ``K(p) = E_p[M]``."""
    return exact_expectation(spec, cluster_counts(spec))


# ---------------------------------------------------------------------------
# independent breadth-first search


def bfs_labels(spec: LatticeSpec, occupied) -> list[int]:
    """Component label per vertex by plain BFS (-1 for vacant sites); no union-find involved."""
    g = geometry(spec)
    V = spec.vertex_count
    occupied = list(occupied)
    adj = [[] for _ in range(V)]
    for e, (a, b) in enumerate(zip(g.edge_u.tolist(), g.edge_v.tolist())):
        if spec.kind is Kind.SQUARE_BOND:
            if occupied[e]:
                adj[a].append(b)
                adj[b].append(a)
        elif occupied[a] and occupied[b]:
            adj[a].append(b)
            adj[b].append(a)
    labels = [-1] * V
    nxt = 0
    for v in range(V):
        if labels[v] >= 0 or (spec.kind is Kind.TRIANGULAR_SITE and not occupied[v]):
            continue
        labels[v] = nxt
        q = deque([v])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if labels[w] < 0:
                    labels[w] = nxt
                    q.append(w)
        nxt += 1
    return labels


# ---------------------------------------------------------------------------
# matching identity on tori


def euler_density(spec: LatticeSpec, occupied: np.ndarray) -> Fraction:
    """Local Euler characteristic per vertex of the occupied complex.

    Bond lattice: ``(V - E_occ) / V`` (vertices minus occupied bonds).
    Site lattice: ``(V_occ - E_occ + T_occ) / V`` counting occupied sites, edges
    with both ends occupied and triangles with all three corners occupied.
    """
    g = geometry(spec)
    V = spec.vertex_count
    occ = np.asarray(occupied, dtype=np.int64)
    if spec.kind is Kind.SQUARE_BOND:
        return Fraction(int(V - occ.sum()), V)
    w = spec.side
    edges = int(np.sum(occ[g.edge_u] & occ[g.edge_v]))
    tri = 0
    for v in range(V):
        x, y = v % w, v // w
        right = y * w + (x + 1) % w
        up = ((y + 1) % w) * w + x
        diag = ((y + 1) % w) * w + (x + 1) % w
        tri += occ[v] & occ[right] & occ[diag]
        tri += occ[v] & occ[up] & occ[diag]
    return Fraction(int(occ.sum() - edges + tri), V)


class MatchingResult(NamedTuple):
    """``polynomial``: size-independent ``kappa(p) - kappa(1-p)``; ``per_size[L]``: the exact
    torus difference; ``residual[L] = per_size[L] - polynomial``."""

    kind: Kind
    polynomial: ExactPoly
    per_size: dict
    residual: dict


DEFAULT_TORI = {Kind.SQUARE_BOND: (3,), Kind.TRIANGULAR_SITE: (3, 4)}


def matching_polynomial(kind, torus_sizes: Sequence[int] | None = None) -> MatchingResult:
    """Exact ``kappa_L(p) - kappa_L(1-p)`` on small tori and its stabilised part.

    The stabilised polynomial is the exact expectation of the local Euler
    characteristic per vertex, which the torus differences share up to terms
    from clusters that wrap around the torus (reported as residuals).
    """
    from .lattice import parse_kind
    kind = parse_kind(kind)
    sizes = tuple(torus_sizes) if torus_sizes else DEFAULT_TORI[kind]
    per_size, residual = {}, {}
    stable = None
    for L in sizes:
        spec = LatticeSpec.torus(kind, L)
        check_guard(spec)
        V = spec.vertex_count
        kappa = cluster_count_poly(spec) / V
        g_L = kappa - kappa.reflect()
        E = spec.element_count
        occ = pattern_bits(E)
        euler = np.array([euler_density(spec, row) for row in occ], dtype=object) if E <= 16 else None
        if euler is None:
            # bond lattice: (V - E_occ)/V depends on the occupied count only
            phi = poly_from_buckets(E, [Fraction(V - k, V) * math.comb(E, k) for k in range(E + 1)])
        else:
            phi = exact_expectation(spec, euler)
        if stable is None:
            stable = phi
        elif phi != stable:
            raise AssertionError("Euler density expectation differs between tori")
        per_size[L] = g_L
        residual[L] = g_L - phi
    return MatchingResult(kind, stable, per_size, residual)


# ---------------------------------------------------------------------------
# brute-force disjoint arms


class AnnulusRegion(NamedTuple):
    nodes: np.ndarray      # global node ids, local index = position
    local: np.ndarray      # global -> local (-1 outside)
    ring: np.ndarray       # uint8 per local node
    outer: np.ndarray
    adj_start: np.ndarray  # local CSR over allowed edges
    adj_node: np.ndarray
    adj_edge: np.ndarray
    adj_kind: np.ndarray
    att_src: np.ndarray    # attachments in angular order (local ids)
    att_dst: np.ndarray
    att_edge: np.ndarray
    att_kind: np.ndarray


@lru_cache(maxsize=32)
def annulus_region(spec: LatticeSpec, m: int, n: int, center=(0, 0)) -> AnnulusRegion:
    from .arms import attachments
    ng = node_graph(spec)
    dx = ng.node_x2 - 2 * center[0]
    dy = ng.node_y2 - 2 * center[1]
    r2 = np.maximum(np.abs(dx), np.abs(dy))
    dual = ng.node_dual.astype(bool)
    ring = np.where(dual, r2 == 2 * m - 1, r2 == 2 * m)
    inner = np.where(dual, (r2 >= 2 * m + 1) & (r2 <= 2 * n + 1), (r2 >= 2 * m + 2) & (r2 <= 2 * n))
    outer = np.where(dual, r2 == 2 * n + 1, r2 == 2 * n)
    member = ring | inner
    nodes = np.flatnonzero(member)
    local = np.full(ng.node_count, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    rows = [[] for _ in nodes]
    for li, v in enumerate(nodes):
        for j in range(ng.adj_start[v], ng.adj_start[v + 1]):
            w = ng.adj_node[j]
            if not member[w]:
                continue
            kind = int(ng.adj_kind[j])
            edge = int(ng.adj_edge[j])
            if kind != 0:
                a, b = ng.edge_u[edge], ng.edge_v[edge]
                if not (2 * m <= r2[a] <= 2 * n and 2 * m <= r2[b] <= 2 * n):
                    continue
            rows[li].append((int(local[w]), edge, kind))
    start = np.zeros(nodes.size + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=start[1:])
    flat = [x for r in rows for x in r]
    arr = np.array(flat, dtype=np.int64).reshape(-1, 3)
    att = attachments(spec, tuple(center), m)
    return AnnulusRegion(nodes, local, ring[nodes].astype(np.uint8), outer[nodes].astype(np.uint8), start,
                         arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(),
                         local[att.src], local[att.dst], att.edge.copy(), att.kind.copy())


@nb.njit(cache=True)
def _node_color(g, node_elem, node_fixed, bits):
    e = node_elem[g]
    if e < 0:
        return node_fixed[g]
    return bits[e]


@nb.njit(cache=True)
def _open(kind, edge, cu, cw, bits):
    if kind == 0:
        return cu == cw
    if kind == 1:
        return bits[edge] == 1
    return bits[edge] == 0


@nb.njit(cache=True)
def enumerate_arms(nodes, ring, outer, adj_start, adj_node, adj_edge, adj_kind, att_src, att_dst,
                   att_edge, att_kind, node_elem, node_fixed, bits, words, limit, masks, colors, starts):
    """All minimal monochromatic arms: a ring node, then non-ring annulus nodes, ending at the
    first outer node.  Returns the number found, or -1 past ``limit``."""
    N = nodes.size
    color = np.empty(N, dtype=np.int64)
    for i in range(N):
        color[i] = _node_color(nodes[i], node_elem, node_fixed, bits)
    on_path = np.zeros(N, dtype=np.uint8)
    path = np.empty(N + 1, dtype=np.int64)
    ptr = np.empty(N + 1, dtype=np.int64)
    count = 0
    for a in range(att_src.size):
        s = att_src[a]
        w = att_dst[a]
        if color[s] != color[w] or not _open(att_kind[a], att_edge[a], color[s], color[w], bits):
            continue
        c = color[s]
        on_path[s] = 1
        on_path[w] = 1
        path[0] = s
        path[1] = w
        depth = 1
        ptr[1] = adj_start[w]
        if outer[w]:
            depth = 0
            if count >= limit:
                return -1
            for q in range(words):
                masks[count, q] = 0
            for t in range(2):
                v = path[t]
                masks[count, v >> 6] |= np.uint64(1) << np.uint64(v & 63)
            colors[count] = c
            starts[count] = a
            count += 1
        while depth >= 1:
            v = path[depth]
            j = ptr[depth]
            if j >= adj_start[v + 1]:
                on_path[v] = 0
                depth -= 1
                continue
            ptr[depth] = j + 1
            u = adj_node[j]
            if on_path[u] or ring[u] or color[u] != c:
                continue
            if not _open(adj_kind[j], adj_edge[j], c, color[u], bits):
                continue
            if outer[u]:
                if count >= limit:
                    return -1
                for q in range(words):
                    masks[count, q] = 0
                for t in range(depth + 1):
                    pv = path[t]
                    masks[count, pv >> 6] |= np.uint64(1) << np.uint64(pv & 63)
                masks[count, u >> 6] |= np.uint64(1) << np.uint64(u & 63)
                colors[count] = c
                starts[count] = a
                count += 1
                continue
            depth += 1
            path[depth] = u
            on_path[u] = 1
            ptr[depth] = adj_start[u]
        on_path[s] = 0
        on_path[w] = 0
    return count


@nb.njit(cache=True)
def _disjoint(masks, i, used, words):
    for q in range(words):
        if masks[i, q] & used[q]:
            return False
    return True


@nb.njit(cache=True)
def disjoint_tuple_exists(masks, colors, starts, count, seq, k, words):
    """Is there a list of pairwise disjoint arms with strictly increasing start positions whose
    colours read a rotation of ``seq``?"""
    need = np.zeros(2, dtype=np.int64)
    for t in range(k):
        need[seq[t]] += 1
    have = np.zeros(2, dtype=np.int64)
    for i in range(count):
        have[colors[i]] += 1
    if have[0] < need[0] or have[1] < need[1]:
        return False
    used = np.zeros((k + 1, words), dtype=np.uint64)
    idx = np.empty(k, dtype=np.int64)
    for rot in range(k):
        repeat = False
        for r0 in range(rot):
            same = True
            for t in range(k):
                if seq[(r0 + t) % k] != seq[(rot + t) % k]:
                    same = False
                    break
            if same:
                repeat = True
                break
        if repeat:
            continue
        depth = 0
        idx[0] = -1
        while depth >= 0:
            idx[depth] += 1
            i = idx[depth]
            if i >= count:
                depth -= 1
                continue
            if colors[i] != seq[(rot + depth) % k]:
                continue
            if depth > 0 and starts[i] <= starts[idx[depth - 1]]:
                continue
            if not _disjoint(masks, i, used[depth], words):
                continue
            if depth == k - 1:
                return True
            for q in range(words):
                used[depth + 1, q] = used[depth, q] | masks[i, q]
            depth += 1
            idx[depth] = i
    return False


def brute_force_arm_event(config: Configuration, words: Sequence, m: int, n: int, center=(0, 0),
                          limit: int = 200000) -> list[bool] | None:
    """Ground-truth arm events by exhaustive search over disjoint minimal arms.

    Returns ``None`` if the configuration has more than ``limit`` arms.
    """
    from .arms import _encode_words
    spec = config.spec
    reg = annulus_region(spec, m, n, tuple(center))
    ng = node_graph(spec)
    W = (reg.nodes.size + 63) // 64
    masks = np.zeros((limit, W), dtype=np.uint64)
    colors = np.zeros(limit, dtype=np.int64)
    starts = np.zeros(limit, dtype=np.int64)
    cnt = enumerate_arms(reg.nodes, reg.ring, reg.outer, reg.adj_start, reg.adj_node, reg.adj_edge,
                         reg.adj_kind, reg.att_src, reg.att_dst, reg.att_edge, reg.att_kind, ng.node_elem,
                         ng.node_fixed, config.occupied, W, limit, masks, colors, starts)
    if cnt < 0:
        return None
    seqs, lens = _encode_words(words)
    return [bool(disjoint_tuple_exists(masks, colors, starts, cnt, seqs[i], lens[i], W))
            for i in range(len(words))]


@nb.njit(cache=True)
def _exhaustive_arms(free_elems, base_bits, nodes, ring, outer, adj_start, adj_node, adj_edge, adj_kind,
                     att_src, att_dst, att_edge, att_kind, att_gsrc, att_gdst, node_elem, node_fixed,
                     dual, x2, y2, g_adj_start, g_adj_node, g_adj_edge, g_adj_kind, eu, ev, reg, seqs, lens,
                     words, detector_counts, oracle_counts, mismatches):
    F = free_elems.size
    limit = 4096
    masks = np.zeros((limit, words), dtype=np.uint64)
    colors = np.zeros(limit, dtype=np.int64)
    starts = np.zeros(limit, dtype=np.int64)
    bits = base_bits.copy()
    N = node_elem.size
    touched = np.empty(bits.size, dtype=np.int64)
    nt = np.zeros(1, dtype=np.int64)
    rs = np.zeros(4, dtype=np.uint64)
    comp = np.zeros(N, dtype=np.int64)
    cstamp = np.zeros(N, dtype=np.int64)
    use = np.zeros(N, dtype=np.int64)
    mark = np.zeros(N, dtype=np.int64)
    order = np.zeros(N, dtype=np.int64)
    fnext = np.zeros(N, dtype=np.int64)
    fprev = np.zeros(N, dtype=np.int64)
    fstamp = np.zeros(N, dtype=np.int64)
    par = np.zeros(2 * N, dtype=np.int64)
    pstamp = np.zeros(2 * N, dtype=np.int64)
    ctr = np.zeros(4, dtype=np.int64)
    queue = np.zeros(2 * N, dtype=np.int64)
    out = np.zeros(seqs.shape[0], dtype=np.uint8)
    for pat in range(1 << F):
        pc = 0
        for j in range(F):
            b = (pat >> j) & 1
            bits[free_elems[j]] = b
            pc += b
        annulus_arms(reg, seqs, lens, out, att_gsrc, att_gdst, att_edge, att_kind, node_elem, node_fixed,
                     dual, x2, y2, g_adj_start, g_adj_node, g_adj_edge, g_adj_kind, eu, ev, bits, rs,
                     touched, nt, comp, cstamp, use, mark, order, fnext, fprev, fstamp, par, pstamp, ctr,
                     queue)
        cnt = enumerate_arms(nodes, ring, outer, adj_start, adj_node, adj_edge, adj_kind, att_src, att_dst,
                             att_edge, att_kind, node_elem, node_fixed, bits, words, limit, masks, colors,
                             starts)
        for s in range(seqs.shape[0]):
            truth = disjoint_tuple_exists(masks, colors, starts, cnt, seqs[s], lens[s], words)
            if out[s]:
                detector_counts[s, pc] += 1
            if truth:
                oracle_counts[s, pc] += 1
            if truth != (out[s] == 1):
                mismatches[s] += 1


class ExhaustiveArms(NamedTuple):
    detector: dict   # word -> ExactPoly
    oracle: dict
    mismatches: dict
    free_elements: int


def exhaustive_arm_polynomials(spec: LatticeSpec, words: Sequence, m: int, n: int) -> ExhaustiveArms:
    """Enumerate every state of the elements the annulus depends on; compare detector and oracle.

    Elements outside ``A(m, n)`` are held vacant; at most 24 free elements are allowed.
    """
    from .arms import _encode_words
    if spec.is_torus or n > spec.n:
        raise ValueError("annulus must fit in a free box")
    reg_info = annulus_region(spec, m, n)
    ng = node_graph(spec)
    g = geometry(spec)
    if spec.kind is Kind.TRIANGULAR_SITE:
        free = np.sort(ng.node_elem[reg_info.nodes]).astype(np.int64)
    else:
        r = g.radius
        ok = (r[g.edge_u] >= m) & (r[g.edge_v] >= m) & (r[g.edge_u] <= n) & (r[g.edge_v] <= n)
        free = np.flatnonzero(ok).astype(np.int64)
    if free.size > ENUMERATION_GUARD:
        raise GuardError(f"annulus has {free.size} elements; exhaustive enumeration is capped at {ENUMERATION_GUARD}")
    seqs, lens = _encode_words(words)
    W = (reg_info.nodes.size + 63) // 64
    F = free.size
    det = np.zeros((len(words), F + 1), dtype=np.int64)
    orc = np.zeros((len(words), F + 1), dtype=np.int64)
    mis = np.zeros(len(words), dtype=np.int64)
    reg = np.array([0, 0, m, n, -1, 1], dtype=np.int64)
    base = np.zeros(spec.element_count, dtype=np.uint8)
    gsrc = reg_info.nodes[reg_info.att_src]
    gdst = reg_info.nodes[reg_info.att_dst]
    _exhaustive_arms(free, base, reg_info.nodes, reg_info.ring, reg_info.outer, reg_info.adj_start,
                     reg_info.adj_node, reg_info.adj_edge, reg_info.adj_kind, reg_info.att_src,
                     reg_info.att_dst, reg_info.att_edge, reg_info.att_kind, gsrc, gdst, ng.node_elem,
                     ng.node_fixed, ng.node_dual, ng.node_x2, ng.node_y2, ng.adj_start, ng.adj_node,
                     ng.adj_edge, ng.adj_kind, ng.edge_u, ng.edge_v, reg, seqs, lens, W, det, orc, mis)
    names = ["".join("O" if c else "V" for c in seqs[i, :lens[i]]) for i in range(len(words))]
    return ExhaustiveArms({nm: poly_from_buckets(F, det[i].tolist()) for i, nm in enumerate(names)},
                          {nm: poly_from_buckets(F, orc[i].tolist()) for i, nm in enumerate(names)},
                          {nm: int(mis[i]) for i, nm in enumerate(names)}, F)
