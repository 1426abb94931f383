"""Microcanonical sweeps and their binomial transforms.

A sweep occupies elements one at a time in a uniformly random order and records
the cluster count after every insertion, so one pass gives ``A_m`` (the average
over configurations with ``m`` occupied elements) for every ``m``.  Canonical
values and their ``p``-derivatives follow from

    K(p) = sum_m C(E, m) p^m (1-p)^(E-m) A_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba as nb
import numpy as np

from ._kernels import uf_find
from .config import SeedSpec, as_seed
from .lattice import Kind, LatticeSpec, geometry
from .parallel import run_reduce
from .rng import permutation

MAX_ORDER = 4
MAX_BLOCKS = 64
WINDOW_THRESHOLD = 10 ** 6
SWEEP_CHUNK = 64


@nb.njit(cache=True, nogil=True)
def _sweep_chunk(site, vertex_count, E, eu, ev, adj_start, adj_node, k0, stream0, first, count,
                 block_of, sums, sumsq):
    parent = np.empty(vertex_count, dtype=np.int64)
    size = np.empty(vertex_count, dtype=np.int64)
    occ = np.zeros(vertex_count, dtype=np.uint8)
    path = np.empty(E + 1, dtype=np.float64)
    for i in range(count):
        rep = first + i
        order = permutation(E, k0, stream0 + np.uint64(rep))
        for v in range(vertex_count):
            parent[v] = v
            size[v] = 1
            occ[v] = 0
        if site:
            clusters = 0
        else:
            clusters = vertex_count
        path[0] = clusters
        for m in range(E):
            x = order[m]
            if site:
                occ[x] = 1
                clusters += 1
                for j in range(adj_start[x], adj_start[x + 1]):
                    y = adj_node[j]
                    if occ[y]:
                        a = uf_find(parent, x)
                        b = uf_find(parent, y)
                        if a != b:
                            if size[a] < size[b]:
                                a, b = b, a
                            parent[b] = a
                            size[a] += size[b]
                            clusters -= 1
            else:
                a = uf_find(parent, eu[x])
                b = uf_find(parent, ev[x])
                if a != b:
                    if size[a] < size[b]:
                        a, b = b, a
                    parent[b] = a
                    size[a] += size[b]
                    clusters -= 1
            path[m + 1] = clusters
        blk = block_of[i]
        for m in range(E + 1):
            sums[blk, m] += path[m]
            sumsq[m] += path[m] * path[m]


@dataclass(frozen=True, eq=False)
class MicrocanonicalCurve:
    """Per-occupation-count averages ``A_m`` (m = 0..E) of the cluster count.

    ``block_sums[b]`` / ``block_counts[b]`` hold the replicate sums of
    contiguous replicate blocks; they drive jackknife errors.
    """

    spec: LatticeSpec
    mean: np.ndarray
    variance: np.ndarray
    replicates: int
    block_sums: np.ndarray
    block_counts: np.ndarray
    seed: SeedSpec | None = None

    @property
    def element_count(self) -> int:
        return self.mean.size - 1

    @classmethod
    def from_averages(cls, spec: LatticeSpec, averages: Sequence) -> "MicrocanonicalCurve":
        """Wrap known averages (e.g. exact ones) as a single-block curve."""
        a = np.asarray([float(x) for x in averages], dtype=np.float64)
        return cls(spec, a, np.zeros_like(a), 1, a[None, :].copy(), np.ones(1, dtype=np.int64))


def _blocks(replicates: int) -> np.ndarray:
    nb_ = min(MAX_BLOCKS, replicates)
    return (np.arange(replicates, dtype=np.int64) * nb_) // replicates


def sweep(spec: LatticeSpec, replicates: int, seed) -> MicrocanonicalCurve:
    """Average the cluster-count path over ``replicates`` independent occupation orders.

    Replicate ``i`` uses the permutation stream ``seed.stream_index + i``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    seed = as_seed(seed)
    g = geometry(spec)
    E = spec.element_count
    site = spec.kind is Kind.TRIANGULAR_SITE
    block_all = _blocks(replicates)
    nblk = int(block_all[-1]) + 1

    def chunk(first, count):
        sums = np.zeros((nblk, E + 1), dtype=np.float64)
        sumsq = np.zeros(E + 1, dtype=np.float64)
        _sweep_chunk(site, spec.vertex_count, E, g.edge_u, g.edge_v, g.adj_start, g.adj_vertex,
                     np.uint64(seed.master_seed), np.uint64(seed.stream_index), first, count,
                     block_all[first:first + count], sums, sumsq)
        return sums, sumsq

    sums, sumsq = run_reduce(chunk, lambda a, b: (a[0] + b[0], a[1] + b[1]), replicates, SWEEP_CHUNK)
    counts = np.bincount(block_all, minlength=nblk).astype(np.int64)
    total = sums.sum(axis=0)
    mean = total / replicates
    if replicates > 1:
        var = np.maximum(sumsq - replicates * mean * mean, 0.0) / (replicates - 1)
    else:
        var = np.zeros(E + 1)
    return MicrocanonicalCurve(spec, mean, var, replicates, sums, counts, seed)


# ---------------------------------------------------------------------------
# binomial weights


def _bell(r: int, f1, f2, f3, f4):
    if r == 0:
        return np.ones_like(f1)
    if r == 1:
        return f1
    if r == 2:
        return f1 * f1 + f2
    if r == 3:
        return f1 ** 3 + 3 * f1 * f2 + f3
    return f1 ** 4 + 6 * f1 * f1 * f2 + 4 * f1 * f3 + 3 * f2 * f2 + f4


def _endpoint_weights(E: int, r: int, at_one: bool) -> tuple[np.ndarray, np.ndarray]:
    """r-th derivative of ``C(E,m) p^m (1-p)^(E-m)`` at p = 0 (or p = 1), nonzero only for few m."""
    ms, ws = [], []
    for j in range(min(r, E) + 1):
        # at p = 0: m = j; at p = 1 mirror m -> E - j with a (-1)^r factor
        val = math.comb(E, j) * math.comb(E - j, r - j) * (-1) ** (r - j) * math.factorial(r)
        if at_one:
            val *= (-1) ** r
            ms.append(E - j)
        else:
            ms.append(j)
        ws.append(float(val))
    return np.array(ms, dtype=np.int64), np.array(ws)


FD_VARIANCE = 100.0


def _pmf(E: int, p: float, lo: int, hi: int) -> np.ndarray:
    """Binomial pmf on ``lo..hi``, built from term ratios around the mode and normalised.

    The window is assumed to hold all but a negligible tail; ratios avoid the
    absolute error of large ``lgamma`` differences.
    """
    q = 1.0 - p
    m = np.arange(lo, hi + 1, dtype=np.float64)
    mode = min(max(int(math.floor((E + 1) * p)), lo), hi)
    # t[i] = log w(lo+i+1) - log w(lo+i)
    t = np.log((E - m[:-1]) / (m[:-1] + 1)) + (math.log(p) - math.log(q))
    logw = np.zeros(m.size)
    i0 = mode - lo
    logw[i0 + 1:] = np.cumsum(t[i0:])
    logw[:i0] = -np.cumsum(t[:i0][::-1])[::-1]
    w = np.exp(logw)
    return w / math.fsum(w.tolist())


def binomial_weights(E: int, p: float, r: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``(m, d^r/dp^r [C(E,m) p^m (1-p)^(E-m)])`` over the support that matters.

    For ``E p (1-p) >= FD_VARIANCE`` derivatives multiply the weights by complete
    Bell polynomials in the derivatives of ``log w`` (well conditioned there);
    below it the exact form ``E!/(E-r)! sum_j (-1)^(r-j) C(r,j) b_{E-r,m-j}`` is
    used.  For ``E`` above ``WINDOW_THRESHOLD`` only
    ``|m - Ep| <= 8 sqrt(Ep(1-p)) + 4 r sqrt(E)`` is kept.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if not 0 <= r <= MAX_ORDER:
        raise ValueError(f"derivative order must be in 0..{MAX_ORDER}")
    if p == 0 or p == 1:
        return _endpoint_weights(E, r, p == 1)
    q = 1.0 - p
    if E > WINDOW_THRESHOLD:
        half = 8.0 * math.sqrt(E * p * q) + 4 * r * math.sqrt(E)
        lo = max(0, int(math.floor(E * p - half)))
        hi = min(E, int(math.ceil(E * p + half)))
    else:
        lo, hi = 0, E
    m = np.arange(lo, hi + 1, dtype=np.int64)
    if r == 0:
        return m, _pmf(E, p, lo, hi)
    if r > E:
        return m, np.zeros(m.size)
    if E * p * q < FD_VARIANCE:
        blo, bhi = max(0, lo - r), min(E - r, hi)
        base = np.zeros(hi - lo + 1 + r)
        # base[i] = b_{E-r}(lo - r + i)
        base[blo - (lo - r):bhi - (lo - r) + 1] = _pmf(E - r, p, blo, bhi)
        w = np.zeros(m.size)
        for j in range(r + 1):
            w += (-1) ** (r - j) * math.comb(r, j) * base[r - j:r - j + m.size]
        return m, math.perm(E, r) * w
    mf = m.astype(np.float64)
    w = _pmf(E, p, lo, hi)
    k = E - mf
    f1 = (mf - E * p) / (p * q)
    f2 = -mf / p ** 2 - k / q ** 2
    f3 = 2 * mf / p ** 3 - 2 * k / q ** 3
    f4 = -6 * mf / p ** 4 - 6 * k / q ** 4
    return m, w * _bell(r, f1, f2, f3, f4)


def _transform(values: np.ndarray, E: int, p: float, r: int) -> float:
    m, w = binomial_weights(E, p, r)
    a = values[m]
    if r >= 1 and 0 < p < 1:
        # weights annihilate polynomials in m of degree < r; subtract a local line to curb cancellation
        m0 = int(round(E * p))
        base = values[m0]
        slope = 0.0
        if r >= 2 and 0 < m0 < E:
            slope = 0.5 * (values[m0 + 1] - values[m0 - 1])
        a = a - base - slope * (m - m0)
    return math.fsum((a * w).tolist())


def canonical_value(curve: MicrocanonicalCurve, p: float, r: int = 0, per_vertex: bool = True) -> float:
    """``d^r/dp^r sum_m C(E,m) p^m (1-p)^(E-m) A_m``, optionally divided by the vertex count."""
    val = _transform(curve.mean, curve.element_count, p, r)
    return val / curve.spec.vertex_count if per_vertex else val


class ProfilePoint(NamedTuple):
    p: float
    value: float
    stderr: float


def jackknife_value(curve: MicrocanonicalCurve, p: float, r: int, per_vertex: bool = True) -> ProfilePoint:
    """Canonical value with a delete-one-block jackknife standard error."""
    est = canonical_value(curve, p, r, per_vertex)
    nblk = curve.block_counts.size
    if nblk < 2:
        return ProfilePoint(p, est, float("nan"))
    total = curve.block_sums.sum(axis=0)
    E = curve.element_count
    norm = curve.spec.vertex_count if per_vertex else 1
    loo = np.empty(nblk)
    for b in range(nblk):
        rest = (total - curve.block_sums[b]) / (curve.replicates - curve.block_counts[b])
        loo[b] = _transform(rest, E, p, r) / norm
    err = math.sqrt((nblk - 1) / nblk * float(np.sum((loo - loo.mean()) ** 2)))
    return ProfilePoint(p, est, err)


def derivative_profile(curve: MicrocanonicalCurve, p_grid: Sequence[float], r: int) -> list[ProfilePoint]:
    return [jackknife_value(curve, float(p), r) for p in p_grid]


def kappa_derivative_profile(spec: LatticeSpec, p_grid: Sequence[float], r: int, replicates: int,
                             seed) -> list[ProfilePoint]:
    """Per-vertex ``r``-th derivative of the cluster density over ``p_grid`` with jackknife errors."""
    if any(not 0 < p < 1 for p in p_grid):
        raise ValueError("grid points must lie in (0, 1)")
    return derivative_profile(sweep(spec, replicates, seed), p_grid, r)
