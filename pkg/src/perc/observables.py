"""Monte Carlo observables: cluster density, origin-cluster statistics, crossings and lengths.

Every estimator draws replicate ``i`` from stream ``seed.stream_index + i`` and
reduces fixed chunks of replicates with a fixed merge tree, so results are
bit-identical for any number of worker threads.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numba as nb
import numpy as np

from ._kernels import (Workspace, count_bond_clusters, count_site_clusters, explore_cluster,
                       masked_reach, reset_bits)
from .config import SeedSpec, as_seed
from .lattice import Kind, LatticeSpec, geometry, node_graph, parse_kind
from .parallel import CHUNK, run_chunks, thread_cache, tree_merge
from .rng import fill_bits, threshold_for


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class Estimate:
    """Sample mean and standard error kept as ``(count, sum, sum of squares)``."""

    count: int
    total: float
    total_sq: float
    seed: SeedSpec | None = field(default=None, compare=False)

    @property
    def samples(self) -> int:
        return self.count

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return max(0.0, (self.total_sq - self.total * self.total / self.count) / (self.count - 1))

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)

    def merge(self, other: "Estimate") -> "Estimate":
        return Estimate(self.count + other.count, self.total + other.total,
                        self.total_sq + other.total_sq, self.seed or other.seed)

    @classmethod
    def from_values(cls, values, seed=None) -> "Estimate":
        v = np.asarray(values, dtype=np.float64)
        return cls(int(v.size), math.fsum(v), math.fsum(v * v), seed)

    @classmethod
    def from_chunks(cls, chunks: Sequence[np.ndarray], seed=None) -> "Estimate":
        return tree_merge([cls.from_values(c, seed) for c in chunks], cls.merge)

    @classmethod
    def exact(cls, value: float, samples: int = 1, seed=None) -> "Estimate":
        return cls(samples, value * samples, value * value * samples, seed)

    def __repr__(self):
        return f"Estimate(mean={self.mean!r}, stderr={self.stderr!r}, samples={self.count})"


def _threshold(p):
    t, always = threshold_for(p)
    return np.uint64(t), bool(always)


def _ws(spec: LatticeSpec, flow: bool = False) -> Workspace:
    ng = node_graph(spec)
    return thread_cache(("ws", spec, flow), lambda: Workspace(ng, spec.element_count, flow))


# ---------------------------------------------------------------------------
# cluster density


@nb.njit(cache=True, nogil=True)
def _kappa_chunk(site, vertex_count, element_count, eu, ev, k0, stream0, first, count, thr, always,
                 complement, out):
    bits = np.empty(element_count, dtype=np.uint8)
    parent = np.empty(vertex_count, dtype=np.int64)
    size = np.empty(vertex_count, dtype=np.int64)
    norm = 1.0 / vertex_count
    for i in range(count):
        fill_bits(bits, k0, stream0 + np.uint64(first + i), thr, always)
        if site:
            m = count_site_clusters(vertex_count, eu, ev, bits, parent, size)
        else:
            m = count_bond_clusters(vertex_count, eu, ev, bits, parent, size)
        if complement:
            for j in range(element_count):
                bits[j] ^= 1
            if site:
                m -= count_site_clusters(vertex_count, eu, ev, bits, parent, size)
            else:
                m -= count_bond_clusters(vertex_count, eu, ev, bits, parent, size)
        out[i] = m * norm


def _kappa_values(spec, p, samples, seed, complement):
    seed = as_seed(seed)
    g = geometry(spec)
    thr, always = _threshold(p)
    site = spec.kind is Kind.TRIANGULAR_SITE

    def chunk(first, count):
        out = np.empty(count, dtype=np.float64)
        _kappa_chunk(site, spec.vertex_count, spec.element_count, g.edge_u, g.edge_v,
                     np.uint64(seed.master_seed), np.uint64(seed.stream_index), first, count,
                     thr, always, complement, out)
        return out

    return Estimate.from_chunks(run_chunks(chunk, samples), seed)


def kappa_estimate(spec: LatticeSpec, p: float, samples: int, seed) -> Estimate:
    """Mean of ``M_n / |B(n)|`` over independent configurations."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return _kappa_values(spec, p, samples, seed, False)


def kappa_matching_estimate(spec: LatticeSpec, p: float, samples: int, seed) -> Estimate:
    """Estimate of ``kappa(p) - kappa(1 - p)``.

    Each replicate contributes ``(M(w) - M(complement of w)) / |B(n)|``; the
    complement of a ``p``-configuration is a ``(1 - p)``-configuration, so the
    two terms are unbiased for the two densities and strongly correlated.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return _kappa_values(spec, p, samples, seed, True)


# ---------------------------------------------------------------------------
# origin cluster


@nb.njit(cache=True, nogil=True)
def _origin_chunk(start, radius_limit, stop_at_limit, node_elem, node_fixed, x2, y2, adj_start,
                  adj_node, adj_edge, adj_kind, bits, rs, touched, nt, stamp, ctr, queue,
                  stream0, first, count, sizes, radii):
    for i in range(count):
        rs[1] = stream0 + np.uint64(first + i)
        ctr[0] += 1
        s, r = explore_cluster(start, radius_limit, stop_at_limit, node_elem, node_fixed, x2, y2,
                               adj_start, adj_node, adj_edge, adj_kind, bits, rs, touched, nt,
                               stamp, ctr[0], queue)
        sizes[i] = s
        radii[i] = r
        reset_bits(bits, touched, nt)


def _origin_runs(spec, p, samples, seed, radius_limit, stop_at_limit):
    """Per-replicate origin cluster size and largest radius reached, chunked."""
    seed = as_seed(seed)
    ng = node_graph(spec)
    thr, always = _threshold(p)
    origin = 0 if spec.is_torus else (spec.n * spec.side + spec.n)

    def chunk(first, count):
        ws = _ws(spec)
        ws.set_stream(seed.master_seed, seed.stream_index, thr, always)
        sizes = np.empty(count, dtype=np.int64)
        radii = np.empty(count, dtype=np.int64)
        _origin_chunk(origin, radius_limit, stop_at_limit, ng.node_elem, ng.node_fixed, ng.node_x2,
                      ng.node_y2, ng.adj_start, ng.adj_node, ng.adj_edge, ng.adj_kind, ws.bits, ws.rs,
                      ws.touched, ws.nt, ws.stamp, ws.ctr, ws.queue, np.uint64(seed.stream_index),
                      first, count, sizes, radii)
        return sizes, radii

    return run_chunks(chunk, samples)


@dataclass(frozen=True, eq=False)
class ClusterSizeHistogram:
    """Origin-cluster statistics of one ``(spec, p)``.

    ``counts[s]`` counts replicates whose origin cluster has ``s`` vertices and
    stays off the outer boundary; ``boundary_count`` counts clusters touching it
    (the stand-in for an infinite cluster) and ``vacant_count`` vacant origins.
    """

    spec: LatticeSpec
    p: float
    counts: np.ndarray
    boundary_count: int
    vacant_count: int
    samples: int
    seed: SeedSpec | None = None

    @property
    def theta(self) -> np.ndarray:
        """``theta[s]`` = estimated probability that the origin cluster is finite of size ``s`` (``theta[0]`` = vacant)."""
        t = self.counts / self.samples
        t = t.astype(np.float64)
        t[0] = self.vacant_count / self.samples
        return t

    @property
    def theta_boundary(self) -> float:
        return self.boundary_count / self.samples

    def total_mass(self) -> float:
        return float(self.theta.sum() + self.theta_boundary)


def cluster_size_histogram(spec: LatticeSpec, p: float, samples: int, seed) -> ClusterSizeHistogram:
    seed = as_seed(seed)
    limit = spec.side if spec.is_torus else spec.n
    runs = _origin_runs(spec, p, samples, seed, limit, False)
    sizes = np.concatenate([r[0] for r in runs])
    radii = np.concatenate([r[1] for r in runs])
    vacant = radii < 0
    touch = np.zeros_like(vacant) if spec.is_torus else (radii >= spec.n) & ~vacant
    finite = ~vacant & ~touch
    counts = np.bincount(sizes[finite], minlength=spec.vertex_count + 1).astype(np.int64)
    return ClusterSizeHistogram(spec, p, counts, int(touch.sum()), int(vacant.sum()), samples, seed)


def _check_h(h):
    if h < 0:
        raise ValueError("field h must be >= 0")


def _weights(hist, h):
    theta = hist.theta
    s = np.arange(theta.size, dtype=np.float64)
    return theta, s, np.exp(-h * s)


def free_energy(hist: ClusterSizeHistogram, p: float, h: float) -> float:
    """``F(p, h) = h (1 - theta_0) + sum_{s>=1} theta_s exp(-h s) / s``."""
    _check_h(h)
    theta, s, e = _weights(hist, h)
    return float(h * (1.0 - theta[0]) + np.sum(theta[1:] * e[1:] / s[1:]))


def magnetization(hist: ClusterSizeHistogram, p: float, h: float) -> float:
    """``M(p, h) = 1 - theta_0 - sum_{s>=1} theta_s exp(-h s)``, the h-derivative of ``F``."""
    _check_h(h)
    theta, s, e = _weights(hist, h)
    return float(1.0 - theta[0] - np.sum(theta[1:] * e[1:]))


def chi_f(hist: ClusterSizeHistogram) -> float:
    """Mean finite cluster size ``sum_s s theta_s``."""
    theta = hist.theta
    return float(np.sum(np.arange(theta.size) * theta))


def free_energy_estimate(spec: LatticeSpec, p: float, samples: int, seed) -> Estimate:
    """``F(p, 0)`` as a sample mean of ``1/|C(0)|`` over finite nonempty origin clusters."""
    hist_runs = _origin_runs(spec, p, samples, seed, spec.side if spec.is_torus else spec.n, False)
    chunks = []
    for sizes, radii in hist_runs:
        ok = (radii >= 0) & ((radii < spec.n) | spec.is_torus)
        chunks.append(np.where(ok, 1.0 / np.maximum(sizes, 1), 0.0))
    return Estimate.from_chunks(chunks, as_seed(seed))


def chi_f_estimate(spec: LatticeSpec, p: float, samples: int, seed) -> Estimate:
    """``E[|C(0)|; C(0) finite]`` with boundary-touching clusters counted as infinite."""
    runs = _origin_runs(spec, p, samples, seed, spec.side if spec.is_torus else spec.n, False)
    chunks = [np.where((radii >= 0) & ((radii < spec.n) | spec.is_torus), sizes, 0).astype(np.float64)
              for sizes, radii in runs]
    return Estimate.from_chunks(chunks, as_seed(seed))


def pi_profile(spec: LatticeSpec, radii: Sequence[int], p: float, samples: int, seed) -> list[Estimate]:
    """``P(0 -> dB(r))`` for every ``r`` in ``radii``, all read off the same replicates."""
    radii = [int(r) for r in radii]
    if spec.is_torus:
        raise ValueError("one-arm probabilities are defined on free boxes")
    if not radii or min(radii) < 1 or 2 * max(radii) > spec.n:
        raise ValueError(f"radii must satisfy 1 <= r <= n/2 = {spec.n / 2}")
    seed = as_seed(seed)
    runs = _origin_runs(spec, p, samples, seed, max(radii), True)
    return [Estimate.from_chunks([(reach >= r).astype(np.float64) for _, reach in runs], seed)
            for r in radii]


def pi_n(spec: LatticeSpec, n_inner: int, p: float, samples: int, seed) -> Estimate:
    """Probability that the origin connects to ``dB(n_inner)``."""
    return pi_profile(spec, [n_inner], p, samples, seed)[0]


# ---------------------------------------------------------------------------
# crossings


class Orientation(str, enum.Enum):
    LEFT_RIGHT = "left-right"
    TOP_BOTTOM = "top-bottom"


class Medium(str, enum.Enum):
    OCCUPIED = "occupied"
    VACANT_DUAL = "vacant-dual"
    VACANT_SITE = "vacant-site"


class CrossingMasks(NamedTuple):
    start: np.ndarray
    target: np.ndarray
    nodes: np.ndarray
    edges: np.ndarray
    want: int


@lru_cache(maxsize=64)
def crossing_masks(spec: LatticeSpec, orientation: Orientation, medium: Medium) -> CrossingMasks:
    """Node and edge masks describing one crossing event of the box.

    Occupied and vacant-site crossings run between opposite sides of ``B(n)``.
    On the bond lattice they never use a bond joining two boundary vertices; on
    the site lattice every edge is usable, which makes a left-right occupied
    crossing and a top-bottom vacant crossing exact complements.  Vacant dual crossings
    run between opposite sides of the dual box ``[-n-1/2, n+1/2]^2`` across
    vacant bonds of ``B(n)``.
    """
    orientation = Orientation(orientation)
    medium = Medium(medium)
    if spec.is_torus:
        raise ValueError("crossings are defined on free boxes")
    ng = node_graph(spec)
    g = geometry(spec)
    n = spec.n
    x2, y2 = ng.node_x2, ng.node_y2
    if spec.kind is Kind.TRIANGULAR_SITE and medium is Medium.VACANT_DUAL:
        raise ValueError("vacant dual crossings exist on the square-bond lattice; use vacant-site")
    if spec.kind is Kind.SQUARE_BOND and medium is Medium.VACANT_SITE:
        raise ValueError("vacant-site crossings exist on the triangular-site lattice; use vacant-dual")
    coord = x2 if orientation is Orientation.LEFT_RIGHT else y2
    if medium is Medium.VACANT_DUAL:
        nodes = ng.node_dual.astype(bool)
        edges = np.ones(g.edge_u.size, dtype=bool)
        edge = 2 * n + 1
        want = 0
    else:
        nodes = ng.node_dual == 0
        if spec.kind is Kind.SQUARE_BOND:
            edges = ~((g.radius[g.edge_u] == n) & (g.radius[g.edge_v] == n))
        else:
            edges = np.ones(g.edge_u.size, dtype=bool)
        edge = 2 * n
        want = 1 if medium is Medium.OCCUPIED else 0
    if orientation is Orientation.LEFT_RIGHT:
        start, target = nodes & (coord == -edge), nodes & (coord == edge)
    else:
        start, target = nodes & (coord == edge), nodes & (coord == -edge)
    return CrossingMasks(start.astype(np.uint8), target.astype(np.uint8), nodes.astype(np.uint8),
                         edges.astype(np.uint8), want)


@lru_cache(maxsize=64)
def rectangle_masks(spec: LatticeSpec) -> tuple[CrossingMasks, CrossingMasks]:
    """Self-dual rectangle on the bond lattice: ``[-n, n] x [-n, n-1]``.

    The primal event is a left-right occupied crossing using horizontal bonds of
    the rectangle and vertical bonds strictly inside it; the dual event is a
    top-bottom vacant crossing of the dual edges across exactly those bonds.
    Exactly one of the two occurs in every configuration.
    """
    if spec.kind is not Kind.SQUARE_BOND or spec.is_torus:
        raise ValueError("rectangle crossings are defined on free square-bond boxes")
    ng = node_graph(spec)
    g = geometry(spec)
    n = spec.n
    ux, uy = g.vertex_x[g.edge_u], g.vertex_y[g.edge_u]
    vx, vy = g.vertex_x[g.edge_v], g.vertex_y[g.edge_v]
    horizontal = uy == vy
    inside = (uy <= n - 1) & (vy <= n - 1)
    allowed = inside & (horizontal | ((ux > -n) & (ux < n)))
    x2, y2 = ng.node_x2, ng.node_y2
    primal = ng.node_dual == 0
    in_rect = primal & (y2 <= 2 * n - 2)
    occ = CrossingMasks((in_rect & (x2 == -2 * n)).astype(np.uint8),
                        (in_rect & (x2 == 2 * n)).astype(np.uint8),
                        in_rect.astype(np.uint8), allowed.astype(np.uint8), 1)
    dual = ng.node_dual.astype(bool) & (np.abs(x2) <= 2 * n - 1) & (y2 <= 2 * n - 1)
    vac = CrossingMasks((dual & (y2 == 2 * n - 1)).astype(np.uint8),
                        (dual & (y2 == -2 * n - 1)).astype(np.uint8),
                        dual.astype(np.uint8), allowed.astype(np.uint8), 0)
    return occ, vac


@nb.njit(cache=True, nogil=True)
def _crossing_chunk(start, target, nodes, edges, want, node_elem, node_fixed, adj_start, adj_node,
                    adj_edge, adj_kind, bits, rs, touched, nt, stamp, ctr, queue, stream0, first,
                    count, out):
    for i in range(count):
        rs[1] = stream0 + np.uint64(first + i)
        ctr[0] += 1
        hit = masked_reach(start, target, nodes, edges, want, node_elem, node_fixed, adj_start,
                           adj_node, adj_edge, adj_kind, bits, rs, touched, nt, stamp, ctr[0], queue)
        out[i] = 1.0 if hit else 0.0
        reset_bits(bits, touched, nt)


def crossing_in_config(occupied: np.ndarray, spec: LatticeSpec, masks: CrossingMasks) -> bool:
    """Evaluate a crossing event on one materialised configuration."""
    ng = node_graph(spec)
    ws = _ws(spec)
    ws.load(occupied)
    ws.ctr[0] += 1
    try:
        return bool(masked_reach(masks.start, masks.target, masks.nodes, masks.edges, masks.want,
                                 ng.node_elem, ng.node_fixed, ng.adj_start, ng.adj_node, ng.adj_edge,
                                 ng.adj_kind, ws.bits, ws.rs, ws.touched, ws.nt, ws.stamp, ws.ctr[0],
                                 ws.queue))
    finally:
        ws.bits[:] = 255


def crossing_event(config, orientation=Orientation.LEFT_RIGHT, medium=Medium.OCCUPIED) -> bool:
    return crossing_in_config(config.occupied, config.spec, crossing_masks(config.spec, orientation, medium))


def rectangle_crossings(config) -> tuple[bool, bool]:
    """``(occupied left-right, vacant dual top-bottom)`` crossings of the self-dual rectangle."""
    occ, vac = rectangle_masks(config.spec)
    bits = config.occupied
    return crossing_in_config(bits, config.spec, occ), crossing_in_config(bits, config.spec, vac)


def _crossing_values(spec, masks, p, samples, seed, stream_offset=0):
    seed = as_seed(seed)
    ng = node_graph(spec)
    thr, always = _threshold(p)
    stream0 = np.uint64(seed.stream(stream_offset))

    def chunk(first, count):
        ws = _ws(spec)
        ws.set_stream(seed.master_seed, 0, thr, always)
        out = np.empty(count, dtype=np.float64)
        _crossing_chunk(masks.start, masks.target, masks.nodes, masks.edges, masks.want, ng.node_elem,
                        ng.node_fixed, ng.adj_start, ng.adj_node, ng.adj_edge, ng.adj_kind, ws.bits,
                        ws.rs, ws.touched, ws.nt, ws.stamp, ws.ctr, ws.queue, stream0, first, count, out)
        return out

    return run_chunks(chunk, samples)


def crossing_probability(spec: LatticeSpec, p: float, n: int | None = None,
                         orientation=Orientation.LEFT_RIGHT, medium=Medium.OCCUPIED,
                         samples: int = 10000, seed=0) -> Estimate:
    """``sigma(p, n)`` (occupied) or ``sigma*(p, n)`` (vacant) crossing probability of ``B(n)``."""
    if n is not None and n != spec.n:
        spec = LatticeSpec(spec.kind, n)
    masks = crossing_masks(spec, orientation, medium)
    return Estimate.from_chunks(_crossing_values(spec, masks, p, samples, seed), as_seed(seed))


# ---------------------------------------------------------------------------
# correlation length


def scan_schedule(n_max: int) -> list[int]:
    """``1, 2, ..., 16`` then geometric steps of 1.25 (rounded up) up to ``n_max``."""
    out = list(range(1, min(16, n_max) + 1))
    n = 16
    while True:
        n = math.ceil(n * 1.25)
        if n > n_max:
            break
        out.append(n)
    return out


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ph = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = ph + z2 / (2 * trials)
    half = z * math.sqrt(ph * (1 - ph) / trials + z2 / (4 * trials * trials))
    return (centre - half) / denom, (centre + half) / denom


class Exceeded(NamedTuple):
    """Marker returned when the criterion is not met up to ``n_max`` (or the budget runs out)."""

    n_max: int
    samples_used: int


def dual_crossing_masks(spec: LatticeSpec) -> tuple[CrossingMasks, bool]:
    """Masks for ``sigma*`` and whether the event is the complement of the masked event.

    On the triangular lattice a top-bottom vacant crossing of the box occurs
    exactly when no left-right occupied crossing does, so the cheaper occupied
    search is run and complemented.
    """
    if spec.kind is Kind.TRIANGULAR_SITE:
        return crossing_masks(spec, Orientation.LEFT_RIGHT, Medium.OCCUPIED), True
    return crossing_masks(spec, Orientation.TOP_BOTTOM, Medium.VACANT_DUAL), False


def dual_crossing_probability(spec: LatticeSpec, p: float, samples: int, seed, stream_offset=0) -> Estimate:
    masks, complement = dual_crossing_masks(spec)
    chunks = _crossing_values(spec, masks, p, samples, seed, stream_offset)
    if complement:
        chunks = [1.0 - c for c in chunks]
    return Estimate.from_chunks(chunks, as_seed(seed))


def correlation_length_L(kind, p: float, epsilon0: float = 0.05, sample_budget: int = 10 ** 7,
                         seed=0, samples_per_n: int = 4000, n_max: int = 2048):
    """Smallest scheduled ``n`` whose dual crossing probability is at least ``1 - epsilon0``.

    "At least" means the 95% Wilson lower bound clears ``1 - epsilon0``.  Box
    ``n`` uses streams ``seed.stream_index + (n << 32) + i``, so the same
    replicate uniforms are shared by every ``p`` and ``L`` is monotone under
    the coupling.  Returns an :class:`Exceeded` marker when ``n_max`` or the
    sample budget is reached first.
    """
    kind = parse_kind(kind)
    if not 0 <= p < 0.5:
        raise ValueError("the correlation length is scanned for p < 1/2")
    if not 0 < epsilon0 < 0.5:
        raise ValueError("epsilon0 must lie in (0, 1/2)")
    seed = as_seed(seed)
    used = 0
    for n in scan_schedule(n_max):
        if used + samples_per_n > sample_budget:
            return Exceeded(n_max, used)
        est = dual_crossing_probability(LatticeSpec(kind, n), p, samples_per_n, seed, n << 32)
        used += samples_per_n
        lo, _ = wilson_interval(round(est.total), est.count)
        if lo >= 1.0 - epsilon0:
            return n
    return Exceeded(n_max, used)


def schedule_gap(n: int) -> float:
    """Half the distance to the previous scheduled size: the resolution of ``L``."""
    sched = scan_schedule(max(n, 1))
    i = sched.index(n) if n in sched else len(sched) - 1
    prev = sched[i - 1] if i > 0 else 0
    return (n - prev) / 2.0


# ---------------------------------------------------------------------------
# exponential decay length


class DecayFit(NamedTuple):
    xi: float
    slope: float
    slope_stderr: float
    probabilities: tuple


def xi_decay_estimate(spec: LatticeSpec, p: float, radii: Sequence[int], samples: int, seed) -> DecayFit:
    """Fit ``-log P(0 -> dB(r), C(0) finite)`` against ``r``; the slope is ``1/xi``.

    Finiteness is proxied by the cluster staying off ``dB(spec.n)``; radii must
    not exceed ``spec.n / 2``.
    """
    if p >= 0.5:
        raise ValueError("the decay length is estimated for p < 1/2")
    radii = [int(r) for r in radii]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing with at least two entries")
    if 2 * radii[-1] > spec.n:
        raise ValueError("radii must not exceed half the box radius")
    seed = as_seed(seed)
    runs = _origin_runs(spec, p, samples, seed, spec.n, False)
    reach = np.concatenate([r for _, r in runs])
    finite = reach < spec.n
    probs, errs = [], []
    for r in radii:
        k = int(np.sum((reach >= r) & finite))
        if k == 0:
            raise ValueError(f"no replicate reached radius {r}; increase samples")
        ph = k / samples
        probs.append(ph)
        errs.append(math.sqrt(ph * (1 - ph) / samples) / ph)
    x = np.array(radii, dtype=np.float64)
    y = -np.log(np.array(probs))
    w = 1.0 / np.square(np.array(errs))
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = float((w * (x - xm) * (y - ym)).sum() / sxx)
    stderr = float(math.sqrt(1.0 / sxx))
    return DecayFit(1.0 / slope if slope > 0 else math.inf, slope, stderr, tuple(probs))
