"""Cluster labelling, cluster counts and point-to-set connectivity."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from ._kernels import components
from .config import Configuration
from .lattice import Kind, LatticeSpec, geometry, vertex_index


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """Connected components of one configuration.

    ``labels[v]`` is the component of vertex ``v`` or ``-1`` for a vacant site.
    ``boundary_touch[c]`` says whether component ``c`` meets the outer boundary
    (always false on a torus).
    """

    spec: LatticeSpec
    labels: np.ndarray
    cluster_count: int
    sizes: np.ndarray
    boundary_touch: np.ndarray

    @property
    def size_histogram(self) -> dict[int, int]:
        values, counts = np.unique(self.sizes, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def component(self, vertex) -> int:
        return int(self.labels[vertex_index(self.spec, vertex)])


class ClusterInfo(NamedTuple):
    size: int
    touches_boundary: bool


def _finish(spec, labels, nc, boundary_mask):
    active = labels >= 0
    sizes = np.bincount(labels[active], minlength=nc).astype(np.int64)
    touch = np.zeros(nc, dtype=bool)
    hit = labels[active & boundary_mask]
    touch[hit] = True
    return ClusterLabeling(spec, labels, int(nc), sizes, touch)


def _scratch(count):
    return (np.empty(count, dtype=np.int64), np.empty(count, dtype=np.int64),
            np.empty(count, dtype=np.int64))


def label(config: Configuration) -> ClusterLabeling:
    """Occupied clusters.  Bond lattice: every vertex is in a cluster; site lattice: occupied sites only."""
    spec = config.spec
    g = geometry(spec)
    occ = config.occupied
    count = spec.vertex_count
    parent, size, labels = _scratch(count)
    none = np.zeros(count, dtype=np.uint8)
    if spec.kind is Kind.SQUARE_BOND:
        nc = components(count, g.edge_u, g.edge_v, occ, 1, np.ones(count, np.uint8), 1, none,
                        parent, size, labels)
    else:
        nc = components(count, g.edge_u, g.edge_v, np.ones(g.edge_u.size, np.uint8), 1, occ, 1, none,
                        parent, size, labels)
    border = np.zeros(count, dtype=bool) if spec.is_torus else g.radius == spec.n
    return _finish(spec, labels, nc, border)


def vacant_label(config: Configuration, merge_outer: bool = False) -> ClusterLabeling:
    """Vacant clusters: dual vertices joined across vacant bonds, or vacant sites.

    On the bond lattice the labels index dual vertices (see ``geometry(spec).dual_*``)
    and ``merge_outer`` fuses the outer dual ring into one vertex, i.e. treats the
    exterior of the box as a single face.
    """
    spec = config.spec
    g = geometry(spec)
    occ = config.occupied
    if spec.kind is Kind.SQUARE_BOND:
        count = g.dual_count
        outer = np.zeros(count, dtype=bool) if spec.is_torus else g.dual_radius2 == 2 * spec.n + 1
        parent, size, labels = _scratch(count)
        nc = components(count, g.dual_u, g.dual_w, occ, 0, np.ones(count, np.uint8), 1,
                        (outer & merge_outer).astype(np.uint8), parent, size, labels)
        return _finish(spec, labels, nc, outer)
    count = spec.vertex_count
    parent, size, labels = _scratch(count)
    nc = components(count, g.edge_u, g.edge_v, np.ones(g.edge_u.size, np.uint8), 1, occ, 0,
                    np.zeros(count, np.uint8), parent, size, labels)
    border = np.zeros(count, dtype=bool) if spec.is_torus else g.radius == spec.n
    return _finish(spec, labels, nc, border)


def cluster_count(config: Configuration) -> int:
    return label(config).cluster_count


def cluster_of(config: Configuration, vertex) -> ClusterInfo:
    """Size of the occupied cluster of ``vertex`` inside the box and whether it touches the boundary."""
    lab = label(config)
    c = lab.component(vertex)
    if c < 0:
        return ClusterInfo(0, False)
    return ClusterInfo(int(lab.sizes[c]), bool(lab.boundary_touch[c]))


def connects(config: Configuration, set_a: Iterable, set_b: Iterable) -> bool:
    """True iff an occupied path joins some vertex of ``set_a`` to some vertex of ``set_b``.

    A single vertex counts as a path of length zero when it is occupied (always on
    the bond lattice).
    """
    lab = label(config)
    ca = {lab.component(v) for v in set_a} - {-1}
    cb = {lab.component(v) for v in set_b} - {-1}
    return bool(ca & cb)
