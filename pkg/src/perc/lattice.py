"""Lattice geometry: boxes, annuli, element indexing, adjacency and planar duality.

Coordinates
-----------
Free boxes use centred coordinates ``(x, y)`` with ``-n <= x, y <= n``; tori use
``0 <= x, y < L``.  Vertices are stored row-major, ``index = row * side + col``.

Square-bond elements (free box) come in two dense blocks: all horizontal bonds
``(x, y)-(x+1, y)`` first, then all vertical bonds ``(x, y)-(x, y+1)``.  On the
torus a bond is ``2 * vertex + direction`` (direction 0 = +x, 1 = +y).  The
first endpoint ``v1`` is always the left (horizontal) or lower (vertical) one.

Triangular-site elements are the vertices themselves.  The triangular lattice is
the square grid plus the ``(+1, +1)`` / ``(-1, -1)`` diagonals, used everywhere.

Dual vertices ``(x + 1/2, y + 1/2)`` are stored by their lower-left primal corner
``(x, y)``; the dual box of radius ``n`` spans ``[-n - 1/2, n + 1/2]^2``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class Kind(str, enum.Enum):
    SQUARE_BOND = "square-bond"
    TRIANGULAR_SITE = "tri-site"


class Boundary(str, enum.Enum):
    FREE = "free"
    TORUS = "torus"


HORIZONTAL = 0
VERTICAL = 1

SQUARE_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))
TRIANGULAR_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1))
# forward half of each step set; every undirected edge appears once
_FORWARD = {Kind.SQUARE_BOND: ((1, 0), (0, 1)), Kind.TRIANGULAR_SITE: ((1, 0), (0, 1), (1, 1))}


def parse_kind(value) -> Kind:
    if isinstance(value, Kind):
        return value
    aliases = {
        "square-bond": Kind.SQUARE_BOND, "square": Kind.SQUARE_BOND, "bond": Kind.SQUARE_BOND,
        "squarebond": Kind.SQUARE_BOND,
        "tri-site": Kind.TRIANGULAR_SITE, "triangular-site": Kind.TRIANGULAR_SITE,
        "triangular": Kind.TRIANGULAR_SITE, "site": Kind.TRIANGULAR_SITE,
        "triangularsite": Kind.TRIANGULAR_SITE,
    }
    key = str(value).strip().lower()
    if key not in aliases:
        raise ValueError(f"unknown lattice kind {value!r}")
    return aliases[key]


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice kind, box radius and boundary mode.

    For ``Boundary.TORUS`` the side length is ``side``; build tori with
    :meth:`LatticeSpec.torus` so that even sides are available.
    """

    kind: Kind
    n: int
    boundary: Boundary = Boundary.FREE
    torus_side: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"box radius must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.boundary is Boundary.TORUS:
            side = self.torus_side if self.torus_side is not None else 2 * self.n + 1
            if side < 3:
                raise ValueError("torus side must be >= 3")
            object.__setattr__(self, "torus_side", int(side))
        elif self.torus_side is not None:
            raise ValueError("torus_side only applies to torus boundary")

    @classmethod
    def torus(cls, kind, side: int) -> "LatticeSpec":
        return cls(parse_kind(kind), max(1, side // 2), Boundary.TORUS, side)

    @property
    def side(self) -> int:
        return self.torus_side if self.boundary is Boundary.TORUS else 2 * self.n + 1

    @property
    def is_torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    @property
    def vertex_count(self) -> int:
        return self.side * self.side

    @property
    def element_count(self) -> int:
        return element_count(self)

    def label(self) -> str:
        if self.is_torus:
            return f"{self.kind.value}/torus{self.side}"
        return f"{self.kind.value}/n{self.n}"


def element_count(spec: LatticeSpec) -> int:
    w = spec.side
    if spec.kind is Kind.TRIANGULAR_SITE:
        return w * w
    if spec.is_torus:
        return 2 * w * w
    return 2 * w * (w - 1)


def _offset(spec: LatticeSpec) -> int:
    return 0 if spec.is_torus else spec.n


def in_box(spec: LatticeSpec, vertex) -> bool:
    x, y = vertex
    lo = -_offset(spec)
    hi = lo + spec.side - 1
    return lo <= x <= hi and lo <= y <= hi


def _check_vertex(spec, vertex):
    if not in_box(spec, vertex):
        raise ValueError(f"vertex {vertex} outside {spec.label()}")


def vertex_index(spec: LatticeSpec, vertex) -> int:
    _check_vertex(spec, vertex)
    off = _offset(spec)
    return (vertex[1] + off) * spec.side + (vertex[0] + off)


def vertex_coords(spec: LatticeSpec, index: int) -> tuple[int, int]:
    w = spec.side
    if not 0 <= index < w * w:
        raise ValueError(f"vertex index {index} out of range")
    off = _offset(spec)
    return (index % w - off, index // w - off)


def enumerate_elements(spec: LatticeSpec) -> list[int]:
    """Dense, gap-free element ids ``0 .. element_count - 1``."""
    return list(range(element_count(spec)))


def encode_element(spec: LatticeSpec, x: int, y: int, direction: int | None = None) -> int:
    """Element id of the site ``(x, y)`` or of the bond leaving ``(x, y)`` in ``direction``."""
    if spec.kind is Kind.TRIANGULAR_SITE:
        if direction is not None:
            raise ValueError("sites carry no direction")
        return vertex_index(spec, (x, y))
    if direction not in (HORIZONTAL, VERTICAL):
        raise ValueError("bond direction must be HORIZONTAL (0) or VERTICAL (1)")
    w = spec.side
    if spec.is_torus:
        return 2 * vertex_index(spec, (x, y)) + direction
    _check_vertex(spec, (x, y))
    col, row = x + spec.n, y + spec.n
    if direction == HORIZONTAL:
        if col >= w - 1:
            raise ValueError(f"no horizontal bond leaves {(x, y)} inside the box")
        return row * (w - 1) + col
    if row >= w - 1:
        raise ValueError(f"no vertical bond leaves {(x, y)} inside the box")
    return w * (w - 1) + row * w + col


def decode_element(spec: LatticeSpec, element: int):
    """Inverse of :func:`encode_element`: ``(x, y)`` for sites, ``(x, y, direction)`` for bonds."""
    count = element_count(spec)
    if not 0 <= element < count:
        raise ValueError(f"element {element} out of range for {spec.label()}")
    if spec.kind is Kind.TRIANGULAR_SITE:
        return vertex_coords(spec, element)
    w = spec.side
    if spec.is_torus:
        x, y = vertex_coords(spec, element // 2)
        return (x, y, element % 2)
    h = w * (w - 1)
    if element < h:
        row, col = divmod(element, w - 1)
        return (col - spec.n, row - spec.n, HORIZONTAL)
    row, col = divmod(element - h, w)
    return (col - spec.n, row - spec.n, VERTICAL)


def bond_endpoints(spec: LatticeSpec, element: int):
    """``(v1, v2)`` of a bond: left/right for horizontal, lower/upper for vertical."""
    if spec.kind is not Kind.SQUARE_BOND:
        raise ValueError("bond endpoints only exist on the square-bond lattice")
    x, y, d = decode_element(spec, element)
    dx, dy = SQUARE_STEPS[d]
    x2, y2 = x + dx, y + dy
    if spec.is_torus:
        x2 %= spec.side
        y2 %= spec.side
    return (x, y), (x2, y2)


def neighbors(spec: LatticeSpec, vertex) -> list[tuple[int, int]]:
    _check_vertex(spec, vertex)
    steps = SQUARE_STEPS if spec.kind is Kind.SQUARE_BOND else TRIANGULAR_STEPS
    x, y = vertex
    out = []
    for dx, dy in steps:
        u = (x + dx, y + dy)
        if spec.is_torus:
            out.append((u[0] % spec.side, u[1] % spec.side))
        elif in_box(spec, u):
            out.append(u)
    return out


def max_norm(vertex) -> int:
    return max(abs(vertex[0]), abs(vertex[1]))


def boundary_vertices(spec: LatticeSpec, n: int | None = None) -> set[tuple[int, int]]:
    """Vertices of max-norm exactly ``n`` (default: the box radius).  Empty on a torus."""
    if spec.is_torus:
        return set()
    n = spec.n if n is None else n
    if not 1 <= n <= spec.n:
        raise ValueError(f"radius {n} outside box of radius {spec.n}")
    return {(x, y) for x in range(-n, n + 1) for y in range(-n, n + 1) if max_norm((x, y)) == n}


def annulus_vertices(spec: LatticeSpec, m: int, n: int) -> set[tuple[int, int]]:
    """``B(n) minus B(m)`` together with the inner boundary ``dB(m)``."""
    if spec.is_torus:
        raise ValueError("annuli are defined on free boxes")
    if not 1 <= m < n:
        raise ValueError(f"annulus needs 1 <= m < n, got m={m}, n={n}")
    if n > spec.n:
        raise ValueError(f"annulus radius {n} exceeds box radius {spec.n}")
    return {(x, y) for x in range(-n, n + 1) for y in range(-n, n + 1) if m <= max_norm((x, y)) <= n}


# ---------------------------------------------------------------------------
# duality (square-bond lattice)


class DualBond(NamedTuple):
    """Dual bond ``b*`` between two vertices of the shifted lattice (half-integer coordinates)."""

    u: tuple[float, float]
    w: tuple[float, float]


def dual_bond(spec: LatticeSpec, element: int) -> DualBond:
    """Dual of a primal bond.

    Horizontal ``(x, y)-(x+1, y)`` maps to ``(x+1/2, y-1/2)-(x+1/2, y+1/2)``; vertical
    ``(x, y)-(x, y+1)`` maps to ``(x-1/2, y+1/2)-(x+1/2, y+1/2)``.
    """
    if spec.kind is not Kind.SQUARE_BOND:
        raise ValueError("duality is defined for the square-bond lattice")
    x, y, d = decode_element(spec, element)
    if d == HORIZONTAL:
        u, w = (x + 0.5, y - 0.5), (x + 0.5, y + 0.5)
    else:
        u, w = (x - 0.5, y + 0.5), (x + 0.5, y + 0.5)
    if spec.is_torus:
        u = (u[0] % spec.side, u[1] % spec.side)
        w = (w[0] % spec.side, w[1] % spec.side)
    return DualBond(u, w)


def primal_of_dual(spec: LatticeSpec, dual: DualBond) -> int:
    """The primal bond crossed by ``dual``; inverse of :func:`dual_bond`."""
    (ux, uy), (wx, wy) = dual
    if spec.is_torus:
        L = spec.side
        # undo wraparound: pick representatives at unit distance
        if abs(wx - ux) > 1:
            wx = wx + L if wx < ux else wx - L
        if abs(wy - uy) > 1:
            wy = wy + L if wy < uy else wy - L
    if abs(ux - wx) == 0 and abs(uy - wy) == 1:
        x = int(ux - 0.5)
        y = int(max(uy, wy) - 0.5)
        if spec.is_torus:
            x %= spec.side
            y %= spec.side
        return encode_element(spec, x, y, HORIZONTAL)
    if abs(uy - wy) == 0 and abs(ux - wx) == 1:
        x = int(max(ux, wx) - 0.5)
        y = int(uy - 0.5)
        if spec.is_torus:
            x %= spec.side
            y %= spec.side
        return encode_element(spec, x, y, VERTICAL)
    raise ValueError(f"{dual} is not a dual bond")


def crosses(spec: LatticeSpec, element: int, dual: DualBond) -> bool:
    """True when ``dual`` and the primal bond share their midpoint and are perpendicular."""
    if spec.is_torus:
        return primal_of_dual(spec, dual) == element
    (x1, y1), (x2, y2) = bond_endpoints(spec, element)
    (ux, uy), (wx, wy) = dual
    same_mid = (x1 + x2) / 2 == (ux + wx) / 2 and (y1 + y2) / 2 == (uy + wy) / 2
    perpendicular = (x2 - x1) * (wx - ux) + (y2 - y1) * (wy - uy) == 0
    return same_mid and perpendicular


# ---------------------------------------------------------------------------
# array geometry shared by the numba kernels


@dataclass(frozen=True)
class Geometry:
    """Flat arrays describing one spec.

    ``edge_u``/``edge_v`` list every undirected primal edge once.  For the bond
    lattice edge ``e`` is element ``e``; for the site lattice ``edge_u``/``edge_v``
    are site (= element) ids.  ``dual_u``/``dual_w`` give the dual endpoints of
    every bond (bond lattice only).  ``radius`` is the max-norm of each vertex and
    ``dual_radius2`` twice the max-norm of each dual vertex (free boxes).
    """

    spec: LatticeSpec
    vertex_x: np.ndarray
    vertex_y: np.ndarray
    radius: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    dual_count: int
    dual_u: np.ndarray
    dual_w: np.ndarray
    dual_x2: np.ndarray
    dual_y2: np.ndarray
    dual_radius2: np.ndarray
    adj_start: np.ndarray
    adj_vertex: np.ndarray
    adj_edge: np.ndarray


def _csr(count, u, v, edge_ids):
    deg = np.bincount(np.concatenate([u, v]), minlength=count)
    start = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(deg, out=start[1:])
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    eid = np.concatenate([edge_ids, edge_ids])
    order = np.lexsort((dst, src))
    return start, dst[order].astype(np.int32), eid[order].astype(np.int32)


@lru_cache(maxsize=64)
def geometry(spec: LatticeSpec) -> Geometry:
    w = spec.side
    off = _offset(spec)
    idx = np.arange(w * w, dtype=np.int64)
    col, row = idx % w, idx // w
    vx, vy = (col - off).astype(np.int32), (row - off).astype(np.int32)
    radius = np.maximum(np.abs(vx), np.abs(vy)).astype(np.int32)

    if spec.kind is Kind.SQUARE_BOND:
        if spec.is_torus:
            u = np.repeat(idx, 2)
            d = np.tile(np.array([0, 1]), w * w)
            c, r = u % w, u // w
            v = np.where(d == 0, r * w + (c + 1) % w, ((r + 1) % w) * w + c)
        else:
            hr, hc = np.divmod(np.arange(w * (w - 1)), w - 1)
            vr, vc = np.divmod(np.arange(w * (w - 1)), w)
            u = np.concatenate([hr * w + hc, vr * w + vc])
            v = np.concatenate([hr * w + hc + 1, (vr + 1) * w + vc])
        edge_u, edge_v = u.astype(np.int32), v.astype(np.int32)
        edge_ids = np.arange(edge_u.size, dtype=np.int32)
    else:
        us, vs = [], []
        for dx, dy in _FORWARD[spec.kind]:
            if spec.is_torus:
                us.append(idx)
                vs.append(((row + dy) % w) * w + (col + dx) % w)
            else:
                ok = (col + dx < w) & (row + dy < w)
                us.append(idx[ok])
                vs.append((row[ok] + dy) * w + col[ok] + dx)
        edge_u = np.concatenate(us).astype(np.int32)
        edge_v = np.concatenate(vs).astype(np.int32)
        edge_ids = np.arange(edge_u.size, dtype=np.int32)

    adj_start, adj_vertex, adj_edge = _csr(w * w, edge_u, edge_v, edge_ids)

    empty = np.zeros(0, dtype=np.int32)
    dual_count = 0
    dual_u = dual_w = dual_x2 = dual_y2 = dual_radius2 = empty
    if spec.kind is Kind.SQUARE_BOND:
        ex = vx[edge_u]
        ey = vy[edge_u]
        if spec.is_torus:
            horizontal = (np.arange(edge_u.size) % 2) == 0
        else:
            horizontal = np.arange(edge_u.size) < w * (w - 1)
        # lower-left corners of the two dual endpoints
        ax = np.where(horizontal, ex, ex - 1)
        ay = np.where(horizontal, ey - 1, ey)
        bx, by = ex, ey
        if spec.is_torus:
            dual_count = w * w
            dual_u = ((ay % w) * w + ax % w).astype(np.int32)
            dual_w = ((by % w) * w + bx % w).astype(np.int32)
            didx = np.arange(dual_count)
            dual_x2 = (2 * (didx % w) + 1).astype(np.int32)
            dual_y2 = (2 * (didx // w) + 1).astype(np.int32)
            dual_radius2 = np.zeros(dual_count, dtype=np.int32)
        else:
            dw_ = w + 1
            dual_count = dw_ * dw_
            shift = spec.n + 1
            dual_u = ((ay + shift) * dw_ + ax + shift).astype(np.int32)
            dual_w = ((by + shift) * dw_ + bx + shift).astype(np.int32)
            didx = np.arange(dual_count)
            dual_x2 = (2 * (didx % dw_ - shift) + 1).astype(np.int32)
            dual_y2 = (2 * (didx // dw_ - shift) + 1).astype(np.int32)
            dual_radius2 = np.maximum(np.abs(dual_x2), np.abs(dual_y2)).astype(np.int32)

    return Geometry(spec, vx, vy, radius, edge_u, edge_v, dual_count, dual_u, dual_w,
                    dual_x2, dual_y2, dual_radius2, adj_start, adj_vertex, adj_edge)


def dual_vertex_coords(spec: LatticeSpec, dual_index: int) -> tuple[float, float]:
    g = geometry(spec)
    return (g.dual_x2[dual_index] / 2.0, g.dual_y2[dual_index] / 2.0)


@dataclass(frozen=True)
class NodeGraph:
    """Primal and dual nodes in one adjacency structure.

    Square-bond: nodes ``0 .. V-1`` are primal vertices, ``V .. V+D-1`` dual
    vertices.  Every adjacency entry carries the bond id and a kind: 1 = primal
    edge (open when the bond is occupied), 2 = dual edge (open when the bond is
    vacant).  Triangular-site: nodes are sites, entries carry the geometric edge
    id and kind 0 (open when both sites have the same state).

    ``node_x2``/``node_y2`` are doubled coordinates so dual nodes stay integral.
    """

    spec: LatticeSpec
    node_count: int
    primal_count: int
    node_elem: np.ndarray
    node_fixed: np.ndarray
    node_dual: np.ndarray
    node_x2: np.ndarray
    node_y2: np.ndarray
    adj_start: np.ndarray
    adj_node: np.ndarray
    adj_edge: np.ndarray
    adj_kind: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray


@lru_cache(maxsize=32)
def node_graph(spec: LatticeSpec) -> NodeGraph:
    g = geometry(spec)
    V = spec.vertex_count
    if spec.kind is Kind.SQUARE_BOND:
        D = g.dual_count
        count = V + D
        u = np.concatenate([g.edge_u, V + g.dual_u]).astype(np.int64)
        v = np.concatenate([g.edge_v, V + g.dual_w]).astype(np.int64)
        ids = np.concatenate([np.arange(g.edge_u.size), np.arange(g.edge_u.size)])
        kinds = np.concatenate([np.ones(g.edge_u.size, np.uint8), np.full(g.edge_u.size, 2, np.uint8)])
        node_elem = np.full(count, -1, dtype=np.int32)
        node_fixed = np.concatenate([np.ones(V, np.uint8), np.zeros(D, np.uint8)])
        node_dual = node_fixed ^ 1
        x2 = np.concatenate([2 * g.vertex_x, g.dual_x2]).astype(np.int32)
        y2 = np.concatenate([2 * g.vertex_y, g.dual_y2]).astype(np.int32)
    else:
        count = V
        u = g.edge_u.astype(np.int64)
        v = g.edge_v.astype(np.int64)
        ids = np.arange(g.edge_u.size)
        kinds = np.zeros(g.edge_u.size, np.uint8)
        node_elem = np.arange(V, dtype=np.int32)
        node_fixed = np.zeros(V, np.uint8)
        node_dual = np.zeros(V, np.uint8)
        x2 = (2 * g.vertex_x).astype(np.int32)
        y2 = (2 * g.vertex_y).astype(np.int32)
    deg = np.bincount(np.concatenate([u, v]), minlength=count)
    start = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(deg, out=start[1:])
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    eid = np.concatenate([ids, ids])
    kk = np.concatenate([kinds, kinds])
    order = np.lexsort((dst, src))
    return NodeGraph(spec, count, V, node_elem, node_fixed, node_dual, x2, y2, start,
                     dst[order].astype(np.int32), eid[order].astype(np.int32), kk[order],
                     g.edge_u, g.edge_v)
