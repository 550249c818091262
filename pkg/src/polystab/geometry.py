"""Polygons, the admissible class, vertex metrics and perturbation fields.

Vertices are stored counterclockwise as an ``(n, 2)`` float array.  Vertex
``i`` joins the incoming edge ``i - 1`` (from ``x[i-1]`` to ``x[i]``) and the
outgoing edge ``i`` (from ``x[i]`` to ``x[i+1]``), indices taken cyclically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionError, FeasibilityError, GeometryError

ANGLE_TOLERANCE = 1e-9
TWO_PI = 2.0 * np.pi


def _as_vertices(vertices) -> np.ndarray:
    v = np.array(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise GeometryError(f"vertices must have shape (n, 2), got {v.shape}")
    if v.shape[0] < 3:
        raise GeometryError(f"a polygon needs at least 3 vertices, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("vertices must be finite")
    return v


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _angles_of(v: np.ndarray) -> np.ndarray:
    incoming = v - np.roll(v, 1, axis=0)
    outgoing = np.roll(v, -1, axis=0) - v
    turn = np.arctan2(_cross(incoming, outgoing), np.sum(incoming * outgoing, axis=1))
    return np.pi - turn


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Closed-segment intersection test, broadcasting over leading axes."""
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_segment(a, b, c, d):
        return (
            (d == 0)
            & (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
            & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
            & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )

    touching = (
        on_segment(q1, q2, p1, d1)
        | on_segment(q1, q2, p2, d2)
        | on_segment(p1, p2, q1, d3)
        | on_segment(p1, p2, q2, d4)
    )
    return proper | touching


def _is_simple(v: np.ndarray) -> bool:
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    if i.size == 0:
        return True
    return not bool(np.any(_segments_intersect(a[i], b[i], a[j], b[j])))


def point_segment_distance(p, a, b) -> np.ndarray:
    """Euclidean distance from points ``p`` to segments ``[a, b]`` (broadcasting)."""
    p, a, b = np.asarray(p, float), np.asarray(a, float), np.asarray(b, float)
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.clip(np.sum((p - a) * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.sqrt(np.sum((p - closest) ** 2, axis=-1))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple counterclockwise polygon; the inclusion ``D``.

    Construction rejects fewer than three vertices, zero-length edges,
    self-intersections, clockwise orientation and corners whose interior
    angle is within ``angle_tolerance`` of pi.  Quantitative gates belong to
    :func:`is_admissible`.
    """

    vertices: np.ndarray
    angle_tolerance: float = ANGLE_TOLERANCE

    def __post_init__(self):
        v = _as_vertices(self.vertices)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(lengths <= 0.0):
            raise GeometryError(f"degenerate (zero-length) edge at index {int(np.argmin(lengths))}")
        if signed_area(v) <= 0.0:
            raise GeometryError("vertices must be ordered counterclockwise (positive signed area)")
        if not _is_simple(v):
            raise GeometryError("polygon boundary self-intersects")
        angles = _angles_of(v)
        flat = np.abs(angles - np.pi) <= self.angle_tolerance
        if np.any(flat):
            raise GeometryError(f"interior angle equal to pi at vertex {int(np.argmax(flat))}")

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @property
    def tangents(self) -> np.ndarray:
        """Unit tangent of each edge, pointing along the counterclockwise direction."""
        return self.edge_vectors / self.edge_lengths[:, None]

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normal of each edge."""
        t = self.tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    @property
    def angles(self) -> np.ndarray:
        return _angles_of(self.vertices)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def translated(self, shift) -> "Polygon":
        return Polygon(self.vertices + np.asarray(shift, float))

    def perturbed(self, displacements) -> "Polygon":
        d = np.asarray(displacements, float).reshape(self.n, 2)
        return Polygon(self.vertices + d)

    def relabeled(self, shift: int) -> "Polygon":
        """Same polygon with the vertex list cyclically rotated by ``shift``."""
        return Polygon(np.roll(self.vertices, -shift, axis=0))

    def boundary_points(self, per_edge: int) -> np.ndarray:
        t = np.arange(per_edge) / per_edge
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        pts = v[:, None, :] + t[None, :, None] * (w - v)[:, None, :]
        return pts.reshape(-1, 2)

    def contains(self, points) -> np.ndarray:
        """Even-odd point-in-polygon test."""
        p = np.atleast_2d(np.asarray(points, float))
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        px, py = p[:, 0][:, None], p[:, 1][:, None]
        cond = (v[:, 1] > py) != (w[:, 1] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = v[:, 0] + (py - v[:, 1]) * (w[:, 0] - v[:, 0]) / (w[:, 1] - v[:, 1])
        crossings = np.sum(cond & (px < xint), axis=1)
        return crossings % 2 == 1

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def regular(cls, n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> "Polygon":
        k = np.arange(n)
        ang = phase + TWO_PI * k / n
        c = np.asarray(center, float)
        return cls(c + radius * np.column_stack([np.cos(ang), np.sin(ang)]))


@dataclass(frozen=True)
class AdmissibleClassParams:
    """Parameters ``(n, delta)`` of the compact class of admissible n-gons."""

    n: int
    delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise GeometryError(f"n must be an integer >= 3, got {self.n}")
        if not self.delta > 0:
            raise GeometryError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True, eq=False)
class VertexPerturbation:
    """One displacement vector per vertex; normed by the max vertex length."""

    displacements: np.ndarray

    def __post_init__(self):
        d = np.array(self.displacements, dtype=float)
        if d.ndim == 1 and d.size % 2 == 0:
            d = d.reshape(-1, 2)
        if d.ndim != 2 or d.shape[1] != 2:
            raise DimensionError(f"displacements must have shape (n, 2), got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "displacements", d)

    @property
    def n(self) -> int:
        return self.displacements.shape[0]

    def norm(self) -> float:
        return float(np.max(np.linalg.norm(self.displacements, axis=1)))

    def flat(self) -> np.ndarray:
        """Coordinates ordered ``[x_1, y_1, x_2, y_2, ...]`` (Jacobian column order)."""
        return self.displacements.reshape(-1).copy()

    @classmethod
    def from_flat(cls, values) -> "VertexPerturbation":
        return cls(np.asarray(values, float).reshape(-1, 2))


class DomainBoundary:
    """Smooth, positively oriented closed curve ``t -> gamma(t)``, ``t`` in ``[0, 2*pi)``.

    Parameters
    ----------
    curve, derivative, second_derivative : callable
        Vectorized maps from parameter arrays to ``(m, 2)`` point arrays.
    center : array_like
        Reference point inside the curve (used by the polygon sampler).
    spec : dict, optional
        JSON-serializable description, used when writing domain files.
    """

    def __init__(
        self,
        curve: Callable[[np.ndarray], np.ndarray],
        derivative: Callable[[np.ndarray], np.ndarray],
        second_derivative: Callable[[np.ndarray], np.ndarray],
        center=(0.0, 0.0),
        spec: dict | None = None,
    ):
        self.curve = curve
        self.derivative = derivative
        self.second_derivative = second_derivative
        self.center = np.asarray(center, dtype=float)
        self.spec = spec or {"type": "custom"}
        self._radius = None
        fine = self.curve(np.linspace(0.0, TWO_PI, 2048, endpoint=False))
        if signed_area(fine) <= 0:
            raise GeometryError("domain boundary must be positively oriented")
        self._fine = fine

    @classmethod
    def circle(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "DomainBoundary":
        if not radius > 0:
            raise GeometryError("circle radius must be positive")
        c = np.asarray(center, float)

        def curve(t):
            t = np.asarray(t, float)
            return c + radius * np.column_stack([np.cos(t), np.sin(t)])

        def d1(t):
            t = np.asarray(t, float)
            return radius * np.column_stack([-np.sin(t), np.cos(t)])

        def d2(t):
            t = np.asarray(t, float)
            return -radius * np.column_stack([np.cos(t), np.sin(t)])

        obj = cls(curve, d1, d2, center=c, spec={"type": "circle", "radius": radius, "center": c.tolist()})
        obj._radius = float(radius)
        return obj

    @classmethod
    def ellipse(cls, a: float, b: float, center=(0.0, 0.0)) -> "DomainBoundary":
        if not (a > 0 and b > 0):
            raise GeometryError("ellipse semi-axes must be positive")
        c = np.asarray(center, float)

        def curve(t):
            t = np.asarray(t, float)
            return c + np.column_stack([a * np.cos(t), b * np.sin(t)])

        def d1(t):
            t = np.asarray(t, float)
            return np.column_stack([-a * np.sin(t), b * np.cos(t)])

        def d2(t):
            t = np.asarray(t, float)
            return -np.column_stack([a * np.cos(t), b * np.sin(t)])

        return cls(curve, d1, d2, center=c, spec={"type": "ellipse", "a": a, "b": b, "center": c.tolist()})

    @classmethod
    def from_samples(cls, points) -> "DomainBoundary":
        """Trigonometric interpolant through equispaced samples of a closed curve."""
        p = np.asarray(points, float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 8:
            raise GeometryError("curve samples must be an (m >= 8, 2) array")
        m = p.shape[0]
        coef = np.fft.rfft(p, axis=0) / m
        freqs = np.arange(coef.shape[0])
        if m % 2 == 0:
            coef[-1] *= 0.5
        scale = np.where(freqs == 0, 1.0, 2.0)

        def _eval(t, order):
            t = np.atleast_1d(np.asarray(t, float))
            phase = np.exp(1j * np.outer(t, freqs)) * (1j * freqs) ** order
            return np.real(phase @ (coef * scale[:, None]))

        return cls(
            lambda t: _eval(t, 0),
            lambda t: _eval(t, 1),
            lambda t: _eval(t, 2),
            center=p.mean(axis=0),
            spec={"type": "samples", "points": p.tolist()},
        )

    @classmethod
    def from_dict(cls, spec: dict) -> "DomainBoundary":
        kind = spec.get("type", "circle")
        center = spec.get("center", (0.0, 0.0))
        if kind == "circle":
            return cls.circle(float(spec.get("radius", 1.0)), center)
        if kind == "ellipse":
            return cls.ellipse(float(spec["a"]), float(spec["b"]), center)
        if kind == "samples":
            return cls.from_samples(spec["points"])
        raise GeometryError(f"unknown domain type {kind!r}")

    @property
    def is_circle(self) -> bool:
        return self._radius is not None

    @property
    def inradius(self) -> float:
        """Distance from :attr:`center` to the curve."""
        if self._radius is not None:
            return self._radius
        return float(np.min(np.linalg.norm(self._fine - self.center, axis=1)))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, float))
        if self._radius is not None:
            return np.linalg.norm(p - self.center, axis=1) < self._radius
        return Polygon.contains(_RawPolygon(self._fine), p)

    def distance_to_polygon(self, polygon: Polygon) -> float:
        """Distance between the curve and the polygon boundary."""
        v = polygon.vertices
        if self._radius is not None:
            return float(self._radius - np.max(np.linalg.norm(v - self.center, axis=1)))
        w = np.roll(v, -1, axis=0)
        d = point_segment_distance(self._fine[:, None, :], v[None], w[None])
        j = int(np.argmin(np.min(d, axis=1)))
        # local refinement around the best coarse sample
        h = TWO_PI / len(self._fine)
        ts = j * h + np.linspace(-h, h, 201)
        q = self.curve(ts)
        dd = point_segment_distance(q[:, None, :], v[None], w[None])
        return float(np.min(dd))


class _RawPolygon:
    """Vertex container that skips validation (for point-in-curve tests)."""

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, float)


def interior_angles(polygon: Polygon) -> np.ndarray:
    """Interior angle at each vertex, in ``(0, 2*pi)``."""
    return polygon.angles


@dataclass(frozen=True)
class Violation:
    item: str
    index: int | None
    value: float | None = None


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    violations: tuple[Violation, ...] = ()

    @property
    def failed_items(self) -> set[str]:
        return {v.item for v in self.violations}

    def __bool__(self) -> bool:
        return self.admissible


def vertex_edge_distances(polygon: Polygon) -> np.ndarray:
    """``D[i, j]`` is the distance from vertex ``i`` to edge ``j``; ``inf`` for incident edges."""
    v = polygon.vertices
    w = np.roll(v, -1, axis=0)
    n = polygon.n
    d = point_segment_distance(v[:, None, :], v[None, :, :], w[None, :, :])
    idx = np.arange(n)
    d[idx, idx] = np.inf
    d[idx, (idx - 1) % n] = np.inf
    return d


def is_admissible(polygon: Polygon, params: AdmissibleClassParams, boundary: DomainBoundary) -> AdmissibilityReport:
    """Check membership of ``polygon`` in the class ``A_{n, delta}`` inside ``boundary``.

    Item (i): every vertex keeps distance ``delta`` from the non-incident
    edges.  Item (ii): ``delta <= alpha_i <= 2*pi - delta`` and
    ``|alpha_i - pi| >= delta``.  Item (iii): the polygon boundary keeps
    distance ``delta`` from the domain boundary (and lies inside it).
    Failures are reported, never raised.
    """
    delta = params.delta
    out: list[Violation] = []
    if polygon.n != params.n:
        out.append(Violation("n", None, float(polygon.n)))
    dist = vertex_edge_distances(polygon)
    nearest = np.min(dist, axis=1)
    for i in np.flatnonzero(nearest < delta):
        out.append(Violation("i", int(i), float(nearest[i])))
    alpha = polygon.angles
    bad = (alpha < delta) | (alpha > TWO_PI - delta) | (np.abs(alpha - np.pi) < delta)
    for i in np.flatnonzero(bad):
        out.append(Violation("ii", int(i), float(alpha[i])))
    inside = bool(np.all(boundary.contains(polygon.vertices)))
    gap = boundary.distance_to_polygon(polygon)
    if not inside:
        out.append(Violation("iii", None, -abs(gap)))
    elif gap < delta:
        out.append(Violation("iii", None, gap))
    return AdmissibilityReport(not out, tuple(out))


def _check_same_n(p: Polygon, q: Polygon):
    if p.n != q.n:
        raise DimensionError(f"vertex counts differ: {p.n} != {q.n}")


def polygon_metric(p: Polygon, q: Polygon) -> float:
    """Vertex pseudo-metric: best cyclic relabeling of the max vertex displacement."""
    _check_same_n(p, q)
    return float(np.min(cyclic_vertex_distances(p, q)))


def cyclic_vertex_distances(p: Polygon, q: Polygon) -> np.ndarray:
    """``out[j] = max_i |p[i + j] - q[i]|`` for every cyclic shift ``j``."""
    _check_same_n(p, q)
    n = p.n
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n  # [j, i] -> i + j
    diff = p.vertices[idx] - q.vertices[None, :, :]
    return np.max(np.linalg.norm(diff, axis=2), axis=1)


def best_shift(p: Polygon, q: Polygon) -> int:
    """Cyclic shift ``j`` attaining :func:`polygon_metric`."""
    return int(np.argmin(cyclic_vertex_distances(p, q)))


def _segment_distance_pieces(a0, e, b0, b1):
    """Piecewise-quadratic description of ``t -> dist(a0 + t e, [b0, b1])**2``.

    Returns arrays ``(coef, lo, hi)`` with ``coef[..., :]`` the coefficients
    ``(c0, c1, c2)`` of ``c0 + c1 t + c2 t^2`` valid on ``[lo, hi]``.
    """
    bd = b1 - b0
    bl2 = float(bd @ bd)
    pieces = []
    # projection parameter s(t) = ((a0 - b0) . bd + t e . bd) / |bd|^2
    s0 = float((a0 - b0) @ bd) / bl2
    s1 = float(e @ bd) / bl2
    if s1 == 0.0:
        region = {"b0": (0.0, 1.0) if s0 <= 0 else None, "b1": (0.0, 1.0) if s0 >= 1 else None,
                  "line": (0.0, 1.0) if 0 < s0 < 1 else None}
    else:
        t_at0 = -s0 / s1
        t_at1 = (1.0 - s0) / s1
        if s1 > 0:
            region = {"b0": (-np.inf, t_at0), "line": (t_at0, t_at1), "b1": (t_at1, np.inf)}
        else:
            region = {"b1": (-np.inf, t_at1), "line": (t_at1, t_at0), "b0": (t_at0, np.inf)}
    for key, iv in region.items():
        if iv is None:
            continue
        lo, hi = max(iv[0], 0.0), min(iv[1], 1.0)
        if lo > hi:
            continue
        if key == "line":
            # squared distance to the supporting line
            nrm = np.array([-bd[1], bd[0]]) / math.sqrt(bl2)
            c0 = float((a0 - b0) @ nrm)
            c1 = float(e @ nrm)
            pieces.append(((c0 * c0, 2 * c0 * c1, c1 * c1), lo, hi))
        else:
            pt = b0 if key == "b0" else b1
            r = a0 - pt
            pieces.append(((float(r @ r), 2 * float(r @ e), float(e @ e)), lo, hi))
    return pieces


def _directed_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    a_next = np.roll(a, -1, axis=0)
    b_next = np.roll(b, -1, axis=0)
    best = 0.0
    for i in range(len(a)):
        a0, e = a[i], a_next[i] - a[i]
        coefs, los, his = [], [], []
        for j in range(len(b)):
            for c, lo, hi in _segment_distance_pieces(a0, e, b[j], b_next[j]):
                coefs.append(c)
                los.append(lo)
                his.append(hi)
        coefs = np.array(coefs)
        los = np.array(los)
        his = np.array(his)
        cand = [np.array([0.0, 1.0]), los, his]
        # switching points of the lower envelope: equal squared distances
        ii, jj = np.triu_indices(len(coefs), k=1)
        dc = coefs[ii] - coefs[jj]
        c0, c1, c2 = dc[:, 0], dc[:, 1], dc[:, 2]
        lo = np.maximum(los[ii], los[jj])
        hi = np.minimum(his[ii], his[jj])
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = np.abs(c2) <= 1e-14 * (np.abs(c1) + np.abs(c0) + 1e-300)
            t_lin = np.where(lin & (c1 != 0), -c0 / c1, np.nan)
            disc = c1 * c1 - 4 * c2 * c0
            sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
            t_q1 = np.where(~lin, (-c1 + sq) / (2 * c2), np.nan)
            t_q2 = np.where(~lin, (-c1 - sq) / (2 * c2), np.nan)
        for t in (t_lin, t_q1, t_q2):
            ok = np.isfinite(t) & (t >= lo - 1e-12) & (t <= hi + 1e-12)
            cand.append(np.clip(t[ok], 0.0, 1.0))
        ts = np.unique(np.concatenate(cand))
        pts = a0 + ts[:, None] * e
        d = point_segment_distance(pts[:, None, :], b[None], b_next[None])
        best = max(best, float(np.max(np.min(d, axis=1))))
    return best


def hausdorff_distance(p: Polygon, q: Polygon) -> float:
    """Exact Hausdorff distance between the two boundary curves."""
    return max(_directed_hausdorff(p.vertices, q.vertices), _directed_hausdorff(q.vertices, p.vertices))


@dataclass(frozen=True, eq=False)
class PerturbationField:
    """Piecewise-linear vector field on the polygon boundary interpolating vertex data."""

    polygon: Polygon
    vertex_values: np.ndarray

    def at(self, edge, t) -> np.ndarray:
        """Field value on ``edge`` at relative position ``t`` in ``[0, 1]``."""
        edge = np.asarray(edge)
        t = np.asarray(t, float)
        d = self.vertex_values
        start = d[edge]
        end = d[(edge + 1) % self.polygon.n]
        return start + t[..., None] * (end - start)

    def sample(self, per_edge: int) -> tuple[np.ndarray, np.ndarray]:
        """Boundary points and field values, ``per_edge`` samples per edge."""
        n = self.polygon.n
        t = np.linspace(0.0, 1.0, per_edge, endpoint=False)
        edges = np.repeat(np.arange(n), per_edge)
        tt = np.tile(t, n)
        v = self.polygon.vertices
        pts = v[edges] + tt[:, None] * (v[(edges + 1) % n] - v[edges])
        return pts, self.at(edges, tt)

    def norm(self) -> float:
        return float(np.max(np.linalg.norm(self.vertex_values, axis=1)))


def interpolate_field(polygon: Polygon, d) -> PerturbationField:
    """Piecewise-linear interpolation of vertex displacements along the boundary."""
    if not isinstance(d, VertexPerturbation):
        d = VertexPerturbation(d)
    if d.n != polygon.n:
        raise DimensionError(f"perturbation has {d.n} vectors, polygon has {polygon.n} vertices")
    vals = d.displacements.copy()
    vals.setflags(write=False)
    return PerturbationField(polygon, vals)


@dataclass(frozen=True, eq=False)
class NormalComponent:
    """``h . nu = offset + slope * s`` on each edge, ``s`` the arc length from the edge start."""

    offset: np.ndarray
    slope: np.ndarray
    lengths: np.ndarray

    @property
    def end_values(self) -> np.ndarray:
        return self.offset + self.slope * self.lengths

    def __call__(self, edge, s) -> np.ndarray:
        edge = np.asarray(edge)
        return self.offset[edge] + self.slope[edge] * np.asarray(s, float)


def normal_component(polygon: Polygon, h: PerturbationField) -> NormalComponent:
    """Per-edge linear form of the normal component of ``h``; jumps at vertices are kept."""
    nu = polygon.normals
    d = h.vertex_values
    start = np.sum(d * nu, axis=1)
    end = np.sum(np.roll(d, -1, axis=0) * nu, axis=1)
    lengths = polygon.edge_lengths
    return NormalComponent(start, (end - start) / lengths, lengths)


def sample_admissible_polygon(
    params: AdmissibleClassParams,
    boundary: DomainBoundary,
    seed=None,
    max_tries: int = 10_000,
) -> Polygon:
    """Rejection-sample a star-shaped polygon from ``A_{n, delta}``.

    Vertices sit at sorted uniform angles around the boundary's center with
    radii uniform in ``[delta, R - delta]`` (``R`` the inradius about the
    center).  Deterministic for a given ``seed``.
    """
    rng = np.random.default_rng(seed)
    r_lo = params.delta
    r_hi = boundary.inradius - params.delta
    if r_hi <= r_lo:
        raise FeasibilityError(
            f"no room for vertices: radius range [{r_lo:g}, {r_hi:g}] is empty for delta={params.delta:g}"
        )
    for _ in range(max_tries):
        ang = np.sort(rng.uniform(0.0, TWO_PI, params.n))
        rad = rng.uniform(r_lo, r_hi, params.n)
        v = boundary.center + rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
        try:
            poly = Polygon(v)
        except GeometryError:
            continue
        if is_admissible(poly, params, boundary):
            return poly
    raise FeasibilityError(f"no admissible polygon found in {max_tries} draws (n={params.n}, delta={params.delta:g})")


@dataclass(frozen=True)
class CornerFrame:
    """Polar frame at a vertex: ``x = base + r (cos(rotation + theta), sin(rotation + theta))``.

    ``theta = 0`` runs along the outgoing edge, ``theta = alpha`` along the
    incoming edge, and ``0 < theta < alpha`` points into the polygon.
    """

    base: tuple[float, float]
    rotation: float
    alpha: float

    def to_xy(self, r, theta) -> np.ndarray:
        r = np.asarray(r, float)
        th = self.rotation + np.asarray(theta, float)
        return np.asarray(self.base) + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def to_polar(self, points) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(points, float) - np.asarray(self.base)
        r = np.hypot(p[..., 0], p[..., 1])
        theta = np.mod(np.arctan2(p[..., 1], p[..., 0]) - self.rotation, TWO_PI)
        return r, theta


def local_coordinates(polygon: Polygon, i: int) -> CornerFrame:
    n = polygon.n
    if not -n <= i < n:
        raise GeometryError(f"vertex index {i} out of range for {n} vertices")
    i %= n
    v = polygon.vertices
    out = v[(i + 1) % n] - v[i]
    return CornerFrame((float(v[i, 0]), float(v[i, 1])), float(math.atan2(out[1], out[0])), float(polygon.angles[i]))


def random_perturbation(n: int, size: float, rng) -> VertexPerturbation:
    """Uniformly oriented vertex displacements with max length exactly ``size``."""
    ang = rng.uniform(0, TWO_PI, n)
    rad = rng.uniform(0.2, 1.0, n)
    rad[rng.integers(n)] = 1.0
    return VertexPerturbation(size * rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)]))


__all__: Sequence[str] = [
    "ANGLE_TOLERANCE",
    "AdmissibilityReport",
    "AdmissibleClassParams",
    "CornerFrame",
    "DomainBoundary",
    "NormalComponent",
    "PerturbationField",
    "Polygon",
    "VertexPerturbation",
    "Violation",
    "best_shift",
    "cyclic_vertex_distances",
    "hausdorff_distance",
    "interior_angles",
    "interpolate_field",
    "is_admissible",
    "local_coordinates",
    "normal_component",
    "point_segment_distance",
    "polygon_metric",
    "random_perturbation",
    "sample_admissible_polygon",
    "signed_area",
    "vertex_edge_distances",
]
