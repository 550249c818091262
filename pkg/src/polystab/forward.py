"""Forward solver for the two-phase conductivity problem and the insulating problem.

The potential is written as ``u = S_Omega phi + S_D psi + c`` with
logarithmic single layers on both boundaries.  The jump relations give

* on the outer boundary: ``phi/2 + K'phi + dS_D psi/dnu + <phi, 1> = f``;
* on the inclusion boundary, conductive case:
  ``(k+1)/(2(k-1)) psi + K'psi + dS_Omega phi/dnu = 0``
  (the transmission condition ``k du_-/dnu = du_+/dnu``);
* insulating case: ``-psi/2 + K'psi + dS_Omega phi/dnu = 0`` (``du_+/dnu = 0``);
* one row fixing the weighted mean of the outer trace to zero, with ``c``
  as the compensating unknown.

The rank-one term ``<phi, 1>`` removes the constant null space of the
interior Neumann operator; it vanishes for every solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import bie
from .currents import BoundaryCurrent, make_current
from .exceptions import DimensionError, DiscretizationError, DomainError, GeometryError, NumericError
from .geometry import DomainBoundary, Polygon

RESIDUAL_TOL = 1e-12


class AccuracyWarning(UserWarning):
    """Evaluation point too close to a boundary for the plain quadrature."""


@dataclass(frozen=True)
class Discretization:
    """Panel and node counts.

    ``panels_per_edge`` Gauss-Legendre panels of ``order`` nodes per polygon
    edge, graded like ``s**grading`` toward both vertices; ``boundary_nodes``
    trapezoidal nodes on the outer boundary (even).
    """

    panels_per_edge: int = 12
    grading: float = 3.0
    order: int = 8
    boundary_nodes: int = 256

    def __post_init__(self):
        for name in ("panels_per_edge", "order", "boundary_nodes"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise DomainError(f"{name} must be a positive integer, got {val!r}")
        if not self.grading >= 1:
            raise DomainError(f"grading exponent must be >= 1, got {self.grading!r}")
        if self.boundary_nodes % 2:
            raise DomainError("boundary_nodes must be even")

    def refined(self, factor: int = 2, order: int | None = None) -> "Discretization":
        """More panels per edge and more outer nodes; optionally a different order."""
        return replace(
            self,
            panels_per_edge=self.panels_per_edge * factor,
            boundary_nodes=self.boundary_nodes * factor,
            order=self.order if order is None else order,
        )

    def to_dict(self) -> dict:
        return {
            "panels_per_edge": self.panels_per_edge,
            "grading": self.grading,
            "order": self.order,
            "boundary_nodes": self.boundary_nodes,
        }


@dataclass(frozen=True, eq=False)
class Trace:
    """Values of ``u`` at the outer quadrature nodes with their L2 weights."""

    values: np.ndarray
    weights: np.ndarray
    theta: np.ndarray
    mean_zero: bool = True

    def __post_init__(self):
        if not (self.values.shape == self.weights.shape == self.theta.shape):
            raise DimensionError("trace values, weights and parameters must have equal length")

    def norm(self) -> float:
        return float(math.sqrt(np.sum(self.weights * self.values**2)))

    def mean(self) -> float:
        return float(np.sum(self.weights * self.values) / np.sum(self.weights))

    def inner(self, other: "Trace") -> float:
        _check_compatible(self, other)
        return float(np.sum(self.weights * self.values * other.values))

    def with_values(self, values) -> "Trace":
        return Trace(np.asarray(values, float), self.weights, self.theta, self.mean_zero)

    def __add__(self, other: "Trace") -> "Trace":
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Trace") -> "Trace":
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self) -> "Trace":
        return self.with_values(-self.values)

    def __mul__(self, c: float) -> "Trace":
        return self.with_values(c * self.values)

    __rmul__ = __mul__


def _check_compatible(a: Trace, b: Trace):
    if a.values.shape != b.values.shape or not np.allclose(a.weights, b.weights, rtol=1e-13, atol=0):
        raise DimensionError(f"traces live on different node sets ({a.values.size} vs {b.values.size} nodes)")


def trace_distance(t1: Trace, t2: Trace) -> float:
    """L2 distance of two traces on the outer boundary."""
    return (t1 - t2).norm()


@lru_cache(maxsize=16)
def _outer_blocks(boundary: DomainBoundary, n_nodes: int):
    nodes = bie.CurveNodes.from_boundary(boundary, n_nodes)
    S = bie.curve_single_layer(nodes)
    K = bie.curve_adjoint_double_layer(nodes)
    for a in (S, K):
        a.setflags(write=False)
    return nodes, S, K


def check_conductivity(k) -> float | None:
    """Validate ``k``; ``None`` (or the string "insulating") selects the insulating problem."""
    if k is None or (isinstance(k, str) and k.lower() == "insulating"):
        return None
    try:
        k = float(k)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"conductivity must be a number or 'insulating', got {k!r}") from exc
    if not (k > 0) or k == 1.0 or not math.isfinite(k):
        raise DomainError(f"conductivity must be positive, finite and different from 1, got {k!r}")
    return k


def dependent_blocks(nodes: bie.CurveNodes, geom: bie.PanelGeometry, k: float | None,
                     near: bie.NearField) -> dict:
    """Operator blocks that depend on the polygon (complex-step safe)."""
    diag = -0.5 if k is None else (k + 1.0) / (2.0 * (k - 1.0))
    KD = near.overwrite(bie.polygon_adjoint_double_layer(geom), geom, "normal")
    idx = np.arange(KD.shape[0])
    KD[idx, idx] += diag
    return {
        "OD": bie.directional_kernel(nodes.x, nodes.normal, geom.x, geom.weights),
        "DO": bie.directional_kernel(geom.x, geom.normal, nodes.x, nodes.weights),
        "DD": KD,
        "S_OD": bie.log_kernel(nodes.x, geom.x, geom.weights),
    }


class ForwardSystem:
    """Assembled and factorized system for one geometry and one conductivity.

    Several currents can be solved against the same factorization.
    """

    def __init__(self, boundary: DomainBoundary, polygon: Polygon, k, disc: Discretization | None = None):
        self.boundary = boundary
        self.polygon = polygon
        self.k = check_conductivity(k)
        self.disc = disc or Discretization()
        if not np.all(boundary.contains(polygon.vertices)) or boundary.distance_to_polygon(polygon) <= 0:
            raise GeometryError("inclusion must lie strictly inside the domain")
        d = self.disc
        self.nodes, self.S_OO, self.K_OO = _outer_blocks(boundary, d.boundary_nodes)
        self.layout = bie.PanelLayout.build(polygon.n, d.panels_per_edge, d.grading, d.order)
        self.geom = bie.PanelGeometry.build(polygon.vertices, self.layout)
        self.near = bie.NearField.build(self.geom)
        self.blocks = dependent_blocks(self.nodes, self.geom, self.k, self.near)
        self.matrix = self._assemble(self.blocks)
        self._factorize()

    @property
    def insulating(self) -> bool:
        return self.k is None

    @property
    def n_outer(self) -> int:
        return self.nodes.size

    @property
    def n_inner(self) -> int:
        return self.layout.size

    def _assemble(self, blocks: dict) -> np.ndarray:
        no, nd = self.n_outer, self.n_inner
        w = self.nodes.weights
        A = np.zeros((no + nd + 1, no + nd + 1))
        A[:no, :no] = self.K_OO + 0.5 * np.eye(no) + np.outer(np.ones(no), w)
        A[:no, no:no + nd] = blocks["OD"]
        A[no:no + nd, :no] = blocks["DO"]
        A[no:no + nd, no:no + nd] = blocks["DD"]
        A[-1, :no] = w @ self.S_OO
        A[-1, no:no + nd] = w @ blocks["S_OD"]
        A[-1, -1] = w.sum()
        return A

    def _factorize(self):
        if not np.all(np.isfinite(self.matrix)):
            raise NumericError("non-finite entries in the boundary-integral matrix")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.lu = lu_factor(self.matrix, check_finite=False)
        u = np.abs(np.diag(self.lu[0]))
        if u.min() <= 1e-13 * u.max():
            raise DiscretizationError(
                "boundary-integral system is numerically singular; "
                "refine the discretization (more panels per edge or outer nodes)"
            )

    def current_values(self, f: BoundaryCurrent) -> np.ndarray:
        """Current at the outer nodes, projected to weighted mean zero."""
        vals = f(self.nodes.t)
        w = self.nodes.weights
        return vals - np.sum(w * vals) / np.sum(w)

    def rhs(self, fvals: np.ndarray) -> np.ndarray:
        b = np.zeros(self.matrix.shape[0])
        b[:self.n_outer] = fvals
        return b

    def solve_rhs(self, b: np.ndarray) -> np.ndarray:
        x = lu_solve(self.lu, b, check_finite=False)
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite layer densities")
        return x

    def check_residual(self, x: np.ndarray, b: np.ndarray) -> float:
        r = self.matrix @ x - b
        scale = np.max(np.abs(self.matrix)) * np.max(np.abs(x)) + np.max(np.abs(b))
        rel = float(np.max(np.abs(r)) / scale) if scale > 0 else 0.0
        if rel > RESIDUAL_TOL:
            raise DiscretizationError(f"linear-system residual {rel:.2e} exceeds {RESIDUAL_TOL:g}; refine the discretization")
        return rel

    def split(self, x: np.ndarray):
        no, nd = self.n_outer, self.n_inner
        return x[:no], x[no:no + nd], float(x[-1])

    def trace_values(self, x: np.ndarray) -> np.ndarray:
        phi, psi, c = self.split(x)
        return self.S_OO @ phi + self.blocks["S_OD"] @ psi + c

    def make_trace(self, values) -> Trace:
        return Trace(np.asarray(values, float), self.nodes.weights, self.nodes.t)

    def solve(self, f) -> "ForwardSolution":
        f = make_current(f)
        fvals = self.current_values(f)
        b = self.rhs(fvals)
        x = self.solve_rhs(b)
        rel = self.check_residual(x, b)
        return ForwardSolution(self, f, fvals, x, rel)

    @cached_property
    def tangential_operator(self) -> np.ndarray:
        """Tangential derivative of ``S_D`` on the inclusion boundary."""
        return self.near.overwrite(bie.polygon_tangential_operator(self.geom), self.geom, "tangent")

    @cached_property
    def outer_tangential(self) -> np.ndarray:
        """Tangential derivative of ``S_Omega`` at the inclusion nodes."""
        return bie.directional_kernel(self.geom.x, self.geom.tangent, self.nodes.x, self.nodes.weights)


@dataclass(frozen=True)
class EdgeFields:
    """Fields at the inclusion nodes (panel-major order, see :class:`bie.PanelLayout`).

    ``dnu_minus`` is the interior normal derivative (conductive case) and
    ``dnu_plus`` the exterior one; ``dtau`` the tangential derivative,
    continuous across the boundary.
    """

    points: np.ndarray
    edge: np.ndarray
    arclength: np.ndarray
    vertex_distance: np.ndarray
    dtau: np.ndarray
    dnu_minus: np.ndarray | None
    dnu_plus: np.ndarray


class ForwardSolution:
    """Layer densities for one current together with the system they solve."""

    def __init__(self, system: ForwardSystem, current: BoundaryCurrent, fvals, x, residual: float):
        self.system = system
        self.current = current
        self.current_values = fvals
        self.x = x
        self.residual = residual
        self.phi, self.psi, self.c = system.split(x)

    @property
    def polygon(self) -> Polygon:
        return self.system.polygon

    @property
    def boundary(self) -> DomainBoundary:
        return self.system.boundary

    @property
    def k(self) -> float | None:
        return self.system.k

    @property
    def disc(self) -> Discretization:
        return self.system.disc

    @property
    def insulating(self) -> bool:
        return self.system.insulating

    @cached_property
    def trace(self) -> Trace:
        return self.system.make_trace(self.system.trace_values(self.x))

    def neumann_data(self) -> np.ndarray:
        """Interior normal derivative of ``u`` at the outer nodes."""
        s = self.system
        return (s.K_OO + 0.5 * np.eye(s.n_outer)) @ self.phi + s.blocks["OD"] @ self.psi

    @cached_property
    def edge_fields(self) -> EdgeFields:
        s = self.system
        g = s.geom
        dtau = s.tangential_operator @ self.psi + s.outer_tangential @ self.phi
        if self.insulating:
            minus, plus = None, np.zeros_like(self.psi)
        else:
            # the discrete transmission row gives du_-/dnu = psi/2 + K'psi + dS_Omega phi/dnu exactly as below
            minus = self.psi / (1.0 - self.k)
            plus = self.k * minus
        return EdgeFields(g.x, s.layout.node_edge, g.arclength, g.vertex_distance, dtau, minus, plus)


def solve_forward(boundary: DomainBoundary, polygon: Polygon, k, f, disc: Discretization | None = None) -> ForwardSolution:
    """Two-phase problem with conductivity ``k`` inside the polygon and 1 outside."""
    if check_conductivity(k) is None:
        raise DomainError("use solve_forward_insulating for the insulating problem")
    return ForwardSystem(boundary, polygon, k, disc).solve(f)


def solve_forward_insulating(boundary: DomainBoundary, polygon: Polygon, f, disc: Discretization | None = None) -> ForwardSolution:
    """Problem with zero flux through the polygon boundary."""
    return ForwardSystem(boundary, polygon, None, disc).solve(f)


def trace_of(sol: ForwardSolution) -> Trace:
    return sol.trace


def edge_fields(sol: ForwardSolution) -> EdgeFields:
    return sol.edge_fields


def evaluate_interior(sol: ForwardSolution, points) -> np.ndarray:
    """``u`` at points inside the domain (either phase).

    The inclusion's single layer is integrated adaptively near its panels.
    Points closer to the outer boundary than its node spacing trigger an
    :class:`AccuracyWarning`.
    """
    s = sol.system
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[1] != 2:
        raise DimensionError(f"points must have shape (m, 2), got {pts.shape}")
    if not np.all(s.boundary.contains(pts)):
        raise DomainError("evaluation points must lie inside the domain")
    spacing = float(np.max(s.nodes.weights))
    gap = np.min(np.sqrt(((pts[:, None, :] - s.nodes.x[None]) ** 2).sum(-1)), axis=1)
    if np.any(gap < spacing):
        warnings.warn(
            f"{int(np.sum(gap < spacing))} point(s) closer to the outer boundary than its node spacing "
            f"({spacing:.3g}); values may be inaccurate",
            AccuracyWarning,
            stacklevel=2,
        )
    outer = bie.log_kernel(pts, s.nodes.x, s.nodes.weights) @ sol.phi
    inner = bie.polygon_single_layer_at(s.geom, sol.psi, pts)
    return outer + inner + sol.c
