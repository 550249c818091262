"""Shape derivatives of the boundary trace with respect to polygon vertices.

Moving the vertices by ``d`` moves every edge point by the piecewise-linear
field ``h = S_x d``.  The panel nodes are attached to the edges at fixed
reference parameters, so the discrete operator is an analytic function of
the vertex coordinates and its directional derivative ``A'`` is obtained
by complex-step differentiation (no subtractive cancellation).  Then

    sigma' = -A^{-1} A' sigma,     u'|_{dOmega} = R sigma' + R' sigma

with the factorization of ``A`` shared with the forward solve.  In the
continuum limit this is the solution of the inhomogeneous transmission
problem driven by the jumps of :func:`transmission_jump_data` (and of the
Neumann problem with data ``d/dtau((h.nu) du/dtau)`` when insulating); the
weak form of that problem is available as :func:`jump_pairing` and is used
as an independent check.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bie
from .currents import BoundaryCurrent, check_seo_condition, make_current
from .exceptions import DimensionError, NumericError
from .forward import Discretization, ForwardSolution, ForwardSystem, Trace, check_conductivity
from .geometry import (
    DomainBoundary,
    PerturbationField,
    Polygon,
    VertexPerturbation,
    interpolate_field,
    normal_component,
)

COMPLEX_STEP = 1e-20


class SeoWarning(UserWarning):
    """The two probing currents violate the connectivity condition."""


def _displacements(system: ForwardSystem, h) -> np.ndarray:
    if isinstance(h, PerturbationField):
        d = h.vertex_values
    elif isinstance(h, VertexPerturbation):
        d = h.displacements
    else:
        d = VertexPerturbation(h).displacements
    if d.shape != (system.polygon.n, 2):
        raise DimensionError(f"perturbation has shape {d.shape}, polygon has {system.polygon.n} vertices")
    return np.asarray(d, float)


def _operator_derivative(system: ForwardSystem, d: np.ndarray):
    """Nonzero pieces of ``A'`` and ``R'`` for vertex velocities ``d``.

    Returns ``(nodes, blocks)`` with ``nodes`` the inclusion nodes that move
    and ``blocks`` the derivative sub-blocks touching them.
    """
    moving = np.any(d != 0.0, axis=1)
    edges = np.flatnonzero(moving | np.roll(moving, -1))
    lay = system.layout
    A = np.flatnonzero(np.isin(lay.node_edge, edges))
    if A.size == 0:
        return A, None
    vc = system.polygon.vertices + 1j * COMPLEX_STEP * d
    gc = bie.PanelGeometry.build(vc, lay)
    nodes = system.nodes
    near = system.near
    xa, wa, na = gc.x[A], gc.weights[A], gc.normal[A]
    blocks = {
        "OD": bie.directional_kernel(nodes.x, nodes.normal, xa, wa).imag / COMPLEX_STEP,
        "DO": bie.directional_kernel(xa, na, nodes.x, nodes.weights).imag / COMPLEX_STEP,
        "DD_rows": near.overwrite(bie.polygon_adjoint_double_layer(gc, rows=A), gc, "normal", rows=A).imag
        / COMPLEX_STEP,
        "DD_cols": near.overwrite(bie.polygon_adjoint_double_layer(gc, cols=A), gc, "normal", cols=A).imag
        / COMPLEX_STEP,
        "S_OD": bie.log_kernel(nodes.x, xa, wa).imag / COMPLEX_STEP,
    }
    return A, blocks


def _apply_derivative(system: ForwardSystem, A, blocks, x: np.ndarray):
    """``A' x`` and ``R' x`` for a stacked density vector (or matrix of them)."""
    no, nd = system.n_outer, system.n_inner
    phi, psi = x[:no], x[no:no + nd]
    out = np.zeros_like(x)
    if blocks is None:
        return out, np.zeros((no,) + x.shape[1:])
    psi_a = psi[A]
    out[:no] = blocks["OD"] @ psi_a
    inner = blocks["DD_cols"] @ psi_a
    inner[A] += blocks["DO"] @ phi + blocks["DD_rows"] @ psi
    # the K' row and column blocks overlap on (A, A); remove the double count
    inner[A] -= blocks["DD_cols"][A] @ psi_a
    out[no:no + nd] = inner
    dtrace = blocks["S_OD"] @ psi_a
    out[-1] = system.nodes.weights @ dtrace
    return out, dtrace


def _derivative_traces(system: ForwardSystem, solutions, d: np.ndarray) -> np.ndarray:
    """Trace derivative for each solution; shape ``(len(solutions), n_outer)``."""
    X = np.column_stack([s.x for s in solutions])
    A, blocks = _operator_derivative(system, d)
    dAx, dR = _apply_derivative(system, A, blocks, X)
    dX = -system.solve_rhs(dAx)
    no, nd = system.n_outer, system.n_inner
    vals = system.S_OO @ dX[:no] + system.blocks["S_OD"] @ dX[no:no + nd] + dX[-1] + dR
    return vals.T


def shape_derivative(sol: ForwardSolution, h) -> Trace:
    """Derivative of the trace of ``sol`` along the vertex motion ``h``."""
    d = _displacements(sol.system, h)
    return sol.system.make_trace(_derivative_traces(sol.system, [sol], d)[0])


def solve_shape_derivative(boundary: DomainBoundary, polygon: Polygon, k, f, h,
                           disc: Discretization | None = None) -> Trace:
    """Derivative of the trace for current ``f`` in direction ``h`` (conductive)."""
    from .forward import solve_forward

    return shape_derivative(solve_forward(boundary, polygon, k, f, disc), h)


def solve_shape_derivative_insulating(boundary: DomainBoundary, polygon: Polygon, f, h,
                                      disc: Discretization | None = None) -> Trace:
    from .forward import solve_forward_insulating

    return shape_derivative(solve_forward_insulating(boundary, polygon, f, disc), h)


@dataclass(frozen=True)
class JumpData:
    """Right-hand sides of the derivative problem at the inclusion nodes.

    ``dirichlet`` is ``u'_+ - u'_-`` (``None`` when insulating) and
    ``neumann`` is ``du'_+/dnu - k du'_-/dnu`` (``du'/dnu`` when insulating).
    """

    dirichlet: np.ndarray | None
    neumann: np.ndarray
    h_normal: np.ndarray
    h_slope: np.ndarray


def _second_tangential(sol: ForwardSolution) -> np.ndarray:
    """Panel-wise derivative of ``du/dtau`` along the edge."""
    s = sol.system
    p = s.layout.order
    D = bie.differentiation_matrix(p)
    dtau = sol.edge_fields.dtau.reshape(-1, p)
    plen = s.geom.panel_length
    return ((dtau @ D.T) * (2.0 / plen)[:, None]).ravel()


def transmission_jump_data(sol: ForwardSolution, h) -> JumpData:
    """Jumps of ``u'`` across the polygon for the vertex motion ``h``.

    On each open edge ``h.nu = a + b s`` is linear, so
    ``d/dtau((h.nu) du/dtau) = b du/dtau + (h.nu) d2u/dtau2``.
    """
    s = sol.system
    if not isinstance(h, PerturbationField):
        h = interpolate_field(sol.polygon, _displacements(s, h))
    if h.polygon.n != sol.polygon.n:
        raise DimensionError("perturbation field and solution belong to different polygons")
    nc = normal_component(sol.polygon, h)
    lay = s.layout
    e = lay.node_edge
    hn = nc(e, s.geom.arclength)
    b = nc.slope[e]
    ef = sol.edge_fields
    flux = b * ef.dtau + hn * _second_tangential(sol)
    if sol.insulating:
        return JumpData(None, flux, hn, b)
    k = sol.k
    return JumpData((1.0 - k) * hn * ef.dnu_minus, (1.0 - k) * flux, hn, b)


def jump_pairing(sol_u: ForwardSolution, sol_v: ForwardSolution, h) -> float:
    """Weak form of the derivative problem.

    For ``v`` solving the forward problem with current ``g``,
    ``int_{dOmega} g u' ds`` equals
    ``(1-k) int_{dD} (h.nu) (du/dtau dv/dtau + k du_-/dnu dv_-/dnu) ds``
    (conductive) or ``int_{dD} (h.nu) du/dtau dv/dtau ds`` (insulating).

    The products are integrated with the edge quadrature, which is accurate
    only while the corner singularities are mild.  Near the sharp corners of
    an insulating inclusion the integrand behaves like ``r**(2 beta - 2)``
    and the value is unreliable; :func:`shape_derivative` is the accurate
    route.
    """
    if sol_u.system is not sol_v.system:
        raise DimensionError("both solutions must share one assembled system")
    s = sol_u.system
    if not isinstance(h, PerturbationField):
        h = interpolate_field(sol_u.polygon, _displacements(s, h))
    nc = normal_component(sol_u.polygon, h)
    hn = nc(s.layout.node_edge, s.geom.arclength)
    fu, fv = sol_u.edge_fields, sol_v.edge_fields
    w = s.geom.weights
    if sol_u.insulating:
        return float(np.sum(w * hn * fu.dtau * fv.dtau))
    k = sol_u.k
    return float((1.0 - k) * np.sum(w * hn * (fu.dtau * fv.dtau + k * fu.dnu_minus * fv.dnu_minus)))


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """Weighted Jacobian of the stacked traces with respect to vertex coordinates.

    ``matrix`` has one row block per current (rows scaled by the square
    roots of the outer quadrature weights) and columns ordered
    ``x_1, y_1, x_2, y_2, ...``.
    """

    matrix: np.ndarray
    n_vertices: int
    n_currents: int
    sqrt_weights: np.ndarray
    seo_ok: bool | None = None
    insulating: bool = False

    def apply(self, d) -> np.ndarray:
        return self.matrix @ np.asarray(d, float).reshape(-1)

    def unweighted(self) -> np.ndarray:
        return self.matrix / np.tile(self.sqrt_weights, self.n_currents)[:, None]


def jacobian_from_solutions(system: ForwardSystem, solutions, threads: int = 1) -> np.ndarray:
    """Weighted Jacobian columns for solutions sharing ``system``."""
    n = system.polygon.n
    sw = np.sqrt(system.nodes.weights)

    def column(j):
        d = np.zeros((n, 2))
        d[j // 2, j % 2] = 1.0
        return (_derivative_traces(system, solutions, d) * sw[None, :]).ravel()

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(column, range(2 * n)))
    else:
        cols = [column(j) for j in range(2 * n)]
    J = np.column_stack(cols)
    if not np.all(np.isfinite(J)):
        raise NumericError("non-finite Jacobian entries")
    return J


def assemble_jacobian(boundary: DomainBoundary, polygon: Polygon, k, currents,
                      disc: Discretization | None = None, threads: int = 1) -> JacobianMatrix:
    """Jacobian ``F'(x)`` for one or two probing currents.

    With two currents in the conductive case the pair is checked for the
    connectivity condition; a failure is recorded and warned about, not
    raised.
    """
    if isinstance(currents, (str, BoundaryCurrent)):
        currents = [currents]
    currents = [make_current(c) for c in currents]
    k = check_conductivity(k)
    seo = None
    if len(currents) == 2 and k is not None:
        seo = bool(check_seo_condition(*currents))
        if not seo:
            warnings.warn("probing currents fail the connectivity condition; injectivity is not guaranteed",
                          SeoWarning, stacklevel=2)
    system = ForwardSystem(boundary, polygon, k, disc)
    sols = [system.solve(f) for f in currents]
    J = jacobian_from_solutions(system, sols, threads)
    return JacobianMatrix(J, polygon.n, len(currents), np.sqrt(system.nodes.weights), seo, k is None)


@dataclass(frozen=True)
class InjectivityMargin:
    sigma_min: float
    singular_values: np.ndarray
    direction: VertexPerturbation


def injectivity_margin(J) -> InjectivityMargin:
    """Smallest singular value of the (weighted) Jacobian and its right singular vector."""
    M = J.matrix if isinstance(J, JacobianMatrix) else np.asarray(J, float)
    if M.ndim != 2 or M.shape[1] % 2:
        raise DimensionError(f"Jacobian must be 2-D with an even column count, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError("Jacobian has non-finite entries")
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    return InjectivityMargin(float(sv[-1]), sv, VertexPerturbation(vt[-1].reshape(-1, 2)))
