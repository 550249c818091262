"""Quadrature and layer-potential kernels for the Nystrom discretization.

The outer boundary is discretized by the trapezoidal rule (with Kress's
logarithmic correction for the single layer).  Polygon edges carry
Gauss-Legendre panels graded algebraically toward both vertices.

Everything that depends on polygon vertices is written with plain
arithmetic (no ``abs``, ``hypot`` or ``arctan2``) so that it accepts complex
vertex arrays; the shape derivative uses this for complex-step
differentiation of the assembled operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

INV_2PI = 1.0 / (2.0 * np.pi)


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _bary_weights(order: int) -> np.ndarray:
    x, _ = gauss_legendre(order)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_matrix(order: int, xi) -> np.ndarray:
    """Values of the Gauss-Legendre Lagrange basis at reference points ``xi`` (any real)."""
    x, _ = gauss_legendre(order)
    bw = _bary_weights(order)
    xi = np.atleast_1d(np.asarray(xi, float))
    diff = xi[:, None] - x[None, :]
    hit = diff == 0.0
    diff = np.where(hit, 1.0, diff)
    ell = np.prod(diff, axis=1)[:, None] * bw[None, :] / diff
    rows = np.any(hit, axis=1)
    ell[rows] = hit[rows].astype(float)
    return ell


@lru_cache(maxsize=None)
def differentiation_matrix(order: int) -> np.ndarray:
    """Exact derivative of the interpolant at the Gauss-Legendre nodes (reference interval)."""
    x, _ = gauss_legendre(order)
    bw = _bary_weights(order)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@lru_cache(maxsize=None)
def kress_weights(n_nodes: int) -> np.ndarray:
    """Weights ``R_j`` with ``int log(4 sin^2((t_0 - t)/2)) f(t) dt ~ sum_j R_j f(t_j)``."""
    if n_nodes % 2:
        raise ValueError("Kress quadrature needs an even node count")
    n = n_nodes // 2
    t = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    m = np.arange(1, n)
    R = -(2.0 * np.pi / n) * (np.cos(np.outer(t, m)) @ (1.0 / m)) - (np.pi / n**2) * np.cos(n * t)
    R.setflags(write=False)
    return R


@dataclass(frozen=True, eq=False)
class CurveNodes:
    """Trapezoidal discretization of the outer boundary."""

    t: np.ndarray
    x: np.ndarray
    d1: np.ndarray
    speed: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.t.size

    @classmethod
    def from_boundary(cls, boundary, n_nodes: int) -> "CurveNodes":
        t = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        x = boundary.curve(t)
        d1 = boundary.derivative(t)
        d2 = boundary.second_derivative(t)
        speed = np.sqrt(np.sum(d1 * d1, axis=1))
        tangent = d1 / speed[:, None]
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
        weights = (2.0 * np.pi / n_nodes) * speed
        return cls(t, x, d1, speed, normal, tangent, curvature, weights)


def grading_breakpoints(panels: int, grading: float) -> np.ndarray:
    """Panel breakpoints on ``[0, 1]`` graded like ``s**grading`` toward both ends."""
    s = np.arange(panels + 1) / panels
    lo = 0.5 * (2.0 * s) ** grading
    hi = 1.0 - 0.5 * (2.0 * (1.0 - s)) ** grading
    return np.where(s <= 0.5, lo, hi)


@dataclass(frozen=True, eq=False)
class PanelLayout:
    """Vertex-independent panel structure: which edge, which reference parameters."""

    n_edges: int
    order: int
    t0: np.ndarray  # per panel
    t1: np.ndarray
    panel_edge: np.ndarray
    node_t: np.ndarray  # per node, reference parameter on its edge
    node_edge: np.ndarray
    node_panel: np.ndarray
    node_local: np.ndarray  # index 0..order-1 within the panel
    ref_weight: np.ndarray  # GL weight * (t1 - t0) / 2

    @property
    def size(self) -> int:
        return self.node_t.size

    @property
    def n_panels(self) -> int:
        return self.t0.size

    @classmethod
    def build(cls, n_edges: int, panels_per_edge: int, grading: float, order: int) -> "PanelLayout":
        br = grading_breakpoints(panels_per_edge, grading)
        xi, wi = gauss_legendre(order)
        t0 = np.tile(br[:-1], n_edges)
        t1 = np.tile(br[1:], n_edges)
        panel_edge = np.repeat(np.arange(n_edges), panels_per_edge)
        half = 0.5 * (t1 - t0)
        node_t = (t0[:, None] + half[:, None] * (xi[None, :] + 1.0)).ravel()
        ref_weight = (half[:, None] * wi[None, :]).ravel()
        node_panel = np.repeat(np.arange(t0.size), order)
        return cls(
            n_edges, order, t0, t1, panel_edge, node_t,
            panel_edge[node_panel], node_panel, np.tile(np.arange(order), t0.size), ref_weight,
        )


@dataclass(frozen=True, eq=False)
class PanelGeometry:
    """Node positions, normals and weights of a polygon for a given layout.

    ``vertices`` may be complex (complex-step differentiation).
    """

    layout: PanelLayout
    vertices: np.ndarray
    edge_length: np.ndarray
    edge_tangent: np.ndarray
    edge_normal: np.ndarray
    x: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, vertices, layout: PanelLayout) -> "PanelGeometry":
        v = np.asarray(vertices)
        w = np.roll(v, -1, axis=0)
        e = w - v
        length = np.sqrt(e[:, 0] * e[:, 0] + e[:, 1] * e[:, 1])
        tangent = e / length[:, None]
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        ed = layout.node_edge
        x = v[ed] + layout.node_t[:, None] * e[ed]
        weights = length[ed] * layout.ref_weight
        return cls(layout, v, length, tangent, normal, x, weights)

    @property
    def normal(self) -> np.ndarray:
        return self.edge_normal[self.layout.node_edge]

    @property
    def tangent(self) -> np.ndarray:
        return self.edge_tangent[self.layout.node_edge]

    @property
    def arclength(self) -> np.ndarray:
        """Arc length from the start vertex of each node's edge."""
        return self.layout.node_t * self.edge_length[self.layout.node_edge]

    @property
    def vertex_distance(self) -> np.ndarray:
        t = self.layout.node_t
        return np.minimum(t, 1.0 - t) * self.edge_length[self.layout.node_edge]

    @property
    def panel_length(self) -> np.ndarray:
        lay = self.layout
        return (lay.t1 - lay.t0) * self.edge_length[lay.panel_edge]


def _diff(targets, sources):
    dx = targets[:, None, 0] - sources[None, :, 0]
    dy = targets[:, None, 1] - sources[None, :, 1]
    return dx, dy


def directional_kernel(targets, directions, sources, weights) -> np.ndarray:
    """``-(1/2 pi) (x - y) . n_x / |x - y|^2 * w_y`` for off-surface or distinct points."""
    dx, dy = _diff(targets, sources)
    r2 = dx * dx + dy * dy
    return -INV_2PI * (dx * directions[:, None, 0] + dy * directions[:, None, 1]) / r2 * weights[None, :]


def source_directional_kernel(targets, sources, source_directions, weights) -> np.ndarray:
    """``(1/2 pi) (x - y) . n_y / |x - y|^2 * w_y``: derivative of the log kernel in the source point."""
    dx, dy = _diff(targets, sources)
    r2 = dx * dx + dy * dy
    return INV_2PI * (dx * source_directions[None, :, 0] + dy * source_directions[None, :, 1]) / r2 * weights[None, :]


def log_kernel(targets, sources, weights) -> np.ndarray:
    """Single-layer kernel ``-(1/2 pi) log|x - y| * w_y`` for well-separated points."""
    dx, dy = _diff(targets, sources)
    r2 = dx * dx + dy * dy
    return -0.5 * INV_2PI * np.log(r2) * weights[None, :]


def curve_single_layer(nodes: CurveNodes) -> np.ndarray:
    """Single layer of the outer curve evaluated on itself (Kress product rule)."""
    n = nodes.size
    R = kress_weights(n)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    dx, dy = _diff(nodes.x, nodes.x)
    r2 = dx * dx + dy * dy
    dt = nodes.t[:, None] - nodes.t[None, :]
    s2 = 4.0 * np.sin(0.5 * dt) ** 2
    np.fill_diagonal(s2, 1.0)
    np.fill_diagonal(r2, 1.0)
    smooth = np.log(r2 / s2)
    np.fill_diagonal(smooth, np.log(nodes.speed**2))
    return -(1.0 / (4.0 * np.pi)) * (R[idx] + (2.0 * np.pi / n) * smooth) * nodes.speed[None, :]


def curve_adjoint_double_layer(nodes: CurveNodes) -> np.ndarray:
    """Normal derivative of the outer single layer at its own nodes (principal value part)."""
    dx, dy = _diff(nodes.x, nodes.x)
    r2 = dx * dx + dy * dy
    np.fill_diagonal(r2, 1.0)
    K = -INV_2PI * (dx * nodes.normal[:, None, 0] + dy * nodes.normal[:, None, 1]) / r2
    np.fill_diagonal(K, -nodes.curvature / (4.0 * np.pi))
    return K * nodes.weights[None, :]


def polygon_adjoint_double_layer(geom: PanelGeometry, rows=None, cols=None) -> np.ndarray:
    """``K'`` on the polygon: normal derivative of its single layer at its own nodes.

    Points on the same (straight) edge do not interact.  ``rows``/``cols``
    select a sub-block.
    """
    lay = geom.layout
    rows = slice(None) if rows is None else rows
    cols = slice(None) if cols is None else cols
    nrm = geom.normal[rows]
    dx, dy = _diff(geom.x[rows], geom.x[cols])
    same = lay.node_edge[rows][:, None] == lay.node_edge[cols][None, :]
    r2 = dx * dx + dy * dy
    r2 = np.where(same, 1.0, r2)
    K = -INV_2PI * (dx * nrm[:, None, 0] + dy * nrm[:, None, 1]) / r2 * geom.weights[cols][None, :]
    return np.where(same, 0.0, K)


def polygon_tangential_operator(geom: PanelGeometry) -> np.ndarray:
    """Tangential derivative of the polygon single layer on the polygon (Cauchy principal value).

    On each edge the kernel is ``-(1/2 pi) / (s - s')``.  Panels of the same
    edge that are closer than their own length are integrated exactly for
    the panel interpolant by singularity subtraction.
    """
    lay = geom.layout
    tau = geom.tangent
    dx, dy = _diff(geom.x, geom.x)
    r2 = dx * dx + dy * dy
    np.fill_diagonal(r2, 1.0)
    H = -INV_2PI * (dx * tau[:, None, 0] + dy * tau[:, None, 1]) / r2 * geom.weights[None, :]
    np.fill_diagonal(H, 0.0)

    p = lay.order
    xi, wi = gauss_legendre(p)
    D = differentiation_matrix(p)
    s_node = geom.arclength
    plen = geom.panel_length
    for P in range(lay.n_panels):
        e = lay.panel_edge[P]
        cols = np.arange(P * p, (P + 1) * p)
        a = lay.t0[P] * geom.edge_length[e]
        b = lay.t1[P] * geom.edge_length[e]
        on_edge = np.flatnonzero(lay.node_edge == e)
        s = s_node[on_edge]
        near = (s > a - plen[P]) & (s < b + plen[P])
        rows = on_edge[near]
        s = s[near]
        sj = s_node[cols]
        wj = geom.weights[cols]
        ref = (2.0 * s - (a + b)) / (b - a)
        ell = lagrange_matrix(p, ref)  # (rows, p)
        ds = s[:, None] - sj[None, :]
        self_hit = np.isclose(ds, 0.0, atol=1e-14 * (b - a))
        inv = np.where(self_hit, 0.0, 1.0 / np.where(self_hit, 1.0, ds))
        block = wj[None, :] * inv - ell * np.sum(wj[None, :] * inv, axis=1)[:, None]
        with np.errstate(divide="ignore"):
            logterm = np.log(np.abs((s - a) / (s - b)))
        block += ell * logterm[:, None]
        # self node: the difference quotient tends to minus the derivative
        hr, hc = np.nonzero(self_hit)
        if hr.size:
            dpsi = D[hc] * (2.0 / (b - a))
            block[hr] -= wj[hc][:, None] * dpsi
        H[np.ix_(rows, cols)] = -INV_2PI * block
    return H


def _panel_refined_rule(xi_star: float, eta: float, order: int = 16, levels: int = 60):
    """Composite Gauss rule on ``[-1, 1]`` refined geometrically toward ``xi_star``."""
    xs = float(np.clip(xi_star, -1.0, 1.0))
    cuts = {-1.0, 1.0, xs}
    floor = max(0.25 * eta, 1e-15)
    h = 1.0
    for _ in range(levels):
        h *= 0.5
        if h < floor:
            break
        for c in (xs - h, xs + h):
            if -1.0 < c < 1.0:
                cuts.add(c)
    br = np.array(sorted(cuts))
    xg, wg = gauss_legendre(order)
    half = 0.5 * np.diff(br)
    mid = 0.5 * (br[1:] + br[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def polygon_single_layer_at(geom: PanelGeometry, density: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Single layer of the polygon at arbitrary points, accurate close to (and on) the boundary."""
    lay = geom.layout
    targets = np.atleast_2d(targets)
    out = log_kernel(targets, geom.x, geom.weights) @ density
    p = lay.order
    plen = geom.panel_length
    for P in range(lay.n_panels):
        e = lay.panel_edge[P]
        a = geom.vertices[e] + lay.t0[P] * (geom.vertices[(e + 1) % lay.n_edges] - geom.vertices[e])
        tvec = geom.edge_tangent[e]
        rel = targets - a
        along = rel @ tvec
        perp = np.abs(rel @ geom.edge_normal[e])
        L = plen[P]
        dist = np.sqrt(perp**2 + np.maximum(0.0, np.maximum(-along, along - L)) ** 2)
        near = np.flatnonzero(dist < L)
        if near.size == 0:
            continue
        cols = slice(P * p, (P + 1) * p)
        coarse = log_kernel(targets[near], geom.x[cols], geom.weights[cols]) @ density[cols]
        for q, i in enumerate(near):
            xi_star = 2.0 * along[i] / L - 1.0
            nodes, weights = _panel_refined_rule(xi_star, 2.0 * perp[i] / L)
            vals = lagrange_matrix(p, nodes) @ density[cols]
            pts = a + (0.5 * (nodes + 1.0) * L)[:, None] * tvec
            d = targets[i] - pts
            r2 = np.sum(d * d, axis=1)
            fine = -0.5 * INV_2PI * np.sum(np.log(np.where(r2 > 0, r2, 1.0)) * vals * weights) * 0.5 * L
            out[i] += fine - coarse[q]
    return out


@dataclass(frozen=True, eq=False)
class NearField:
    """Refined product rules for node/panel pairs on different edges that are close.

    Built once from the real geometry; :meth:`entries` evaluates a kernel on
    any geometry with the same layout (real or complex vertices), so the
    rules themselves do not depend on the differentiation direction.
    """

    target: np.ndarray  # (m,) node index
    panel: np.ndarray  # (m,) panel index
    q_pair: np.ndarray  # (Q,) pair of each quadrature point
    q_t: np.ndarray  # (Q,) edge parameter of each point
    q_w: np.ndarray  # (Q,) reference weight (multiply by edge length)
    q_lag: np.ndarray  # (Q, p) Lagrange basis of the source panel

    @classmethod
    def build(cls, geom: PanelGeometry, reach: float = 1.5, order: int = 12) -> "NearField":
        lay = geom.layout
        x = np.real(geom.x)
        targets, panels, pairs, ts, ws, lags = [], [], [], [], [], []
        plen = np.real(geom.panel_length)
        v = np.real(geom.vertices)
        m = 0
        for P in range(lay.n_panels):
            e = lay.panel_edge[P]
            va, vb = v[e], v[(e + 1) % lay.n_edges]
            a = va + lay.t0[P] * (vb - va)
            tvec = np.real(geom.edge_tangent[e])
            nvec = np.real(geom.edge_normal[e])
            rel = x - a
            along = rel @ tvec
            perp = np.abs(rel @ nvec)
            L = plen[P]
            over = np.maximum(0.0, np.maximum(-along, along - L))
            dist = np.sqrt(perp**2 + over**2)
            near = np.flatnonzero((dist < reach * L) & (lay.node_edge != e))
            half = 0.5 * (lay.t1[P] - lay.t0[P])
            for i in near:
                xi, wi = _panel_refined_rule(2.0 * along[i] / L - 1.0, 2.0 * dist[i] / L, order=order)
                targets.append(i)
                panels.append(P)
                pairs.append(np.full(xi.size, m))
                ts.append(lay.t0[P] + half * (xi + 1.0))
                ws.append(half * wi)
                lags.append(lagrange_matrix(lay.order, xi))
                m += 1
        if m == 0:
            z = np.zeros(0)
            return cls(z.astype(int), z.astype(int), z.astype(int), z, z, np.zeros((0, lay.order)))
        return cls(np.array(targets), np.array(panels), np.concatenate(pairs), np.concatenate(ts),
                   np.concatenate(ws), np.vstack(lags))

    def entries(self, geom: PanelGeometry, kind: str, select=None) -> tuple[np.ndarray, np.ndarray]:
        """Corrected matrix entries ``(pair indices, values (m', p))``.

        ``kind`` is ``"normal"`` (normal derivative of the single layer at
        the target) or ``"tangent"`` (tangential derivative).  ``select`` is
        a boolean mask over pairs.
        """
        pairs = np.arange(self.target.size) if select is None else np.flatnonzero(select)
        if pairs.size == 0:
            return pairs, np.zeros((0, self.q_lag.shape[1]), dtype=geom.x.dtype)
        lay = geom.layout
        keep = np.isin(self.q_pair, pairs) if select is not None else slice(None)
        q_pair = self.q_pair[keep]
        t = self.q_t[keep]
        panel = self.panel[q_pair]
        e = lay.panel_edge[panel]
        v = geom.vertices
        va, vb = v[e], v[(e + 1) % lay.n_edges]
        y = va + t[:, None] * (vb - va)
        w = self.q_w[keep] * geom.edge_length[e]
        tgt = self.target[q_pair]
        xt = geom.x[tgt]
        direction = geom.edge_normal if kind == "normal" else geom.edge_tangent
        dvec = direction[lay.node_edge[tgt]]
        dx, dy = xt[:, 0] - y[:, 0], xt[:, 1] - y[:, 1]
        k = -INV_2PI * (dx * dvec[:, 0] + dy * dvec[:, 1]) / (dx * dx + dy * dy) * w
        contrib = k[:, None] * self.q_lag[keep]
        out = np.zeros((self.target.size, contrib.shape[1]), dtype=contrib.dtype)
        np.add.at(out, q_pair, contrib)
        return pairs, out[pairs]

    def overwrite(self, M: np.ndarray, geom: PanelGeometry, kind: str, rows=None, cols=None) -> np.ndarray:
        """Replace near entries of the block ``M = K[rows][:, cols]`` in place."""
        n = geom.layout.size
        p = geom.layout.order
        row_pos = np.full(n, -1)
        col_pos = np.full(n, -1)
        row_pos[np.arange(n) if rows is None else rows] = np.arange(M.shape[0])
        col_pos[np.arange(n) if cols is None else cols] = np.arange(M.shape[1])
        first = self.panel * p
        select = (row_pos[self.target] >= 0) & (col_pos[first] >= 0)
        pairs, vals = self.entries(geom, kind, select)
        if pairs.size == 0:
            return M
        r = row_pos[self.target[pairs]]
        c = col_pos[first[pairs][:, None] + np.arange(p)[None, :]]
        M[r[:, None], c] = vals
        return M
