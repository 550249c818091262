"""Scikit-learn style wrapper around :func:`polystab.inversion.reconstruct`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .forward import Discretization
from .geometry import DomainBoundary, Polygon
from .inversion import ReconstructionConfig, forward_traces, reconstruct
from .validation import check_traces, check_vertices


class PolygonReconstructor(BaseEstimator):
    """Recover a polygonal inclusion in a disk from boundary traces.

    ``X`` passed to :meth:`fit` holds one row per current: the measured
    potential at the ``boundary_nodes`` equispaced points
    ``theta_j = 2 pi j / boundary_nodes`` of the circle of radius ``radius``.
    ``k=None`` selects the insulating model.

    Attributes set by ``fit``: ``polygon_``, ``vertices_``, ``n_iter_``,
    ``log_``, ``converged_``, ``residual_``.
    """

    def __init__(self, initial=None, k=2.0, currents=("cos:1", "sin:1"), radius=1.0, delta=0.1,
                 max_iter=25, lm_initial=1e-3, step_tol=1e-9, panels_per_edge=12, grading=3.0,
                 order=8, boundary_nodes=256):
        self.initial = initial
        self.k = k
        self.currents = currents
        self.radius = radius
        self.delta = delta
        self.max_iter = max_iter
        self.lm_initial = lm_initial
        self.step_tol = step_tol
        self.panels_per_edge = panels_per_edge
        self.grading = grading
        self.order = order
        self.boundary_nodes = boundary_nodes

    def _setup(self):
        currents = [self.currents] if isinstance(self.currents, str) else list(self.currents)
        disc = Discretization(self.panels_per_edge, self.grading, self.order, self.boundary_nodes)
        return DomainBoundary.circle(self.radius), currents, disc

    def fit(self, X, y=None):
        boundary, currents, disc = self._setup()
        X = check_traces(X, len(currents), self.boundary_nodes)
        if self.initial is None:
            raise ValueError("an initial polygon is required")
        initial = Polygon(check_vertices(self.initial))
        cfg = ReconstructionConfig(max_iter=self.max_iter, lm_initial=self.lm_initial,
                                   step_tol=self.step_tol, delta=self.delta)
        result = reconstruct(boundary, self.k, currents, list(X), initial, cfg, disc)
        self.polygon_ = result.polygon
        self.vertices_ = np.array(result.polygon.vertices)
        self.n_iter_ = result.iterations
        self.log_ = result.log
        self.converged_ = result.converged
        self.residual_ = result.residual
        return self

    def predict(self, X=None):
        """Traces of the fitted polygon, shape ``(n_currents, boundary_nodes)``; ``X`` is ignored."""
        check_is_fitted(self, "polygon_")
        boundary, currents, disc = self._setup()
        return np.vstack([t.values for t in forward_traces(boundary, self.polygon_, self.k, currents, disc)])

    def score(self, X, y=None):
        """Negative L2 misfit between ``X`` and the fitted polygon's traces."""
        boundary, currents, disc = self._setup()
        X = check_traces(X, len(currents), self.boundary_nodes)
        w = 2.0 * np.pi * self.radius / self.boundary_nodes
        return -float(np.sqrt(w * np.sum((self.predict() - X) ** 2)))
