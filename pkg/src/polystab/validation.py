"""Input validation helpers shared by the estimator and the command line."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError, DimensionError, GeometryError


def check_vertices(vertices, min_vertices: int = 3) -> np.ndarray:
    """Finite float array of shape ``(n, 2)`` with ``n >= min_vertices``."""
    try:
        v = check_array(vertices, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=min_vertices)
    except ValueError as exc:
        raise GeometryError(f"invalid vertex array: {exc}") from exc
    if v.shape[1] != 2:
        raise GeometryError(f"vertices must have two columns, got {v.shape[1]}")
    return v


def check_traces(X, n_currents: int | None = None, n_nodes: int | None = None) -> np.ndarray:
    """Measured traces as a finite ``(n_currents, n_nodes)`` array."""
    try:
        A = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_features=2)
    except ValueError as exc:
        raise DimensionError(f"invalid trace array: {exc}") from exc
    if n_currents is not None and A.shape[0] != n_currents:
        raise DimensionError(f"expected {n_currents} traces, got {A.shape[0]}")
    if n_nodes is not None and A.shape[1] != n_nodes:
        raise DimensionError(f"expected {n_nodes} nodes per trace, got {A.shape[1]}")
    return A


def check_positive(name: str, value, integer: bool = False) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    if integer:
        if x != int(x):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(x)
    return x
