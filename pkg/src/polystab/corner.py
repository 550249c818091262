"""Corner singularities of the two-phase conductivity problem.

Near a vertex with interior angle ``alpha`` the potential behaves like
``u(x_i) + sum_j beta_j y_j(theta) r**gamma_j``.  The exponents are the
positive roots of

    |sin(gamma (alpha - pi))| = lam |sin(gamma pi)|,   lam = |(k + 1)/(k - 1)|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateAngleError, DomainError, FitError

SCAN_STEP = 1e-4
LATTICE_TOL = 1e-10


def lambda_of_k(k: float) -> float:
    """Contrast amplitude ``|(k+1)/(k-1)|``; always greater than one."""
    if not (k > 0) or k == 1 or not math.isfinite(k):
        raise DomainError(f"conductivity must be positive and different from 1, got {k!r}")
    return abs((k + 1.0) / (k - 1.0))


def exponent_residual(gamma, alpha, lam: float):
    gamma = np.asarray(gamma, float)
    alpha = np.asarray(alpha, float)
    return np.abs(np.sin(gamma * (alpha - np.pi))) - lam * np.abs(np.sin(gamma * np.pi))


@dataclass(frozen=True, eq=False)
class CornerSpectrum:
    alpha: float
    lam: float
    exponents: np.ndarray
    residuals: np.ndarray
    tangential: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    def __len__(self) -> int:
        return len(self.exponents)

    def __getitem__(self, j):
        return self.exponents[j]


def _check_angle(alpha: float):
    if not 0.0 < alpha < 2.0 * np.pi:
        raise DegenerateAngleError(f"angle must lie in (0, 2*pi), got {alpha!r}")
    if abs(alpha - np.pi) <= 1e-12:
        raise DegenerateAngleError("angle equal to pi has no corner singularity")


def _bisect(lo: np.ndarray, hi: np.ndarray, alpha, lam: float) -> np.ndarray:
    """Vectorized bisection down to adjacent floating-point numbers."""
    g_lo = exponent_residual(lo, alpha, lam)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        g_mid = exponent_residual(mid, alpha, lam)
        same = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(same & ~done, mid, lo)
        g_lo = np.where(same & ~done, g_mid, g_lo)
        hi = np.where(~same & ~done, mid, hi)
    g_lo = np.abs(exponent_residual(lo, alpha, lam))
    g_hi = np.abs(exponent_residual(hi, alpha, lam))
    return np.where(g_lo <= g_hi, lo, hi)


def _lattice_roots(alpha: float, upto: float) -> np.ndarray:
    """Integers ``gamma`` where both sines vanish: ``gamma (alpha - pi) / pi`` integral too."""
    g = np.arange(1, int(math.floor(upto)) + 1, dtype=float)
    q = g * (alpha - np.pi) / np.pi
    return g[np.abs(q - np.round(q)) <= LATTICE_TOL * np.maximum(1.0, np.abs(q))]


def corner_exponents(alpha: float, lam: float, m: int, step: float = SCAN_STEP) -> CornerSpectrum:
    """First ``m`` positive exponents for interior angle ``alpha`` and amplitude ``lam``.

    Sign changes of the residual are located on a uniform grid and refined
    by bisection; tangential roots on the integer lattice are added
    separately because the residual does not change sign there.
    """
    _check_angle(alpha)
    if not lam > 1:
        raise DomainError(f"amplitude must exceed 1, got {lam!r}")
    if m < 1:
        raise DomainError("need at least one exponent")
    found: np.ndarray = np.zeros(0)
    tangential: np.ndarray = np.zeros(0)
    upper = 1.5
    while True:
        n_pts = int(math.ceil(upper / step))
        grid = step * np.arange(1, n_pts + 1)
        g = exponent_residual(grid, alpha, lam)
        flip = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
        exact = grid[np.flatnonzero(g == 0.0)]
        roots = _bisect(grid[flip], grid[flip + 1], alpha, lam)
        tangential = _lattice_roots(alpha, upper)
        if roots.size and tangential.size:
            # a bracketed lattice root is not a separate root
            gap = np.min(np.abs(tangential[:, None] - roots[None, :]), axis=1)
            tangential = tangential[gap > 10 * step]
        found = np.unique(np.concatenate([roots, exact, tangential]))
        if found.size >= m:
            break
        upper *= 2.0
    gam = found[:m]
    is_tan = np.isin(gam, tangential)
    return CornerSpectrum(float(alpha), float(lam), gam, exponent_residual(gam, alpha, lam), is_tan)


def matrix_M(alpha1: float, k: float, a: float, gamma: float) -> np.ndarray:
    """Coefficient matrix of the homogeneous system for ``(beta A, beta B)`` of one mode."""
    c, s = math.cos(gamma * alpha1), math.sin(gamma * alpha1)
    cp, sp = math.cos((gamma - 1.0) * alpha1), math.sin((gamma - 1.0) * alpha1)
    return np.array([[k * a * s - sp, -k * (a * c + cp)], [a * c + cp, a * s - k * sp]])


def determinant_closed_form(alpha1: float, k: float, a: float, gamma: float) -> float:
    """``k (1 + 2 a cos alpha1 + a^2) - (k + 1)^2 a s s'``, equal to ``det matrix_M``."""
    s = math.sin(gamma * alpha1)
    sp = math.sin((gamma - 1.0) * alpha1)
    return k * (1.0 + 2.0 * a * math.cos(alpha1) + a * a) - (k + 1.0) ** 2 * a * s * sp


@dataclass(frozen=True)
class SignObstruction:
    products: tuple[float, float]
    opposite: bool
    exponents: tuple[float, float]


def sign_obstruction(alpha1: float, lam: float) -> SignObstruction:
    """Products ``sin(g alpha) sin((g - 1) alpha)`` for the two leading exponents.

    Opposite signs mean the two mode matrices cannot be singular together.
    """
    spec = corner_exponents(alpha1, lam, 2)
    g1, g2 = float(spec.exponents[0]), float(spec.exponents[1])
    p1 = math.sin(g1 * alpha1) * math.sin((g1 - 1.0) * alpha1)
    p2 = math.sin(g2 * alpha1) * math.sin((g2 - 1.0) * alpha1)
    return SignObstruction((p1, p2), bool(np.sign(p1) != np.sign(p2) and p1 != 0 and p2 != 0), (g1, g2))


def leading_exponents(alphas, lam: float, step: float = SCAN_STEP, chunk: int = 64) -> np.ndarray:
    """First two exponents for many angles at once, shape ``(len(alphas), 2)``.

    Both leading roots are sign changes inside ``(1/2, 3/2)``, so no lattice
    handling is needed here.
    """
    alphas = np.atleast_1d(np.asarray(alphas, float))
    for a in alphas:
        _check_angle(float(a))
    if not lam > 1:
        raise DomainError(f"amplitude must exceed 1, got {lam!r}")
    grid = step * np.arange(1, int(math.ceil(1.5 / step)) + 1)
    out = np.full((alphas.size, 2), np.nan)
    for start in range(0, alphas.size, chunk):
        a = alphas[start:start + chunk]
        g = exponent_residual(grid[None, :], a[:, None], lam)
        flip = np.sign(g[:, :-1]) * np.sign(g[:, 1:]) < 0
        # rank of each sign change within its row; keep the first two
        rank = np.cumsum(flip, axis=1) * flip
        rows, cols = np.nonzero((rank == 1) | (rank == 2))
        roots = _bisect(grid[cols], grid[cols + 1], a[rows], lam)
        out[start + rows, rank[rows, cols] - 1] = roots
    return out


def sign_obstruction_sweep(alphas, lam: float) -> np.ndarray:
    """Vectorized :func:`sign_obstruction`; returns ``(products (m, 2), opposite (m,))``."""
    alphas = np.atleast_1d(np.asarray(alphas, float))
    gam = leading_exponents(alphas, lam)
    prod = np.sin(gam * alphas[:, None]) * np.sin((gam - 1.0) * alphas[:, None])
    opposite = (np.sign(prod[:, 0]) * np.sign(prod[:, 1])) < 0
    return prod, opposite


@dataclass(frozen=True)
class CornerMode:
    """One term ``beta (A cos(gamma theta) + B sin(gamma theta)) r**gamma`` with ``A^2 + B^2 = 1``."""

    gamma: float
    A: float
    B: float
    beta: float


@dataclass(frozen=True)
class CornerFit:
    modes: tuple[CornerMode, ...]
    residual_norm: float
    offset: float | None = None

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([mode.beta for mode in self.modes])


def _normalize(c: float, d: float, gamma: float) -> CornerMode:
    beta = math.hypot(c, d)
    if beta == 0.0:
        return CornerMode(gamma, 1.0, 0.0, 0.0)
    A, B = c / beta, d / beta
    if A < 0 or (A == 0 and B < 0):
        A, B, beta = -A, -B, -beta
    return CornerMode(gamma, A, B, beta)


def fit_corner_coefficients(r, theta, values, spectrum: CornerSpectrum | np.ndarray, m: int | None = None,
                            fit_offset: bool = False, rcond: float = 1e-12) -> CornerFit:
    """Least-squares fit of the leading corner modes to samples of ``u - u(x_i)``.

    With ``fit_offset`` the vertex value is unknown and fitted as a constant.
    Raises :class:`FitError` when the design matrix is rank deficient.
    """
    gam = np.asarray(spectrum.exponents if isinstance(spectrum, CornerSpectrum) else spectrum, float)
    if m is not None:
        gam = gam[:m]
    r = np.asarray(r, float).ravel()
    theta = np.asarray(theta, float).ravel()
    y = np.asarray(values, float).ravel()
    if not (r.shape == theta.shape == y.shape):
        raise FitError("r, theta and values must have equal length")
    cols = []
    for g in gam:
        rg = r ** g
        cols += [np.cos(g * theta) * rg, np.sin(g * theta) * rg]
    if fit_offset:
        cols.append(np.ones_like(r))
    X = np.column_stack(cols)
    if X.shape[0] < X.shape[1]:
        raise FitError(f"{X.shape[0]} samples cannot determine {X.shape[1]} coefficients")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise FitError("corner design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.linalg.norm(X @ coef - y))
    modes = tuple(_normalize(coef[2 * j], coef[2 * j + 1], float(g)) for j, g in enumerate(gam))
    return CornerFit(modes, resid, float(coef[-1]) if fit_offset else None)
