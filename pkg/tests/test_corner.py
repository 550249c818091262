import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polystab.corner import (
    corner_exponents,
    determinant_closed_form,
    exponent_residual,
    fit_corner_coefficients,
    lambda_of_k,
    matrix_M,
    sign_obstruction,
)
from polystab.exceptions import DegenerateAngleError, DomainError


def test_right_angle_closed_form():
    spec = corner_exponents(math.pi / 2, lambda_of_k(2.0), 4)
    g1 = 2 / math.pi * math.acos(1 / 6)
    assert spec[0] == pytest.approx(g1, abs=1e-12)
    assert spec[1] == pytest.approx(2 - g1, abs=1e-12)
    assert np.all(np.abs(spec.residuals) < 1e-12)
    assert spec[2] > 1.5


def test_lambda_is_symmetric_in_k():
    assert lambda_of_k(2.0) == pytest.approx(3.0)
    assert lambda_of_k(0.5) == pytest.approx(3.0)
    for bad in (1.0, 0.0, -1.0, float("inf")):
        with pytest.raises(DomainError):
            lambda_of_k(bad)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.02, 2 * math.pi - 0.02), st.floats(1.001, 50.0))
def test_exponent_bounds(alpha, lam):
    if abs(alpha - math.pi) < 1e-3:
        alpha += 3e-3
    g = corner_exponents(alpha, lam, 3).exponents
    assert 0.5 < g[0] < 1.0 < g[1] < 1.5 < g[2]
    assert np.all(np.abs(exponent_residual(g[:2], alpha, lam)) < 1e-9)


def test_tangential_lattice_root():
    # alpha = pi/2: gamma = 2 makes both sines vanish without a sign change
    spec = corner_exponents(math.pi / 2, 3.0, 6)
    assert 2.0 in spec.exponents
    assert spec.tangential[list(spec.exponents).index(2.0)]


def test_bad_inputs():
    with pytest.raises(DegenerateAngleError):
        corner_exponents(math.pi, 3.0, 2)
    with pytest.raises(DegenerateAngleError):
        corner_exponents(0.0, 3.0, 2)
    with pytest.raises(DomainError):
        corner_exponents(1.0, 0.9, 2)


def test_matrix_determinant_matches_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a1, k, a, g = rng.uniform(0.1, 3), rng.uniform(0.1, 5), rng.uniform(-2, 2), rng.uniform(0.5, 1.5)
        assert np.linalg.det(matrix_M(a1, k, a, g)) == pytest.approx(determinant_closed_form(a1, k, a, g), abs=1e-12)


def test_matrix_determinant_right_angle_value():
    g1 = 2 / math.pi * math.acos(1 / 6)
    # s1 = sqrt(35)/6 and s1' = -1/6, so det = 2 (1 + 1) + 9 sqrt(35)/36
    assert np.linalg.det(matrix_M(math.pi / 2, 2.0, 1.0, g1)) == pytest.approx(4 + math.sqrt(35) / 4, rel=1e-12)


def test_sign_obstruction_right_angle():
    obs = sign_obstruction(math.pi / 2, 3.0)
    assert obs.opposite
    assert obs.products[0] * obs.products[1] < 0


def test_corner_fit_recovers_synthetic_coefficients():
    alpha, lam = 1.2, 3.0
    spec = corner_exponents(alpha, lam, 3)
    rng = np.random.default_rng(1)
    r = rng.uniform(1e-3, 5e-2, 300)
    th = rng.uniform(0, alpha, 300)
    g = spec.exponents
    vals = 0.7 + 1.3 * np.cos(g[0] * th) * r ** g[0] - 0.4 * np.sin(g[1] * th) * r ** g[1]
    fit = fit_corner_coefficients(r, th, vals, spec, m=2, fit_offset=True)
    assert fit.residual_norm < 1e-8
    assert fit.offset == pytest.approx(0.7, abs=1e-8)
    assert fit.modes[0].beta == pytest.approx(1.3) and fit.modes[0].A == pytest.approx(1.0)
    assert abs(fit.modes[1].beta) == pytest.approx(0.4)
