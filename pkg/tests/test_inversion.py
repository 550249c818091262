import math

import numpy as np
import pytest

from polystab.exceptions import ConfigError
from polystab.forward import Discretization
from polystab.geometry import AdmissibleClassParams, DomainBoundary, Polygon, polygon_metric
from polystab.inversion import (
    ReconstructionConfig,
    add_noise,
    data_discretization,
    forward_traces,
    lipschitz_experiment,
    noise_realization,
    reconstruct,
    residual,
)

DISK = DomainBoundary.circle()
CUR = ["cos:1", "sin:1"]
TRUTH = Polygon(np.array([[0.62, -0.19], [-0.24, 0.53], [-0.45, -0.52]]))
SHIFT = np.array([[0.03, -0.02], [-0.04, 0.01], [0.02, 0.035]])


@pytest.fixture(scope="module")
def data():
    return forward_traces(DISK, TRUTH, 2.0, CUR, data_discretization())


def test_data_discretization_keeps_outer_nodes():
    base = Discretization()
    fine = data_discretization(base)
    assert fine.boundary_nodes == base.boundary_nodes
    assert fine.panels_per_edge == 2 * base.panels_per_edge and fine.order == base.order + 2


def test_truth_is_a_fixed_point():
    exact = forward_traces(DISK, TRUTH, 2.0, CUR)
    assert residual(DISK, TRUTH, 2.0, CUR, exact)[1] < 1e-13
    res = reconstruct(DISK, 2.0, CUR, exact, TRUTH)
    assert res.converged and res.iterations == 0
    assert polygon_metric(res.polygon, TRUTH) == 0.0


def test_reconstruction_and_labeling(data):
    start = TRUTH.perturbed(SHIFT)
    poly, log = reconstruct(DISK, 2.0, CUR, data, start)
    assert polygon_metric(poly, TRUTH) < 1e-4
    assert log[-1].residual < log[0].residual
    relabeled, _ = reconstruct(DISK, 2.0, CUR, data, start.relabeled(1))
    assert polygon_metric(relabeled, poly) < 1e-6


def test_noise_has_the_requested_size(data):
    z = noise_realization(data, 3)
    noisy = add_noise(data, 0.01, realization=z)
    total = math.sqrt(sum(t.norm() ** 2 for t in data))
    diff = math.sqrt(sum((a - b).norm() ** 2 for a, b in zip(noisy, data)))
    assert diff == pytest.approx(0.01 * total, rel=1e-12)
    again = add_noise(data, 0.01, seed=3)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(noisy, again))
    with pytest.raises(ConfigError):
        add_noise(data, -0.1, seed=0)


def test_inadmissible_start_is_rejected(data):
    bad = Polygon(np.array([[0.9, 0.0], [-0.2, 0.5], [-0.2, -0.5]]))
    with pytest.raises(ConfigError):
        reconstruct(DISK, 2.0, CUR, data, bad)
    with pytest.raises(ConfigError):
        ReconstructionConfig(lm_growth=1.0)


def test_lipschitz_is_deterministic_and_thread_independent():
    params = AdmissibleClassParams(3, 0.1)
    a = lipschitz_experiment(DISK, 2.0, CUR, params, 4, "near", 5)
    b = lipschitz_experiment(DISK, 2.0, CUR, params, 4, "near", 5, threads=2)
    assert np.array_equal(a.ratios, b.ratios)
    assert a.count == 4 and np.all(np.isfinite(a.ratios))
    for s in a.samples:
        assert s.hausdorff <= s.vertex_distance + 1e-12
        assert s.ratio == pytest.approx(s.linearized_ratio, rel=0.2)
    assert set(a.to_dict()) >= {"max_ratio", "quantiles", "samples"}


def test_lipschitz_modes():
    params = AdmissibleClassParams(3, 0.1)
    ind = lipschitz_experiment(DISK, 2.0, CUR, params, 3, "independent", 1)
    assert all(s.linearized_ratio is None for s in ind.samples)
    mixed = lipschitz_experiment(DISK, None, ["cos:1"], params, 3, "hausdorff", 1, max_vertices=5)
    assert all(s.distance == s.hausdorff for s in mixed.samples)
    with pytest.raises(ConfigError):
        lipschitz_experiment(DISK, 2.0, CUR, params, 3, "random", 1)
    with pytest.raises(ConfigError):
        lipschitz_experiment(DISK, 2.0, CUR, params, 0, "near", 1)
