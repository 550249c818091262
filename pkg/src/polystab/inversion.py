"""Vertex reconstruction from boundary traces and empirical Lipschitz ratios."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .currents import check_seo_condition, make_current
from .exceptions import ConfigError, DimensionError, FeasibilityError, GeometryError
from .forward import Discretization, ForwardSystem, Trace, check_conductivity
from .geometry import (
    AdmissibleClassParams,
    DomainBoundary,
    Polygon,
    hausdorff_distance,
    is_admissible,
    polygon_metric,
    random_perturbation,
    sample_admissible_polygon,
)
from .shape import injectivity_margin, jacobian_from_solutions

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReconstructionConfig:
    """Levenberg-Marquardt settings.

    The damping starts at ``lm_initial``, is multiplied by ``lm_growth``
    after a rejected step and by ``lm_shrink`` after an accepted one.
    Iteration stops when an accepted step moves the polygon by less than
    ``step_tol`` in the vertex metric, when the residual drops below
    ``residual_tol``, or after ``max_iter`` trial steps.  Iterates are kept
    in the class with parameter ``delta / 2``.
    """

    max_iter: int = 25
    lm_initial: float = 1e-3
    lm_growth: float = 10.0
    lm_shrink: float = 0.5
    step_tol: float = 1e-9
    residual_tol: float = 1e-13
    delta: float = 0.1
    max_halvings: int = 30
    noise: float = 0.0

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ConfigError(f"max_iter must be a nonnegative integer, got {self.max_iter!r}")
        if not self.lm_initial > 0:
            raise ConfigError("lm_initial must be positive")
        if not self.lm_growth > 1:
            raise ConfigError("lm_growth must exceed 1")
        if not 0 < self.lm_shrink < 1:
            raise ConfigError("lm_shrink must lie in (0, 1)")
        if not (self.step_tol > 0 and self.residual_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not self.noise >= 0:
            raise ConfigError("noise level must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def _currents(currents):
    if isinstance(currents, str) or not hasattr(currents, "__len__"):
        currents = [currents]
    return [make_current(c) for c in currents]


def data_discretization(disc: Discretization | None = None) -> Discretization:
    """Finer discretization for synthetic data: twice the panels, two more nodes per panel.

    The outer node set is kept so that data and model traces are comparable.
    """
    d = disc or Discretization()
    return Discretization(2 * d.panels_per_edge, d.grading, d.order + 2, d.boundary_nodes)


def forward_traces(boundary: DomainBoundary, polygon: Polygon, k, currents,
                   disc: Discretization | None = None) -> list[Trace]:
    """Traces for several currents on one polygon (one factorization)."""
    system = ForwardSystem(boundary, polygon, k, disc)
    return [system.solve(f).trace for f in _currents(currents)]


def _stack(traces, measured) -> np.ndarray:
    if len(traces) != len(measured):
        raise DimensionError(f"{len(measured)} measured traces for {len(traces)} currents")
    parts = []
    for t, m in zip(traces, measured):
        m_vals = m.values if isinstance(m, Trace) else np.asarray(m, float)
        if m_vals.shape != t.values.shape:
            raise DimensionError(f"measured trace has {m_vals.size} nodes, model has {t.values.size}")
        parts.append(np.sqrt(t.weights) * (t.values - m_vals))
    return np.concatenate(parts)


def residual(boundary: DomainBoundary, polygon: Polygon, k, currents, measured,
             disc: Discretization | None = None) -> tuple[np.ndarray, float]:
    """Weighted residual ``sqrt(w) (Lambda(P) - measured)`` stacked over currents, and its norm."""
    r = _stack(forward_traces(boundary, polygon, k, currents, disc), measured)
    return r, float(np.linalg.norm(r))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    residual: float
    sigma_min: float
    step_d: float
    damping: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    polygon: Polygon
    log: tuple[IterationRecord, ...]
    converged: bool
    stagnated: bool
    message: str

    @property
    def iterations(self) -> int:
        return self.log[-1].iteration if self.log else 0

    @property
    def residual(self) -> float:
        return min(r.residual for r in self.log if r.accepted)

    def __iter__(self):
        # allows ``polygon, log = reconstruct(...)``
        return iter((self.polygon, self.log))


class _Model:
    """Residual and Jacobian at one polygon."""

    def __init__(self, boundary, polygon, k, currents, measured, disc):
        self.polygon = polygon
        self.system = ForwardSystem(boundary, polygon, k, disc)
        self.solutions = [self.system.solve(f) for f in currents]
        self.r = _stack([s.trace for s in self.solutions], measured)
        self.norm = float(np.linalg.norm(self.r))
        self._J = None

    @property
    def J(self) -> np.ndarray:
        if self._J is None:
            self._J = jacobian_from_solutions(self.system, self.solutions)
        return self._J


def _candidate(x: np.ndarray, step: np.ndarray, params: AdmissibleClassParams, boundary, halvings: int):
    t = 1.0
    for _ in range(halvings + 1):
        try:
            poly = Polygon(x + t * step)
        except GeometryError:
            poly = None
        if poly is not None and is_admissible(poly, params, boundary):
            return poly, t
        t *= 0.5
    return None, 0.0


def reconstruct(boundary: DomainBoundary, k, currents, measured, initial: Polygon,
                cfg: ReconstructionConfig | None = None, disc: Discretization | None = None) -> ReconstructionResult:
    """Damped Gauss-Newton (Levenberg-Marquardt) on the vertex coordinates.

    ``measured`` holds one trace (or value array on the model's outer nodes)
    per current.  The result unpacks as ``(polygon, log)``.
    """
    cfg = cfg or ReconstructionConfig()
    k = check_conductivity(k)
    currents = _currents(currents)
    if len(currents) == 2 and k is not None and not check_seo_condition(*currents):
        log.warning("probing currents fail the connectivity condition")
    params = AdmissibleClassParams(initial.n, cfg.delta)
    if not is_admissible(initial, params, boundary):
        raise ConfigError(f"initial polygon is not admissible for delta={cfg.delta:g}")
    inner = AdmissibleClassParams(initial.n, 0.5 * cfg.delta)

    model = _Model(boundary, initial, k, currents, measured, disc)
    damping = cfg.lm_initial
    records = [IterationRecord(0, model.norm, injectivity_margin(model.J).sigma_min, 0.0, damping, True)]
    if model.norm <= cfg.residual_tol:
        return ReconstructionResult(initial, tuple(records), True, False, "residual below tolerance")
    converged, stagnated, message = False, False, "maximum iterations reached"
    for it in range(1, cfg.max_iter + 1):
        J, r = model.J, model.r
        JtJ = J.T @ J
        g = J.T @ r
        step = -np.linalg.solve(JtJ + damping * np.diag(np.diag(JtJ)), g)
        x = model.polygon.vertices
        poly, t = _candidate(x, step.reshape(-1, 2), inner, boundary, cfg.max_halvings)
        if poly is None:
            stagnated, message = True, "no admissible step after halving"
            records.append(IterationRecord(it, model.norm, records[-1].sigma_min, 0.0, damping, False))
            break
        proposed = polygon_metric(model.polygon, poly)
        if proposed < cfg.step_tol:
            records.append(IterationRecord(it, model.norm, records[-1].sigma_min, proposed, damping, False))
            converged, message = True, "step below tolerance"
            break
        trial = _Model(boundary, poly, k, currents, measured, disc)
        if trial.norm < model.norm:
            step_d = proposed
            model = trial
            damping *= cfg.lm_shrink
            records.append(IterationRecord(it, model.norm, injectivity_margin(model.J).sigma_min, step_d, damping, True))
            log.debug("iter %d residual %.3e step %.3e", it, model.norm, step_d)
            if step_d < cfg.step_tol:
                converged, message = True, "step below tolerance"
                break
            if model.norm <= cfg.residual_tol:
                converged, message = True, "residual below tolerance"
                break
        else:
            damping *= cfg.lm_growth
            records.append(IterationRecord(it, model.norm, records[-1].sigma_min, 0.0, damping, False))
            if damping > 1e12:
                stagnated, message = True, "damping exhausted without decrease"
                break
    return ReconstructionResult(model.polygon, tuple(records), converged, stagnated, message)


def noise_realization(traces, seed) -> list[np.ndarray]:
    """Gaussian node noise normalized to unit stacked L2 norm relative to ``traces``.

    Adding ``level`` times the returned arrays perturbs the data by exactly
    ``level * ||traces||`` in L2; reuse it to vary the level with a fixed
    realization.
    """
    rng = np.random.default_rng(seed)
    raw = [rng.standard_normal(t.values.size) for t in traces]
    total = math.sqrt(sum(t.norm() ** 2 for t in traces))
    size = math.sqrt(sum(float(np.sum(t.weights * z**2)) for t, z in zip(traces, raw)))
    return [z * (total / size) for z in raw]


def add_noise(traces, level: float, seed=None, realization=None) -> list[Trace]:
    """Additive Gaussian noise with relative stacked L2 size ``level``."""
    if level < 0:
        raise ConfigError("noise level must be nonnegative")
    z = realization if realization is not None else noise_realization(traces, seed)
    return [t.with_values(t.values + level * zi) for t, zi in zip(traces, z)]


@dataclass(frozen=True)
class PairRecord:
    seed: int
    mode: str
    n: tuple[int, int]
    distance: float
    trace_distance: float
    ratio: float
    vertex_distance: float | None = None
    hausdorff: float | None = None
    linearized_ratio: float | None = None


@dataclass(frozen=True, eq=False)
class LipschitzReport:
    samples: tuple[PairRecord, ...]
    params: dict = field(default_factory=dict)
    excluded: int = 0

    @property
    def count(self) -> int:
        return len(self.samples)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s.ratio for s in self.samples])

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.samples else float("nan")

    def quantiles(self, qs=(0.5, 0.9, 0.99)) -> dict:
        r = self.ratios
        return {f"q{int(round(100 * q))}": float(np.quantile(r, q)) for q in qs} if r.size else {}

    def by_mode(self, mode: str) -> "LipschitzReport":
        return LipschitzReport(tuple(s for s in self.samples if s.mode == mode), self.params, 0)

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "quantiles": self.quantiles(),
            "count": self.count,
            "excluded": self.excluded,
            "params": self.params,
            "samples": [asdict(s) for s in self.samples],
        }


PAIRING_MODES = ("near", "independent", "hausdorff")


def _stacked_distance(a, b) -> float:
    return math.sqrt(sum((x - y).norm() ** 2 for x, y in zip(a, b)))


def _near_partner(poly: Polygon, params, boundary, rng, tries: int = 200):
    for _ in range(tries):
        radius = rng.uniform(1e-3, params.delta / 4)
        d = random_perturbation(poly.n, radius, rng)
        try:
            q = poly.perturbed(d.displacements)
        except GeometryError:
            continue
        if is_admissible(q, params, boundary):
            return q, d
    raise FeasibilityError("no admissible near partner found")


def _one_pair(idx, seq, mode, boundary, k, currents, params, disc, n_max):
    rng = np.random.default_rng(seq)
    seed = int(seq.generate_state(1)[0])
    if mode == "near":
        p = sample_admissible_polygon(params, boundary, rng)
        q, d = _near_partner(p, params, boundary, rng)
    elif mode == "independent":
        p = sample_admissible_polygon(params, boundary, rng)
        q = sample_admissible_polygon(params, boundary, rng)
    else:
        n1, n2 = rng.integers(3, n_max + 1, size=2)
        p = sample_admissible_polygon(AdmissibleClassParams(int(n1), params.delta), boundary, rng)
        q = sample_admissible_polygon(AdmissibleClassParams(int(n2), params.delta), boundary, rng)
    sp = ForwardSystem(boundary, p, k, disc)
    sols = [sp.solve(f) for f in currents]
    tq = forward_traces(boundary, q, k, currents, disc)
    dist = _stacked_distance([s.trace for s in sols], tq)
    vd = polygon_metric(p, q) if p.n == q.n else None
    dh = hausdorff_distance(p, q)
    num = dh if mode == "hausdorff" else vd
    lin = None
    if mode == "near":
        J = jacobian_from_solutions(sp, sols)
        lin = vd / float(np.linalg.norm(J @ d.flat()))
    if dist == 0.0:
        return None
    return PairRecord(seed, mode, (p.n, q.n), float(num), dist, float(num) / dist, vd, dh, lin)


def lipschitz_experiment(boundary: DomainBoundary, k, currents, params: AdmissibleClassParams,
                         pairs: int = 200, pairing: str = "near", seed=0,
                         disc: Discretization | None = None, threads: int = 1,
                         max_vertices: int | None = None) -> LipschitzReport:
    """Ratios ``d(D, D') / ||Lambda(D) - Lambda(D')||`` over random pairs.

    ``pairing`` is ``"near"`` (a sample and an admissible perturbation of
    size uniform in ``[1e-3, delta/4]``), ``"independent"`` (two unrelated
    samples) or ``"hausdorff"`` (vertex counts drawn from ``3..max_vertices``,
    compared by the Hausdorff distance of the boundaries).  Sample ``i``
    uses the ``i``-th child of ``SeedSequence([seed, mode])``, so results
    do not depend on ``threads``.
    """
    if pairing not in PAIRING_MODES:
        raise ConfigError(f"pairing must be one of {PAIRING_MODES}, got {pairing!r}")
    if pairs < 1:
        raise ConfigError("need at least one pair")
    k = check_conductivity(k)
    currents = _currents(currents)
    n_max = max_vertices or params.n
    if pairing == "hausdorff" and n_max < 3:
        raise ConfigError("max_vertices must be at least 3")
    children = np.random.SeedSequence([int(seed), PAIRING_MODES.index(pairing)]).spawn(pairs)

    def run(i):
        return _one_pair(i, children[i], pairing, boundary, k, currents, params, disc, n_max)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(run, range(pairs)))
    else:
        out = [run(i) for i in range(pairs)]
    kept = tuple(r for r in out if r is not None)
    info = {
        "n": params.n,
        "delta": params.delta,
        "k": "insulating" if k is None else k,
        "currents": [str(c) for c in currents],
        "pairing": pairing,
        "pairs": pairs,
        "seed": seed,
        "max_vertices": n_max,
        "discretization": (disc or Discretization()).to_dict(),
    }
    return LipschitzReport(kept, info, len(out) - len(kept))
