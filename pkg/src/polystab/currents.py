"""Probing currents on the outer boundary and the connectivity check for current pairs.

A current is a function of the boundary parameter ``theta`` in ``[0, 2*pi)``:
a finite trigonometric sum, piecewise-constant values on equal parameter
arcs, or a sum of both.  Text form (used on the command line)::

    cos:m[:amp]     amp * cos(m theta)
    sin:m[:amp]     amp * sin(m theta)
    pw:v1,v2,...    value v_j on the j-th of m equal arcs

Terms of one current are joined by ``+``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DegeneracyError, TrivialityError

TWO_PI = 2.0 * np.pi
_PROBE = 4096


@dataclass(frozen=True)
class TrigTerm:
    kind: str  # "cos" or "sin"
    m: int
    amp: float = 1.0


@dataclass(frozen=True, eq=False)
class BoundaryCurrent:
    """Mean-zero boundary current ``f(theta)``.

    The constant removed by the projection (in parameter measure) is kept in
    :attr:`offset`; solvers re-project against their own quadrature weights.
    """

    terms: tuple[TrigTerm, ...] = ()
    pieces: tuple[float, ...] = ()
    offset: float = 0.0
    label: str = ""

    def raw(self, theta) -> np.ndarray:
        th = np.asarray(theta, float)
        out = np.zeros_like(th)
        for t in self.terms:
            trig = np.cos if t.kind == "cos" else np.sin
            out = out + t.amp * trig(t.m * th)
        if self.pieces:
            vals = np.asarray(self.pieces)
            idx = np.floor(np.mod(th, TWO_PI) / TWO_PI * vals.size).astype(int)
            out = out + vals[np.clip(idx, 0, vals.size - 1)]
        return out

    def __call__(self, theta) -> np.ndarray:
        return self.raw(theta) - self.offset

    def scaled(self, c: float) -> "BoundaryCurrent":
        terms = tuple(TrigTerm(t.kind, t.m, c * t.amp) for t in self.terms)
        return BoundaryCurrent(terms, tuple(c * v for v in self.pieces), c * self.offset, self.label)

    def __str__(self) -> str:
        return self.label or format_current(self)


def make_current(spec) -> BoundaryCurrent:
    """Build a mean-zero current from a text spec, a term list or another current.

    Accepted inputs: a string in the micro-grammar; a mapping with keys
    ``cos``/``sin`` (``{m: amp}``) and/or ``pw`` (list of arc values); a
    sequence of ``(kind, m, amp)`` tuples.
    """
    if isinstance(spec, BoundaryCurrent):
        return spec
    label = spec if isinstance(spec, str) else ""
    if isinstance(spec, str):
        terms, pieces = _parse_terms(spec)
    elif isinstance(spec, dict):
        terms, pieces = [], list(spec.get("pw", ()))
        for kind in ("cos", "sin"):
            for m, amp in dict(spec.get(kind, {})).items():
                terms.append(TrigTerm(kind, int(m), float(amp)))
    else:
        terms, pieces = [], []
        for item in spec:
            kind, m, *rest = item
            terms.append(TrigTerm(str(kind), int(m), float(rest[0]) if rest else 1.0))
    if not terms and not pieces:
        raise ConfigError("empty current specification")
    for t in terms:
        if t.kind not in ("cos", "sin") or t.m < 0:
            raise ConfigError(f"bad current term {t}")
        if not math.isfinite(t.amp):
            raise ConfigError(f"non-finite amplitude in {t}")
    pieces = tuple(float(v) for v in pieces)
    if not all(math.isfinite(v) for v in pieces):
        raise ConfigError("non-finite piecewise value")
    # constant parts in parameter measure: cos(0 theta) terms and the arc average
    offset = sum(t.amp for t in terms if t.kind == "cos" and t.m == 0)
    offset += float(np.mean(pieces)) if pieces else 0.0
    cur = BoundaryCurrent(tuple(terms), pieces, offset, label)
    theta = TWO_PI * (np.arange(_PROBE) + 0.5) / _PROBE
    vals = cur(theta)
    scale = max(1.0, float(np.max(np.abs(cur.raw(theta)))))
    if float(np.max(np.abs(vals))) <= 1e-12 * scale:
        raise TrivialityError("current vanishes after mean-zero projection")
    return cur


_TERM = re.compile(r"^(cos|sin):(\d+)(?::([^:]+))?$")


def _parse_terms(text: str) -> tuple[list[TrigTerm], list[float]]:
    terms: list[TrigTerm] = []
    pieces: list[float] = []
    parts = [p.strip() for p in re.split(r"\+(?![\d.])", text.replace(" ", "")) if p.strip()]
    if not parts:
        raise ConfigError(f"empty current specification {text!r}")
    for part in parts:
        if part.startswith("pw:"):
            if pieces:
                raise ConfigError("at most one piecewise term per current")
            try:
                pieces = [float(v) for v in part[3:].split(",") if v != ""]
            except ValueError as exc:
                raise ConfigError(f"bad piecewise values in {part!r}") from exc
            if not pieces:
                raise ConfigError(f"piecewise term without values: {part!r}")
            continue
        for sub in part.split(","):
            match = _TERM.match(sub)
            if not match:
                raise ConfigError(f"cannot parse current term {sub!r}; expected cos:m[:amp], sin:m[:amp] or pw:v1,...")
            amp = float(match.group(3)) if match.group(3) is not None else 1.0
            terms.append(TrigTerm(match.group(1), int(match.group(2)), amp))
    return terms, pieces


def parse_currents(text: str) -> list[BoundaryCurrent]:
    """Split a list of currents.

    ``;`` always separates currents.  Without ``;``, a comma starts a new
    current at every ``cos:``/``sin:``/``pw:`` token, and bare numbers after
    ``pw:`` extend that piecewise list.  Use ``+`` to sum terms.
    """
    text = text.replace(" ", "")
    if ";" in text:
        chunks = [c for c in text.split(";") if c]
    else:
        chunks: list[str] = []
        for tok in text.split(","):
            if not tok:
                continue
            if re.match(r"^(cos|sin|pw):", tok) or not chunks:
                chunks.append(tok)
            elif "pw:" in chunks[-1].split("+")[-1]:
                chunks[-1] += "," + tok
            else:
                raise ConfigError(f"dangling token {tok!r} in current list")
    if not chunks:
        raise ConfigError("no currents given")
    return [make_current(c) for c in chunks]


def format_current(cur: BoundaryCurrent) -> str:
    parts = [f"{t.kind}:{t.m}:{t.amp:.17g}" if t.amp != 1.0 else f"{t.kind}:{t.m}" for t in cur.terms]
    if cur.pieces:
        parts.append("pw:" + ",".join(f"{v:.17g}" for v in cur.pieces))
    return "+".join(parts)


@dataclass(frozen=True)
class SeoResult:
    ok: bool
    worst_phi: float
    worst_arcs: int
    worst_mu: tuple[float, float]
    gram_det: float

    def __bool__(self) -> bool:
        return self.ok


def count_nonnegative_arcs(values, tol: float = 0.0) -> int:
    """Number of maximal cyclic runs with ``values >= -tol``."""
    pos = np.asarray(values) >= -tol
    if pos.all():
        return 1
    if not pos.any():
        return 0
    return int(np.sum(pos & ~np.roll(pos, 1)))


def check_seo_condition(f1, f2, resolution: int = 720, grid: int = 4096) -> SeoResult:
    """Check that ``{mu1 f1 + mu2 f2 >= 0}`` is one arc for every direction ``mu``.

    The direction angle sweeps a full turn in ``resolution`` steps (a
    half-turn would only test ``mu`` up to sign, and the nonnegativity set of
    ``-f`` is the closure of the complement of that of ``f``).
    """
    f1, f2 = make_current(f1), make_current(f2)
    theta = TWO_PI * (np.arange(grid) + 0.5) / grid
    a, b = f1(theta), f2(theta)
    w = TWO_PI / grid
    g11, g22, g12 = w * a @ a, w * b @ b, w * a @ b
    det = g11 * g22 - g12 * g12
    if det <= 1e-10 * g11 * g22:
        raise DegeneracyError("probing currents are linearly dependent")
    worst = (-1, 0.0)
    for phi in TWO_PI * np.arange(resolution) / resolution:
        f = math.cos(phi) * a + math.sin(phi) * b
        arcs = count_nonnegative_arcs(f, 1e-12 * float(np.max(np.abs(f))))
        if arcs > worst[0]:
            worst = (arcs, float(phi))
    arcs, phi = worst
    return SeoResult(arcs <= 1, phi, arcs, (math.cos(phi), math.sin(phi)), float(det))
