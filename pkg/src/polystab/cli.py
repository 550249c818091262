"""Command line interface: ``polystab <subcommand> ...``.

Exit codes: 0 success, 1 domain or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .corner import corner_exponents, lambda_of_k
from .currents import check_seo_condition, make_current, parse_currents
from .exceptions import ConfigError, DomainError, NumericError, PolystabError
from .forward import Discretization, ForwardSystem, check_conductivity
from .geometry import AdmissibleClassParams, Polygon, polygon_metric, random_perturbation
from .inversion import ReconstructionConfig, add_noise, data_discretization, forward_traces, lipschitz_experiment, reconstruct
from .shape import assemble_jacobian, injectivity_margin

CURRENT_HELP = (
    "current spec: terms 'cos:m[:amp]', 'sin:m[:amp]' or 'pw:v1,v2,...' (values on equal arcs), "
    "summed with '+', e.g. 'cos:1+sin:2:0.5'"
)
CURRENTS_HELP = (
    "list of currents: a comma before cos:/sin:/pw: starts the next current, numbers after pw: "
    "belong to it; ';' also separates currents, e.g. 'cos:1,sin:1'"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("POLYSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"POLYSTAB_THREADS must be an integer, got {env!r}") from exc
    return 1


def _add_disc(p):
    d = Discretization()
    p.add_argument("--panels", type=int, default=d.panels_per_edge, help="panels per polygon edge")
    p.add_argument("--grading", type=float, default=d.grading, help="grading exponent toward vertices")
    p.add_argument("--order", type=int, default=d.order, help="Gauss-Legendre nodes per panel")
    p.add_argument("--nodes", type=int, default=d.boundary_nodes, help="nodes on the outer boundary")


def _disc(args) -> Discretization:
    return Discretization(args.panels, args.grading, args.order, args.nodes)


def _disc_from(block: dict | None) -> Discretization:
    block = dict(block or {})
    allowed = set(Discretization().to_dict())
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown discretization keys: {sorted(unknown)}")
    return Discretization(**block)


def _k_arg(text: str):
    return None if text.lower() == "insulating" else float(text)


def _file_config(args, keys, files=()) -> dict:
    cfg = {k: getattr(args, k) for k in keys}
    cfg["command"] = args.command
    for name in files:
        path = getattr(args, name)
        cfg[f"{name}_sha256"] = pio.file_digest(path) if path and Path(path).is_file() else None
    return cfg


def _emit(line: str):
    print(line)


# subcommands --------------------------------------------------------------


def cmd_exponents(args) -> int:
    if args.k is None and args.lam is None:
        raise ConfigError("give --k or --lambda")
    lam = lambda_of_k(args.k) if args.lam is None else float(args.lam)
    spec = corner_exponents(args.alpha, lam, args.count)
    chash = pio.config_hash(_file_config(args, ["alpha", "k", "lam", "count"]))
    rows = [(j + 1, float(g), float(r), int(t)) for j, (g, r, t) in
            enumerate(zip(spec.exponents, spec.residuals, spec.tangential))]
    text = pio.csv_text(["index", "gamma", "residual", "tangential"], rows, chash)
    if args.out:
        pio.write_atomic(args.out, text)
        _emit(f"exponents: {', '.join(pio.fmt(float(g)) for g in spec.exponents)} -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_seo_check(args) -> int:
    currents = parse_currents(args.currents)
    if len(currents) != 2:
        raise ConfigError(f"seo-check needs exactly two currents, got {len(currents)}")
    res = check_seo_condition(currents[0], currents[1], resolution=args.resolution)
    _emit(f"seo_ok={'true' if res.ok else 'false'} worst_phi={pio.fmt(res.worst_phi)} "
          f"arcs={res.worst_arcs} mu=({pio.fmt(res.worst_mu[0])},{pio.fmt(res.worst_mu[1])})")
    if args.out:
        chash = pio.config_hash(_file_config(args, ["currents", "resolution"]))
        pio.write_json(args.out, {"seo_ok": res.ok, "worst_phi": res.worst_phi, "worst_arcs": res.worst_arcs,
                                  "worst_mu": list(res.worst_mu), "gram_det": res.gram_det}, chash)
    return 0


def cmd_forward(args) -> int:
    boundary = pio.load_domain(args.domain)
    polygon = pio.load_polygon(args.polygon)
    k = _k_arg(args.k)
    system = ForwardSystem(boundary, polygon, k, _disc(args))
    sol = system.solve(make_current(args.current))
    tr = sol.trace
    chash = pio.config_hash(_file_config(args, ["k", "current", "panels", "grading", "order", "nodes"],
                                         ["domain", "polygon"]))
    rows = [(float(t), float(u), float(w)) for t, u, w in zip(tr.theta, tr.values, tr.weights)]
    pio.write_csv(args.out, ["theta", "u", "weight"], rows, chash)
    _emit(f"forward: {tr.values.size} nodes, trace norm {pio.fmt(tr.norm())}, residual {sol.residual:.2e} -> {args.out}")
    return 0


def cmd_jacobian(args) -> int:
    boundary = pio.load_domain(args.domain)
    polygon = pio.load_polygon(args.polygon)
    k = _k_arg(args.k)
    currents = parse_currents(args.currents)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        J = assemble_jacobian(boundary, polygon, k, currents, _disc(args), threads=_threads(args))
    m = injectivity_margin(J)
    chash = pio.config_hash(_file_config(args, ["k", "currents", "panels", "grading", "order", "nodes"],
                                         ["domain", "polygon"]))
    pio.write_json(args.out, {
        "sigma_min": m.sigma_min,
        "singular_values": m.singular_values,
        "worst_direction": m.direction.displacements,
        "seo_ok": J.seo_ok,
        "shape": list(J.matrix.shape),
    }, chash)
    _emit(f"jacobian: sigma_min={pio.fmt(m.sigma_min)} seo_ok={J.seo_ok} -> {args.out}")
    return 0


def _resolve(base: Path, value):
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _polygon_entry(base: Path, entry) -> Polygon:
    if isinstance(entry, str):
        return pio.load_polygon(_resolve(base, entry))
    return pio.polygon_from_data(entry)


def _outputs(cfg: dict, base: Path, defaults: dict) -> dict:
    out = dict(defaults)
    out.update(cfg.get("outputs", {}))
    return {k: _resolve(base, v) for k, v in out.items() if v}


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _config_k(cfg: dict):
    if "k" in cfg and cfg.get("insulating"):
        raise ConfigError("give exactly one of 'k' and 'insulating'")
    if cfg.get("insulating") or cfg.get("k") == "insulating":
        return None
    return check_conductivity(_require(cfg, "k"))


def _load_config(path):
    cfg = pio.read_json(path)
    base = Path(path).resolve().parent
    domain = cfg.get("domain")
    if isinstance(domain, str):
        boundary = pio.load_domain(_resolve(base, domain))
    elif isinstance(domain, dict):
        from .geometry import DomainBoundary

        boundary = DomainBoundary.from_dict(domain)
    else:
        boundary = pio.load_domain(None)
    return cfg, base, boundary


def cmd_reconstruct(args) -> int:
    cfg, base, boundary = _load_config(args.config)
    chash = pio.config_hash(cfg)
    k = _config_k(cfg)
    currents = parse_currents(cfg["currents"]) if isinstance(cfg.get("currents"), str) else \
        [make_current(c) for c in cfg.get("currents", ["cos:1", "sin:1"])]
    disc = _disc_from(cfg.get("discretization"))
    rblock = dict(cfg.get("reconstruction", {}))
    if "noise" in cfg:
        rblock.setdefault("noise", cfg["noise"])
    rcfg = ReconstructionConfig(**rblock)
    seed = cfg.get("seed")
    truth = _polygon_entry(base, cfg["truth"]) if "truth" in cfg else None
    if truth is not None:
        measured = forward_traces(boundary, truth, k, currents, data_discretization(disc))
        if rcfg.noise > 0:
            if seed is None:
                raise ConfigError("a seed is required for noisy synthetic data")
            measured = add_noise(measured, rcfg.noise, seed)
    elif "measured" in cfg:
        measured = _load_measured(_resolve(base, cfg["measured"]), len(currents), disc.boundary_nodes)
    else:
        raise ConfigError("config needs 'truth' (synthetic data) or 'measured' (trace CSV)")
    if "initial" in cfg:
        initial = _polygon_entry(base, cfg["initial"])
    elif truth is not None and "initial_perturbation" in cfg:
        if seed is None:
            raise ConfigError("a seed is required for a random initial perturbation")
        rng = np.random.default_rng([int(seed), 1])
        initial = truth.perturbed(random_perturbation(truth.n, float(cfg["initial_perturbation"]), rng).displacements)
    else:
        raise ConfigError("config needs 'initial' or 'initial_perturbation'")
    result = reconstruct(boundary, k, currents, measured, initial, rcfg, disc)
    outs = _outputs(cfg, base, {"log": "reconstruct_log.csv", "report": "reconstruct_report.json",
                                "svg": "reconstruct.svg"})
    rows = [(r.iteration, r.residual, r.sigma_min, r.step_d) for r in result.log]
    pio.write_csv(outs["log"], ["iter", "residual", "sigma_min", "step_d"], rows, chash)
    report = {
        "converged": result.converged,
        "stagnated": result.stagnated,
        "message": result.message,
        "iterations": result.iterations,
        "residual": result.residual,
        "recovered": result.polygon.vertices,
        "initial": initial.vertices,
    }
    polys = {"initial": initial, "recovered": result.polygon}
    if truth is not None:
        report["truth"] = truth.vertices
        report["error_d"] = polygon_metric(result.polygon, truth) if truth.n == result.polygon.n else None
        polys = {"truth": truth, **polys}
    pio.write_json(outs["report"], report, chash)
    pio.write_svg(outs["svg"], polys, boundary, chash)
    extra = f" error_d={pio.fmt(report['error_d'])}" if report.get("error_d") is not None else ""
    _emit(f"reconstruct: {result.message} after {result.iterations} iterations, "
          f"residual={pio.fmt(result.residual)}{extra} -> {outs['report']}")
    return 0


def _load_measured(path, n_currents: int, n_nodes: int):
    import csv

    text = Path(path).read_text() if Path(path).is_file() else None
    if text is None:
        raise ConfigError(f"file not found: {path}")
    rows = [r for r in csv.reader(text.splitlines()) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body])
    cols = [i for i, h in enumerate(header) if h.startswith("u")]
    if len(cols) != n_currents or data.shape[0] != n_nodes:
        raise ConfigError(f"{path}: expected {n_currents} 'u' columns and {n_nodes} rows")
    return [data[:, i] for i in cols]


def cmd_lipschitz(args) -> int:
    cfg, base, boundary = _load_config(args.config)
    chash = pio.config_hash(cfg)
    k = _config_k(cfg)
    currents = parse_currents(cfg["currents"]) if isinstance(cfg.get("currents"), str) else \
        [make_current(c) for c in cfg.get("currents", ["cos:1", "sin:1"])]
    if "seed" not in cfg:
        raise ConfigError("config is missing required key 'seed'")
    params = AdmissibleClassParams(int(cfg.get("n", 3)), float(cfg.get("delta", 0.1)))
    disc = _disc_from(cfg.get("discretization"))
    modes = cfg.get("pairing", ["near", "independent"])
    modes = [modes] if isinstance(modes, str) else modes
    pairs = int(cfg.get("pairs", 200))
    reports = {}
    for mode in modes:
        reports[mode] = lipschitz_experiment(boundary, k, currents, params, pairs, mode, cfg["seed"], disc,
                                             threads=_threads(args), max_vertices=cfg.get("max_vertices"))
    outs = _outputs(cfg, base, {"report": "lipschitz_report.json", "samples": "lipschitz_samples.csv"})
    all_samples = [s for r in reports.values() for s in r.samples]
    ratios = np.array([s.ratio for s in all_samples])
    summary = {
        "max_ratio": float(ratios.max()) if ratios.size else math.nan,
        "quantiles": {f"q{q}": float(np.quantile(ratios, q / 100)) for q in (50, 90, 99)} if ratios.size else {},
        "samples": len(all_samples),
        "modes": {m: r.to_dict() for m, r in reports.items()},
    }
    pio.write_json(outs["report"], summary, chash)
    rows = [(s.mode, s.seed, s.n[0], s.n[1], s.distance, s.trace_distance, s.ratio, s.hausdorff,
             "" if s.linearized_ratio is None else s.linearized_ratio) for s in all_samples]
    pio.write_csv(outs["samples"], ["mode", "seed", "n1", "n2", "distance", "trace_distance", "ratio", "hausdorff",
                                    "linearized_ratio"], rows, chash)
    _emit(f"lipschitz: {len(all_samples)} pairs, max_ratio={pio.fmt(summary['max_ratio'])} -> {outs['report']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polystab", description="Stability experiments for polygonal conductivity inclusions.")
    p.add_argument("--version", action="version", version=f"polystab {__version__}")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $POLYSTAB_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="command")

    e = sub.add_parser("exponents", help="corner exponents for one angle")
    e.add_argument("--alpha", type=float, required=True, help="interior angle in radians")
    e.add_argument("--k", type=float, help="inclusion conductivity")
    e.add_argument("--lambda", dest="lam", type=float, help="amplitude |(k+1)/(k-1)| instead of --k")
    e.add_argument("--count", type=int, default=2)
    e.add_argument("--out", help="CSV path (default: stdout)")
    e.set_defaults(func=cmd_exponents)

    s = sub.add_parser("seo-check", help="connectivity condition for a current pair",
                       epilog=CURRENTS_HELP)
    s.add_argument("--currents", required=True, help=CURRENTS_HELP)
    s.add_argument("--resolution", type=int, default=720, help="directions in the full-turn sweep")
    s.add_argument("--out", help="optional JSON report")
    s.set_defaults(func=cmd_seo_check)

    f = sub.add_parser("forward", help="boundary trace for one current", epilog=CURRENT_HELP)
    f.add_argument("--domain", help="domain JSON (default: unit circle)")
    f.add_argument("--polygon", required=True)
    f.add_argument("--k", required=True, help="conductivity or 'insulating'")
    f.add_argument("--current", required=True, help=CURRENT_HELP)
    f.add_argument("--out", required=True)
    _add_disc(f)
    f.set_defaults(func=cmd_forward)

    j = sub.add_parser("jacobian", help="shape Jacobian and its smallest singular value", epilog=CURRENTS_HELP)
    j.add_argument("--domain", help="domain JSON (default: unit circle)")
    j.add_argument("--polygon", required=True)
    j.add_argument("--k", required=True, help="conductivity or 'insulating'")
    j.add_argument("--currents", required=True, help=CURRENTS_HELP)
    j.add_argument("--out", required=True)
    _add_disc(j)
    j.set_defaults(func=cmd_jacobian)

    r = sub.add_parser("reconstruct", help="Levenberg-Marquardt vertex reconstruction")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_reconstruct)

    lp = sub.add_parser("lipschitz", help="empirical Lipschitz ratios over random pairs")
    lp.add_argument("--config", required=True)
    lp.set_defaults(func=cmd_lipschitz)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"polystab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        print(f"polystab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except PolystabError as exc:
        print(f"polystab {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"polystab {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
