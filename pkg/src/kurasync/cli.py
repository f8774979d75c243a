"""Command-line runner: ``kurasync run CONFIG`` and ``kurasync validate CONFIG``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import certificates as cert
from . import simulate as sim
from .config import ExperimentConfig, dump_config, load_config, resolve, validate_text
from .equilibrium import equilibrium_report, solve_power_flow
from .errors import ConfigError, KurasyncError

log = logging.getLogger("kurasync")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir: Path, base_dir=None, seed: int | None = None) -> dict:
    """Executes a validated config and writes all artifacts; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if seed is not None and cfg.disturbance is not None:
        cfg = replace(cfg, disturbance=replace(cfg.disturbance, seed=seed))
    res = resolve(cfg, base_dir, seed)
    net = res.net
    (out_dir / "config.resolved.yaml").write_text(dump_config(cfg))
    log.info("network: n=%d, %d lines, d=%s", net.n, net.m, np.round(net.d_array, 4).tolist())

    eq = solve_power_flow(net, res.p_o, res.reference_node, res.reference_angle)
    eq_doc = equilibrium_report(eq)
    eq_doc["d"] = list(net.d)
    _write_json(out_dir / "equilibrium.json", eq_doc)
    if not eq.secure:
        log.warning("equilibrium has a line at or beyond pi/2")

    dist = cfg.disturbance
    bound = cert.DisturbanceBound.zero()
    if dist is not None and dist.p_d > 0:
        bound = cert.DisturbanceBound(dist.p_d, tuple(b - 1 for b in dist.buses))

    summary = {"d_seed": res.d_seed, "certificates": {}}
    reports = {}
    for name in cfg.certificates:
        if name == "I":
            r = cert.criterion_I(net, eq, bound)
        elif name == "I-original":
            r = cert.criterion_I_original(net, bound)
        elif name == "II":
            r = cert.criterion_II(net, eq, bound)
        elif name == "roa_I":
            r = cert.roa_I(net, eq)
        else:
            r = cert.roa_II(net, eq)
        reports[name] = r
        doc = r.as_dict()
        _write_json(out_dir / f"certificate_{name}.json", doc)
        if isinstance(r, cert.CertificateReport):
            summary["certificates"][name] = {"passed": r.passed, "lambda": r.lambda_value, "lambda_cr": r.lambda_cr}
            log.info("criterion %s: lambda=%.4f lambda_cr=%.4f %s", name, r.lambda_value, r.lambda_cr, "pass" if r.passed else "fail")
        else:
            summary["certificates"][name] = {"gamma_r": r.gamma_r, "f_r_max": r.f_r_max}
            log.info("%s: gamma_r=%.4f", name, r.gamma_r)

    every = cfg.output.csv_every
    h, horizon = cfg.sim.step, cfg.sim.horizon
    if dist is not None:
        spec = sim.DisturbanceSpec(tuple(b - 1 for b in dist.buses), dist.p_d, dist.hold_interval, dist.seed, dist.start_time)
        certified = next((reports[k] for k in ("I", "II") if k in reports and reports[k].passed), None)
        traj, rep = sim.run_disturbance_scenario(net, eq, spec, horizon, h, certificate=certified)
        summary["disturbance"] = rep.as_dict()
        if certified is not None:
            summary["disturbance"]["certificate"] = certified.criterion
        if traj is not None:
            sim.write_trajectory_csv(out_dir / "trajectory_disturbance.csv", traj, net, eq, every)
            sim.write_long_csv(out_dir / "trajectory_disturbance_long.csv", traj, net, eq, max(every, 10))
            sim.write_events(out_dir / "events_disturbance.json", traj)

    if cfg.trip is not None:
        i, j = cfg.trip.line
        trip = sim.TripSpec((i - 1, j - 1), cfg.trip.time, cfg.trip.reclose, cfg.trip.reclose_time)
        traj, rep = sim.run_line_trip_scenario(net, eq, trip, cert.roa_I(net, eq), cert.roa_II(net, eq), horizon, h)
        summary["line_trip"] = rep.as_dict()
        log.info("line trip: T1=%s T2=%s reclose=%s", rep.T1, rep.T2, rep.reclose_time)
        sim.write_trajectory_csv(out_dir / "trajectory_trip.csv", traj, net, eq, every)
        sim.write_long_csv(out_dir / "trajectory_trip_long.csv", traj, net, eq, max(every, 10))
        sim.write_events(out_dir / "events_trip.json", traj)

    _write_json(out_dir / "summary.json", summary)
    return summary


def _cmd_validate(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate_text(text, base_dir=path.parent)
    for d in diags:
        print(f"{path}:{d}", file=sys.stderr)
    if not diags:
        print(f"{path}: ok")
    return EXIT_CONFIG if diags else EXIT_OK


def _cmd_run(args) -> int:
    path = Path(args.config)
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"{path}:{d}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.output.directory)
    try:
        summary = run_experiment(cfg, out, base_dir=path.parent, seed=args.seed)
    except KurasyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(json.dumps(_jsonable(summary), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
    parser = argparse.ArgumentParser(prog="kurasync", description=__doc__)
    parser.add_argument("--log-level", default="WARNING", choices=levels)
    # accepted after the subcommand as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=levels)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run an experiment config and write artifacts")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--seed", type=int, help="override the d seed and the disturbance seed")
    run.set_defaults(func=_cmd_run)
    val = sub.add_parser("validate", parents=[common], help="check a config without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
