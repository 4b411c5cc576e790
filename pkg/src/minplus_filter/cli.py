"""Command-line front end: run a scenario, write trace/report files, certify.

Exit codes: 0 success, 1 a certificate failed, 2 invalid configuration,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_scenario
from .errors import ConfigError, NotStrictlyConvex, OracleNonConvergence, OracleRangeError, SequencingError
from .filter import new_filter, run
from .oracle import certify
from .simulator import MeasurementTrace, open_loop_prior, simulate
from .value import PruneConfig

log = logging.getLogger("minplus_filter")

NUMERIC_ERRORS = (NotStrictlyConvex, np.linalg.LinAlgError, FloatingPointError, SequencingError, OracleNonConvergence, OracleRangeError)


def fmt(v) -> str:
    return format(float(v), ".17g")


def trace_header(n: int, sensor_dims) -> list:
    def cols(name, d):
        return [name] if d == 1 else [f"{name}_{i}" for i in range(1, d + 1)]

    header = ["k"] + cols("x_true", n) + cols("x_est", n)
    header += ["err", "active_sensor", "v_min", "terms_pre", "terms_post"]
    for j, m in enumerate(sensor_dims, 1):
        header += cols(f"y_{j}", m)
    return header


def write_trace_csv(path, trace: MeasurementTrace, reports) -> None:
    n = trace.x_true.shape[1]
    dims = [len(y) for y in trace.frames[0].y] if trace.frames else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(n, dims))
        for frame, rep in zip(trace.frames, reports):
            x_true = trace.x_true[rep.k]
            row = [rep.k] + [fmt(v) for v in x_true] + [fmt(v) for v in rep.x_est]
            row += [fmt(np.linalg.norm(rep.x_est - x_true)), rep.active_sensor, fmt(rep.v_min)]
            row += [rep.term_count_pre_prune, rep.term_count_post_prune]
            for y in frame.y:
                row += [fmt(v) for v in y]
            w.writerow(row)


def read_trace_csv(path) -> list[dict]:
    """Parse a trace file back into typed rows (ints for counts and sensors)."""
    ints = {"k", "active_sensor", "terms_pre", "terms_post"}
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {key: int(val) if key in ints else float(val) for key, val in row.items()}
            for row in csv.DictReader(fh)
        ]


def summarize(scenario: ScenarioConfig, trace: MeasurementTrace, reports) -> dict:
    prior = open_loop_prior(scenario)
    final = reports[-1]
    err = float(np.linalg.norm(final.x_est - trace.x_true[final.k]))
    prior_err = float(np.linalg.norm(prior[final.k] - trace.x_true[final.k]))
    return {
        "active_sensors": [r.active_sensor for r in reports],
        "terminal_error": err,
        "open_loop_prior_terminal_error": prior_err,
        "estimate_beats_prior": err < prior_err,
        "errors": [float(np.linalg.norm(r.x_est - trace.x_true[r.k])) for r in reports],
    }


def run_scenario(config_path, out_dir, seed=None, do_certify=False, prune=None, horizon=3) -> int:
    try:
        scenario = load_scenario(config_path)
    except ConfigError as exc:
        log.error("%s: %s", config_path, exc)
        return 2
    except OSError as exc:
        log.error("cannot read %s: %s", config_path, exc)
        return 2
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if prune is not None:
        overrides["prune"] = prune
    if overrides:
        scenario = scenario.with_overrides(**overrides)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        trace = simulate(scenario)
        state = new_filter(scenario.system, scenario.sensors, scenario.L, scenario.x0_assumed, scenario.prune)
        reports = run(state, trace)
        certs = certify(scenario, horizon=horizon) if do_certify else []
    except NUMERIC_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return 3

    write_trace_csv(out / "trace.csv", trace, reports)
    report = {
        "scenario": scenario.raw,
        "reports": [r.to_dict() for r in reports],
        "x_true": trace.x_true.tolist(),
        "summary": summarize(scenario, trace, reports),
    }
    if do_certify:
        report["certificates"] = [c.to_dict() for c in certs]
    (out / "report.json").write_text(json.dumps(report, indent=2, default=float) + "\n", encoding="utf-8")

    s = report["summary"]
    log.info("%s: sensors %s, terminal error %.4g (open-loop prior %.4g)", scenario.name, s["active_sensors"], s["terminal_error"], s["open_loop_prior_terminal_error"])
    for c in certs:
        log.info("certificate %-24s %s  max error %.3e (tol %.0e)", c.name, "PASS" if c.passed else "FAIL", c.max_error, c.tolerance)
    return 0 if all(c.passed for c in certs) else 1


def certify_command(config_path, horizon=3, as_json=False) -> int:
    try:
        scenario = load_scenario(config_path)
    except (ConfigError, OSError) as exc:
        log.error("%s: %s", config_path, exc)
        return 2
    try:
        certs = certify(scenario, horizon=horizon)
    except NUMERIC_ERRORS as exc:
        log.error("oracle failure: %s", exc)
        return 3
    if as_json:
        print(json.dumps([c.to_dict() for c in certs], indent=2, default=float))
    else:
        for c in certs:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24} max error {c.max_error:.3e}  tol {c.tolerance:.0e}")
    return 0 if all(c.passed for c in certs) else 1


def _prune_arg(text):
    try:
        return PruneConfig.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minplus-filter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and run the filter")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--certify", action="store_true", help="also run the oracle certificates")
    r.add_argument("--prune", type=_prune_arg, help="exact | cap:N | off")
    r.add_argument("--quiet", action="store_true")

    c = sub.add_parser("certify", help="run the oracle certificates on a scenario")
    c.add_argument("--config", required=True, type=Path)
    c.add_argument("--horizon", type=int, default=3)
    c.add_argument("--json", action="store_true")
    c.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.command == "run":
        return run_scenario(args.config, args.out, args.seed, args.certify, args.prune)
    return certify_command(args.config, args.horizon, args.json)


if __name__ == "__main__":
    sys.exit(main())
