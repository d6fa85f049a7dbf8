"""Command-line front end.

Every subcommand prints one JSON document on stdout.  Exit codes:
0 success, 1 bad input or I/O failure, 2 infeasible design, 3 divergence,
4 a requested monitor failed.
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import dataclasses
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from .design import compute_certificate
from .errors import InfeasibleDesignError, QSwitchError, ScenarioError
from .monitor import monitor_invariants
from .plant import generate_adt_signal
from .scenario import (load_bundled, load_scenario, parse_json, scenario_from_document,
                       scenario_to_document)
from .simulator import simulate

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_DIVERGED, EXIT_MONITOR = 0, 1, 2, 3, 4

# Constants printed for the bundled two-mode benchmark.
PUBLISHED = {"T": 0.6025, "Omega": 0.9063, "c": 1.9867, "tau_a_min": 2.0744}

log = logging.getLogger("qswitch")


def _emit(obj, stream=None):
    json.dump(obj, stream or sys.stdout, indent=2, allow_nan=False, default=_jsonable)
    (stream or sys.stdout).write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _error(code, kind, message, **extra):
    _emit({"status": "error", "error": kind, "message": message, **extra})
    return code


def _infeasible(exc):
    return _error(EXIT_INFEASIBLE, "infeasible", str(exc), violations=exc.violations,
                  minimum_M=exc.minimum_M)


def _table(cert):
    rows = [("T", cert.T), ("Omega", cert.Omega), ("c", cert.c), ("tau_a_min", cert.tau_a_min),
            ("Theta", cert.Theta), ("lambda_P_max", cert.lambda_P_max),
            ("lambda_P_min", cert.lambda_P_min), ("lambda_Q_min", cert.lambda_Q_min),
            ("C_max", cert.C_max), ("Gamma", cert.Gamma), ("Lambda", cert.Lambda), ("N", cert.N)]
    rows += [(f"c[{p1}->{p2}]", v) for (p2, p1), v in cert.c_pairs.items()]
    return "\n".join(f"{k:>14}  {v:.10g}" for k, v in rows)


def cmd_certificate(args):
    sc = load_scenario(args.file)
    cert = compute_certificate(sc.inputs)
    print(_table(cert), file=sys.stderr)
    _emit({"status": "ok", "certificate": cert.to_dict()})
    return EXIT_OK


def _override(sc, h=None, horizon=None):
    changes = {}
    if h is not None:
        changes["h"] = h
    if horizon is not None:
        changes["horizon"] = horizon
    return dataclasses.replace(sc, **changes) if changes else sc


def _summary(traj):
    zn = traj.z_norm
    out = {"steps": len(traj) - 1, "h": traj.h, "t_final": float(traj.t[-1]),
           "capture_time": traj.capture_time, "diverged": traj.diverged,
           "z_final": float(zn[-1]), "mu_final": float(traj.mu[-1])}
    if traj.capture_index is not None:
        out["z_capture"] = float(zn[traj.capture_index])
    if traj.diagnostic:
        out["diagnostic"] = traj.diagnostic
    return out


def run_one(path, out, monitor=False, h=None, horizon=None):
    """Simulate one scenario file; returns ``(exit_code, json_summary)``."""
    try:
        sc = _override(load_scenario(path), h, horizon)
        cert = compute_certificate(sc.inputs)
    except InfeasibleDesignError as exc:
        return EXIT_INFEASIBLE, {"file": str(path), "status": "error", "error": "infeasible",
                                 "message": str(exc), "violations": exc.violations,
                                 "minimum_M": exc.minimum_M}
    except (QSwitchError, ValueError) as exc:
        return EXIT_INPUT, {"file": str(path), "status": "error", "error": "input", "message": str(exc)}
    traj = simulate(sc, cert)
    out = Path(out)
    result = {"file": str(path), "csv": str(out), "events_csv": str(out.with_suffix(".events.csv")),
              **_summary(traj)}
    try:
        with open(out, "w", newline="") as fh:
            traj.write_csv(fh)
        with open(out.with_suffix(".events.csv"), "w", newline="") as fh:
            traj.write_events_csv(fh)
        code = EXIT_DIVERGED if traj.diverged else EXIT_OK
        if monitor:
            report = monitor_invariants(traj, cert, sc.inputs, sc.grid_signal())
            rpath = out.with_suffix(".report.json")
            with open(rpath, "w") as fh:
                _emit(report.to_dict(), fh)
            result["report"] = str(rpath)
            result["monitors"] = {k: r.passed for k, r in report.results.items()}
            result["failing"] = report.failing()
            if code == EXIT_OK and not report.passed:
                code = EXIT_MONITOR
    except OSError as exc:
        return EXIT_INPUT, {"file": str(path), "status": "error", "error": "io",
                            "message": f"cannot write output: {exc.strerror}"}
    result["status"] = {EXIT_OK: "ok", EXIT_DIVERGED: "diverged", EXIT_MONITOR: "monitor_failed"}[code]
    return code, result


def cmd_simulate(args):
    files = args.files
    if len(files) == 1:
        outs = [args.out or Path(files[0]).with_suffix(".csv").name]
    else:
        outdir = Path(args.out or ".")
        outs = [outdir / Path(f).with_suffix(".csv").name for f in files]
    jobs = [(f, o, args.monitor, args.h, args.horizon) for f, o in zip(files, outs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_packed, jobs))
    else:
        results = [run_one(*j) for j in jobs]
    code = max(c for c, _ in results)
    if len(results) == 1:
        _emit(results[0][1])
    else:
        _emit({"status": "ok" if code == 0 else "error", "runs": [r for _, r in results]})
    return code


def _run_packed(job):
    return run_one(*job)


def _rel(a, b):
    return abs(a - b) / abs(b)


def cmd_reproduce(args):
    outdir = Path(args.outdir)
    sc = load_bundled()
    cert = compute_certificate(sc.inputs)
    traj = simulate(sc, cert)
    report = monitor_invariants(traj, cert, sc.inputs, sc.grid_signal())
    computed = {"T": cert.T, "Omega": cert.Omega, "c": cert.c, "tau_a_min": cert.tau_a_min}
    constants = {k: {"computed": computed[k], "published": v, "rel_error": _rel(computed[k], v)}
                 for k, v in PUBLISHED.items()}
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        series = outdir / "figure_series.csv"
        with open(series, "w") as fh:
            fh.write("t,x_norm,xi_norm,mu\n")
            xn = np.linalg.norm(traj.x, axis=1)
            xin = np.linalg.norm(traj.xi, axis=1)
            for row in zip(traj.t, xn, xin, traj.mu):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        full = outdir / "trajectory.csv"
        with open(full, "w", newline="") as fh:
            traj.write_csv(fh)
    except OSError as exc:
        return _error(EXIT_INPUT, "io", f"cannot write to {outdir}: {exc.strerror}")
    for k, v in constants.items():
        print(f"{k:>10}  computed {v['computed']:.6g}  published {v['published']:.6g}  "
              f"rel.err {v['rel_error']:.2%}", file=sys.stderr)
    print(f"capture time {traj.capture_time:g}", file=sys.stderr)
    ok = all(v["rel_error"] <= 0.02 for v in constants.values()) and not traj.diverged
    _emit({"status": "ok" if ok else "mismatch", "constants": constants, **_summary(traj),
           "monitors": report.to_dict(), "series_csv": str(series), "trajectory_csv": str(full)})
    if traj.diverged:
        return EXIT_DIVERGED
    return EXIT_OK if ok else EXIT_MONITOR


def cmd_gen_signal(args):
    doc = parse_json(_read(args.file), args.file)
    sc = scenario_from_document(doc)
    gen = doc["signal"].get("generate") or {"tau_a": sc.inputs.tau_a, "N0": sc.inputs.N0,
                                            "horizon": sc.horizon}
    signal = generate_adt_signal(sc.plant.mode_ids, gen["N0"], gen["tau_a"], gen["horizon"],
                                 args.seed, grid=sc.h)
    sc = dataclasses.replace(sc, signal=signal, signal_spec=None, seed=args.seed)
    _emit(scenario_to_document(sc))
    return EXIT_OK


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="qswitch",
                                 description="Quantized output feedback for switched linear systems")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certificate", help="compute and print the design certificate")
    p.add_argument("file")
    p.set_defaults(func=cmd_certificate)

    p = sub.add_parser("simulate", help="simulate one or more scenario files")
    p.add_argument("files", nargs="+", metavar="file")
    p.add_argument("--out", help="CSV path (one file) or output directory (several files)")
    p.add_argument("--monitor", action="store_true", help="run the invariant monitors")
    p.add_argument("--h", type=float, help="override the step size")
    p.add_argument("--horizon", type=float, help="override the horizon")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for several files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-paper", help="run the bundled two-mode benchmark")
    p.add_argument("--outdir", default="reproduction")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("gen-signal", help="replace the signal with a random ADT-compliant one")
    p.add_argument("file")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_gen_signal)
    return ap


def main(argv=None):
    level = os.environ.get("QSWITCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            return EXIT_OK
        return _error(EXIT_INPUT, "usage", "invalid command line")
    try:
        return args.func(args)
    except InfeasibleDesignError as exc:
        return _infeasible(exc)
    except ScenarioError as exc:
        return _error(EXIT_INPUT, "input", str(exc))
    except (QSwitchError, ValueError) as exc:
        return _error(EXIT_INPUT, "input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
