"""Command-line surface: derive, simulate, sweep, critical.

Exit codes form a stable contract:
  0   success (simulate: bounded)
  10  simulate classified the run unbounded
  11  simulate hit its budget first (indeterminate)
  12  numerical instability (field left its valid range)
  1   runtime failure (I/O, bracket, internal)
  2   usage or configuration error
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import random
import sys
import time

import numpy as np

from . import __version__, kernels
from .coefficients import check_cfl, derive_alpha, derive_coefficients
from .config import (RunConfig, build_run_setup, config_digest, load_config)
from .errors import (BracketError, ConfigError, NumericalInstabilityError,
                     QecHeatError, ValidationError)
from .phase import (PHASE_BOUNDED, PHASE_INDETERMINATE, PHASE_UNBOUNDED,
                    fit_zeta, run_critical, simulate_trajectory)
from .sweep import AxisSpec, SweepSpec, run_sweep

EXIT_OK = 0
EXIT_UNBOUNDED = 10
EXIT_INDETERMINATE = 11
EXIT_UNSTABLE = 12
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_PHASE_EXITS = {PHASE_BOUNDED: EXIT_OK, PHASE_UNBOUNDED: EXIT_UNBOUNDED,
                PHASE_INDETERMINATE: EXIT_INDETERMINATE}


@contextlib.contextmanager
def _entropy_guard(enabled: bool):
    """With --seedless-deterministic, fail if any RNG was consulted."""
    if not enabled:
        yield
        return
    py_state = random.getstate()
    np_state = np.random.get_state()
    yield
    same_np = all(
        np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
        for a, b in zip(np_state, np.random.get_state()))
    if random.getstate() != py_state or not same_np:
        raise QecHeatError(
            "entropy source consumed during a seedless-deterministic run")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(args) -> RunConfig:
    return load_config(args.config, args.set or ())


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_derive(args) -> int:
    t0 = time.perf_counter()
    cfg = _load(args)
    phys = cfg.physical
    coeffs = derive_coefficients(phys)
    cfl = check_cfl(phys)
    a_on = derive_alpha(phys.n_ancilla, phys.dimension, coeffs.debye_A,
                        heating_ln2=True, end_placement=phys.end_placement)
    a_off = derive_alpha(phys.n_ancilla, phys.dimension, coeffs.debye_A,
                         heating_ln2=False, end_placement=phys.end_placement)
    report = {
        "debye_A_J_per_K4": coeffs.debye_A,
        "diffusivity_m2_per_s": coeffs.diffusivity,
        "delta": coeffs.delta,
        "gamma_K2": coeffs.gamma,
        "alpha_K3": coeffs.alpha,
        "alpha_ln2_on_K3": a_on,
        "alpha_ln2_off_K3": a_off,
        "alpha_note": (
            "alpha_ln2_off omits the ln(2) erasure-work factor and is "
            "1/ln(2) (about 1.44x) larger than alpha_ln2_on; the active "
            "value follows physical.heating_ln2"),
        "cfl_bound_s": cfl.bound,
        "cfl_time_step_s": cfl.time_step,
        "cfl_verdict": cfl.verdict,
        "config_digest": config_digest(cfg),
        "elapsed_s": time.perf_counter() - t0,
    }
    if args.format == "json":
        json.dump(_jsonable(report), sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print(f"Debye coefficient A   {coeffs.debye_A:.6e} J/K^4")
        print(f"diffusivity           {coeffs.diffusivity:.6e} m^2/s")
        print(f"diffusion number      {coeffs.delta:.6f}")
        print(f"cooling coefficient   {coeffs.gamma:.6e} K^2")
        print(f"heating coefficient   {coeffs.alpha:.6e} K^3 (active)")
        print(f"  with ln2 factor     {a_on:.6e} K^3")
        print(f"  without ln2 factor  {a_off:.6e} K^3")
        print(f"  note: {report['alpha_note']}")
        print(f"CFL bound             {cfl.bound:.6e} s "
              f"(dt = {cfl.time_step:.6e} s, verdict: {cfl.verdict})")
        print(f"elapsed               {report['elapsed_s'] * 1e3:.2f} ms")
    if args.out:
        _write_json(os.path.join(_outdir(args), "derive.json"), report)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.duration is not None:
        from dataclasses import replace
        cfg = replace(cfg, numerics=replace(cfg.numerics,
                                            max_seconds=args.duration))
    setup = build_run_setup(cfg)
    t0 = time.perf_counter()
    outcome, record = simulate_trajectory(setup, mode=args.mode)
    elapsed = time.perf_counter() - t0

    out = _outdir(args)
    traj_path = cfg.outputs.get("trajectory") or os.path.join(
        out, "trajectory.csv")
    outc_path = cfg.outputs.get("outcome") or os.path.join(
        out, "outcome.json")
    record.to_csv(traj_path)
    payload = {
        "phase": outcome.phase,
        "steady_temp_K": outcome.steady_temp,
        "tau_s": outcome.tau_s,
        "budget_spent_steps": outcome.budget_spent,
        "halt_reason": record.halt_reason,
        "diagnostics": outcome.diagnostics,
        "segments": record.segments,
        "warnings": record.warnings,
        "n_samples": record.n_samples,
        "sampling_stride": record.sampling_stride,
        "time_step_s": record.time_step,
        "mode": args.mode,
        "backend": kernels.get_backend(),
        "deterministic": True,
        "config_digest": config_digest(cfg),
        "version": __version__,
        "elapsed_s": elapsed,
    }
    _write_json(outc_path, payload)
    for w in record.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{outcome.phase}"
          + (f", steady T = {outcome.steady_temp:.6g} K"
             if outcome.steady_temp is not None else "")
          + (f", tau = {outcome.tau_s:.6g} s"
             if outcome.tau_s is not None else "")
          + f" ({outcome.budget_spent} steps, {elapsed:.1f} s wall)")
    return _PHASE_EXITS[outcome.phase]


def cmd_sweep(args) -> int:
    cfg = _load(args)
    setup = build_run_setup(cfg)
    cols = AxisSpec(name=args.axis_name, start=args.axis_start,
                    stop=args.axis_stop, count=args.axis_count,
                    scale=args.axis_scale)
    rows = None
    if args.rows:
        parts = args.rows.split(":")
        if len(parts) not in (4, 5):
            raise ConfigError(
                "--rows wants name:start:stop:count[:scale], got "
                f"{args.rows!r}")
        rows = AxisSpec(name=parts[0], start=float(parts[1]),
                        stop=float(parts[2]), count=int(parts[3]),
                        scale=parts[4] if len(parts) == 5 else "log")
    spec = SweepSpec(cols=cols, rows=rows)

    out = _outdir(args)
    journal = (args.journal or cfg.outputs.get("journal")
               or os.path.join(out, "journal.ndjson"))
    grid = run_sweep(setup, spec, mode=args.mode, workers=args.workers,
                     journal_path=journal, resume=args.resume)
    grid.to_csv(cfg.outputs.get("grid") or os.path.join(out, "grid.csv"))
    grid.to_gnuplot(cfg.outputs.get("matrix")
                    or os.path.join(out, "grid.dat"))
    grid.to_json(os.path.join(out, "grid.json"))
    n_err = sum(1 for c in grid.cells if c["phase"] == "error")
    counts = {}
    for p in grid.phases():
        counts[p] = counts.get(p, 0) + 1
    print(f"{len(grid.cells)} cells: "
          + ", ".join(f"{v} {k}" for k, v in sorted(counts.items())))
    if n_err:
        print(f"{n_err} cells failed; see grid.csv", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_critical(args) -> int:
    cfg = _load(args)
    out = _outdir(args)

    if args.synthetic_tau:
        try:
            c, zeta, gamma_c = (float(x)
                                for x in args.synthetic_tau.split(","))
        except ValueError:
            raise ConfigError("--synthetic-tau wants C,zeta,gamma_c "
                              f"(three floats), got {args.synthetic_tau!r}")
        eps = np.geomspace(args.eps_lo, args.eps_hi, args.fit_points)
        pts = [(gamma_c * (1 - float(e)), c * float(e) ** (-zeta))
               for e in eps]
        fit = fit_zeta(pts, gamma_c)
        payload = {
            "synthetic": True,
            "gamma_c": gamma_c,
            "zeta": fit.zeta,
            "zeta_stderr": fit.zeta_stderr,
            "log_prefactor": fit.log_prefactor,
            "n_points": fit.n_points,
            "version": __version__,
        }
        _write_json(os.path.join(out, "critical.json"), payload)
        print(f"synthetic fit: zeta = {fit.zeta:.9f} "
              f"(injected {zeta:.9f})")
        return EXIT_OK

    setup = build_run_setup(cfg)
    t0 = time.perf_counter()
    result = run_critical(setup, args.bracket_lo, args.bracket_hi,
                          iters=args.iters, fit_points=args.fit_points,
                          eps_lo=args.eps_lo, eps_hi=args.eps_hi,
                          mode=args.mode)
    elapsed = time.perf_counter() - t0
    payload = {
        "synthetic": False,
        "gamma_c": result.point.gamma_c,
        "gamma_c_uncertainty": result.point.uncertainty,
        "bisection_iterations": result.point.iterations,
        "audit": [(g, p) for g, p in result.point.audit],
        "zeta": result.fit.zeta,
        "zeta_stderr": result.fit.zeta_stderr,
        "log_prefactor": result.fit.log_prefactor,
        "n_points": result.fit.n_points,
        "fit_points": [(g, t) for g, t in result.fit_points],
        "config_digest": config_digest(cfg),
        "version": __version__,
        "elapsed_s": elapsed,
    }
    _write_json(os.path.join(out, "critical.json"), payload)
    print(f"gamma_c = {result.point.gamma_c:.6e} "
          f"+/- {result.point.uncertainty:.2e}, "
          f"zeta = {result.fit.zeta:.4f} +/- {result.fit.zeta_stderr:.4f} "
          f"({result.fit.n_points} points, {elapsed:.1f} s wall)")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted config override, repeatable")
    p.add_argument("--out", help="output directory (default: cwd)")
    p.add_argument("--seedless-deterministic", action="store_true",
                   help="fail if any entropy source is consulted")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qecheat",
        description="Thermal feedback simulator for error-corrected "
                    "qubit lattices")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive",
                       help="report coefficients derived from the config")
    _add_common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("simulate", help="run one operating point")
    _add_common(p)
    p.add_argument("--mode", choices=("auto", "exact", "quasilinear"),
                   default="auto")
    p.add_argument("--duration", type=float, metavar="SIM_SECONDS",
                   help="override the simulated-time budget")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="classify a coefficient grid")
    _add_common(p)
    p.add_argument("--mode", choices=("auto", "exact", "quasilinear"),
                   default="auto")
    p.add_argument("--axis-name", default="gamma",
                   choices=("alpha", "gamma", "delta"))
    p.add_argument("--axis-start", type=float, default=1e-8)
    p.add_argument("--axis-stop", type=float, default=1e-4)
    p.add_argument("--axis-count", type=int, default=20)
    p.add_argument("--axis-scale", choices=("log", "linear"), default="log")
    p.add_argument("--rows", metavar="NAME:START:STOP:COUNT[:SCALE]",
                   help="optional second axis")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--journal", help="NDJSON journal path")
    p.add_argument("--resume", action="store_true",
                   help="skip cells already in the journal")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("critical",
                       help="locate gamma_c and fit the onset exponent")
    _add_common(p)
    p.add_argument("--mode", choices=("auto", "exact", "quasilinear"),
                   default="auto")
    p.add_argument("--bracket-lo", type=float, default=1e-8)
    p.add_argument("--bracket-hi", type=float, default=1e-4)
    p.add_argument("--iters", type=int, default=24)
    p.add_argument("--fit-points", type=int, default=7)
    p.add_argument("--eps-lo", type=float, default=0.05)
    p.add_argument("--eps-hi", type=float, default=0.5)
    p.add_argument("--synthetic-tau", metavar="C,ZETA,GAMMA_C",
                   help="bypass simulation; fit a synthetic power law")
    p.set_defaults(func=cmd_critical)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _entropy_guard(args.seedless_deterministic):
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalInstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except QecHeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
