"""Parameter sweeps over the heating/cooling coefficient plane.

A sweep evaluates the phase classifier on a grid of coefficient
overrides, journaling each finished cell to NDJSON so an interrupted
sweep resumes without recomputation. Grids are keyed by cell index, so
the result is identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from multiprocessing import get_context

import numpy as np

from .errors import ConfigError, QecHeatError, ValidationError
from .lattice import RunSetup
from .phase import classify

_AXIS_NAMES = ("alpha", "gamma", "delta")


@dataclass(frozen=True)
class AxisSpec:
    """One swept coefficient axis."""

    name: str
    start: float
    stop: float
    count: int
    scale: str = "log"

    def __post_init__(self) -> None:
        if self.name not in _AXIS_NAMES:
            raise ValidationError(
                f"axis name must be one of {_AXIS_NAMES}, got {self.name!r}")
        if self.count < 2:
            raise ValidationError("axis count must be >= 2")
        if self.scale not in ("log", "linear"):
            raise ValidationError("axis scale must be 'log' or 'linear'")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValidationError("log axis endpoints must be positive")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValidationError("axis endpoints must be finite")
        if self.start >= self.stop:
            raise ValidationError("axis start must be below stop")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """Grid = rows x cols; rows may be None for a 1D scan."""

    cols: AxisSpec
    rows: AxisSpec | None = None

    def __post_init__(self) -> None:
        if self.rows is not None and self.rows.name == self.cols.name:
            raise ValidationError("sweep axes must differ")

    @property
    def shape(self) -> tuple[int, int]:
        return ((self.rows.count if self.rows else 1), self.cols.count)

    def cells(self):
        """Yield (idx, i, j, overrides dict) in row-major order."""
        col_vals = self.cols.values()
        row_vals = self.rows.values() if self.rows else [None]
        idx = 0
        for i, rv in enumerate(row_vals):
            for j, cv in enumerate(col_vals):
                ov = {self.cols.name: float(cv)}
                if self.rows is not None:
                    ov[self.rows.name] = float(rv)
                yield idx, i, j, ov
                idx += 1


def _sweep_digest(setup: RunSetup, spec: SweepSpec, mode: str) -> str:
    c = setup.coefficients
    payload = {
        "alpha": c.alpha, "gamma": c.gamma, "delta": c.delta,
        "time_step": setup.time_step, "base_temp": setup.base_temp,
        "num_sites": setup.num_sites, "mode": mode,
        "cols": [spec.cols.name, spec.cols.start, spec.cols.stop,
                 spec.cols.count, spec.cols.scale],
        "rows": ([spec.rows.name, spec.rows.start, spec.rows.stop,
                  spec.rows.count, spec.rows.scale]
                 if spec.rows else None),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class PhaseGrid:
    """Classified sweep grid plus provenance metadata.

    metadata carries a digest of the sweep definition, the package
    version, and a timestamp. Byte-for-byte comparisons of serialized
    grids must exclude the timestamp (and nothing else): every other
    field is a pure function of the sweep definition.
    """

    spec: SweepSpec
    cells: list
    base: dict
    metadata: dict = field(default_factory=dict)

    def cell(self, i: int, j: int) -> dict:
        return self.cells[i * self.spec.shape[1] + j]

    def phases(self) -> list:
        return [c["phase"] for c in self.cells]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("alpha,gamma,delta,phase,tau_s,steady_T_K\n")
            for c in self.cells:
                tau = "" if c["tau_s"] is None else repr(c["tau_s"])
                st = "" if c["steady_temp"] is None else repr(c["steady_temp"])
                fh.write(f"{c['alpha']!r},{c['gamma']!r},{c['delta']!r},"
                         f"{c['phase']},{tau},{st}\n")

    def to_gnuplot(self, path) -> None:
        """Matrix of inverse onset times (rows x cols); 0 where bounded."""
        n_rows, n_cols = self.spec.shape
        with open(path, "w") as fh:
            fh.write(f"# inverse onset rate 1/tau_s, {n_rows} x {n_cols}\n")
            fh.write(f"# cols: {self.spec.cols.name}, rows: "
                     f"{self.spec.rows.name if self.spec.rows else '-'}\n")
            for i in range(n_rows):
                vals = []
                for j in range(n_cols):
                    tau = self.cell(i, j)["tau_s"]
                    vals.append(repr(1.0 / tau) if tau else "0.0")
                fh.write(" ".join(vals) + "\n")

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"metadata": self.metadata, "base": self.base,
                       "cells": self.cells}, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _evaluate_cell(args):
    setup, mode, idx, i, j, overrides = args
    cell = {"idx": idx, "i": i, "j": j,
            "alpha": setup.coefficients.alpha,
            "gamma": setup.coefficients.gamma,
            "delta": setup.coefficients.delta,
            "phase": None, "tau_s": None, "steady_temp": None,
            "error": None}
    cell.update(overrides)
    try:
        s = replace(setup,
                    coefficients=replace(setup.coefficients, **overrides))
        out = classify(s, mode=mode)
        cell["phase"] = out.phase
        cell["tau_s"] = None if out.tau_s is None else float(out.tau_s)
        cell["steady_temp"] = (None if out.steady_temp is None
                               else float(out.steady_temp))
    except QecHeatError as exc:
        cell["phase"] = "error"
        cell["error"] = str(exc)
    return cell


def _load_journal(path, digest):
    done = {}
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        first = fh.readline()
        if not first.strip():
            return done
        head = json.loads(first)
        if head.get("digest") != digest:
            raise ConfigError(
                "journal belongs to a different sweep definition "
                f"(digest {head.get('digest', '?')[:12]}... != "
                f"{digest[:12]}...)", path=path)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cell = json.loads(line)
            done[cell["idx"]] = cell
    return done


def run_sweep(setup: RunSetup, spec: SweepSpec, mode: str = "auto",
              workers: int = 1, journal_path=None,
              resume: bool = False) -> PhaseGrid:
    """Classify every grid cell; error cells carry phase 'error'."""
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    digest = _sweep_digest(setup, spec, mode)

    done = {}
    if journal_path and resume:
        done = _load_journal(journal_path, digest)

    jfh = None
    if journal_path:
        # append only when resuming past completed cells
        fresh = not done
        jfh = open(journal_path, "a" if not fresh else "w")
        if fresh:
            jfh.write(json.dumps({"digest": digest}) + "\n")
            jfh.flush()

    todo = [(setup, mode, idx, i, j, ov)
            for idx, i, j, ov in spec.cells() if idx not in done]
    results = dict(done)

    try:
        if workers == 1 or len(todo) <= 1:
            it = map(_evaluate_cell, todo)
            for cell in it:
                results[cell["idx"]] = cell
                if jfh:
                    jfh.write(json.dumps(cell, sort_keys=True) + "\n")
                    jfh.flush()
        else:
            ctx = get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                for cell in pool.imap_unordered(_evaluate_cell, todo):
                    results[cell["idx"]] = cell
                    if jfh:
                        jfh.write(json.dumps(cell, sort_keys=True) + "\n")
                        jfh.flush()
    finally:
        if jfh:
            jfh.close()

    n_cells = spec.shape[0] * spec.shape[1]
    cells = [results[k] for k in range(n_cells)]
    grid = PhaseGrid(
        spec=spec, cells=cells,
        base={"alpha": setup.coefficients.alpha,
              "gamma": setup.coefficients.gamma,
              "delta": setup.coefficients.delta,
              "time_step": setup.time_step,
              "base_temp": setup.base_temp,
              "num_sites": setup.num_sites},
        metadata={"digest": digest,
                  "version": _package_version(),
                  "timestamp": datetime.now(timezone.utc).isoformat()})
    return grid


def _package_version() -> str:
    from . import __version__
    return __version__


@dataclass
class ScanResult:
    values: np.ndarray
    phases: list
    taus: list
    transitions: list  # (index, phase_before, phase_after)


def scan_transition(setup: RunSetup, axis: AxisSpec,
                    mode: str = "auto", workers: int = 1,
                    journal_path=None, resume: bool = False) -> ScanResult:
    """1D scan along one coefficient; reports phase change locations."""
    grid = run_sweep(setup, SweepSpec(cols=axis), mode=mode,
                     workers=workers, journal_path=journal_path,
                     resume=resume)
    phases = grid.phases()
    taus = [c["tau_s"] for c in grid.cells]
    transitions = [(k, phases[k - 1], phases[k])
                   for k in range(1, len(phases))
                   if phases[k] != phases[k - 1]]
    return ScanResult(values=axis.values(), phases=phases, taus=taus,
                      transitions=transitions)
