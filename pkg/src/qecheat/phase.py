"""Phase classification, critical-point search, and exponent fitting.

A run is Bounded when the hot-site temperature settles (exact mode: the
drift between half-window means falls below tolerance while the sampled
error rate stays under threshold; accelerated mode: heating and cooling
balance over consecutive windows). It is Unbounded when the correction
rate saturates or the error rate crosses threshold, and Indeterminate
when the step budget runs out first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BracketError, ValidationError
from .lattice import (Engine, RunSetup, TrajectoryRecord, _SampleSink,
                      _build_record, HALT_BUDGET, HALT_F_SATURATED,
                      HALT_PERR_THRESHOLD, HALT_PLATEAU)
from .thermo import frequency_at_temp, runaway_temperature

PHASE_BOUNDED = "bounded"
PHASE_UNBOUNDED = "unbounded"
PHASE_INDETERMINATE = "indeterminate"


@dataclass
class PhaseOutcome:
    phase: str
    steady_temp: float | None = None
    tau_s: float | None = None
    budget_spent: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return self.phase == PHASE_BOUNDED


def detect_plateau(values: np.ndarray, rel_tol: float) -> tuple[bool, float]:
    """Drift test on one window: compare the means of its two halves.

    Returns (flat, drift) where drift is |mean2 - mean1| / window mean.
    Robust to limit cycles, which a max-min spread test is not.
    """
    n = len(values)
    half = n // 2
    if half < 2:
        return False, math.inf
    a = float(np.mean(values[:half]))
    b = float(np.mean(values[half:2 * half]))
    m = float(np.mean(values[:2 * half]))
    if m <= 0:
        return False, math.inf
    drift = abs(b - a) / m
    return drift < rel_tol, drift


def detect_tau(record: TrajectoryRecord, p_th: float) -> float | None:
    """Onset time of runaway from a finished trajectory.

    Prefers the exact halt time stamped by the stepper; otherwise scans
    the samples for the first saturated correction rate or threshold
    crossing.
    """
    if record.tau_s is not None:
        return record.tau_s
    hit = np.nonzero((record.f_rate >= 1.0) | (record.p_err >= p_th))[0]
    if len(hit):
        return float(record.times[hit[0]])
    return None


def _fit_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of y against x and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    sxx = float(np.dot(dx, dx))
    if sxx <= 0:
        return 0.0, math.inf
    slope = float(np.dot(dx, y - y.mean())) / sxx
    resid = y - y.mean() - slope * dx
    dof = max(len(x) - 2, 1)
    sig = math.sqrt(float(np.dot(resid, resid)) / dof / sxx)
    return slope, sig


def _outcome(phase, eng, sink, stride, halt, tau, diag, collect):
    record = None
    if collect:
        record = _build_record(eng.setup, sink, stride, halt, tau,
                               phase == PHASE_UNBOUNDED,
                               diag.pop("_segments", []),
                               diag.pop("_warnings", []))
    else:
        diag.pop("_segments", None)
        diag.pop("_warnings", None)
    out = PhaseOutcome(
        phase=phase,
        steady_temp=diag.pop("_steady", None),
        tau_s=tau,
        budget_spent=eng.state.step_count,
        diagnostics=diag)
    return out, record


def _classify_exact(setup: RunSetup, collect: bool,
                    eng: Engine | None = None,
                    sink: _SampleSink | None = None,
                    segments: list | None = None,
                    warns: list | None = None):
    """Step exactly, testing one plateau window at a time."""
    num = setup.numerics
    stride = num.sampling_stride
    if eng is None:
        eng = Engine(setup)
    if sink is None:
        sink = _SampleSink()
    segments = segments if segments is not None else []
    warns = warns if warns is not None else []
    budget = num.budget_steps(setup.time_step)
    win_steps = num.plateau_window_samples * stride
    windows = 0
    last_drift = math.inf

    while eng.state.step_count < budget:
        t_mark = eng.time
        n = min(win_steps, budget - eng.state.step_count)
        wsink = _SampleSink()
        status, info = eng.advance(n, stride, wsink)
        segments.append((t_mark, eng.time, "exact"))
        g, tq, _tl, _tm, perr, _f = wsink.arrays()
        if collect:
            sink.extend(g, tq, _tl, _tm, perr, _f, len(g))
        windows += 1

        if status in (kernels.STATUS_RUNAWAY, kernels.STATUS_THRESHOLD):
            diag = {"windows": windows, "mode": "exact",
                    "_segments": segments, "_warnings": warns}
            halt = (HALT_F_SATURATED if status == kernels.STATUS_RUNAWAY
                    else HALT_PERR_THRESHOLD)
            return _outcome(PHASE_UNBOUNDED, eng, sink, stride, halt,
                            info["tau_s"], diag, collect)

        if len(tq) >= num.plateau_window_samples:
            flat, last_drift = detect_plateau(tq, num.plateau_rel_tol)
            if flat and float(np.mean(perr)) < setup.policy.p_th:
                diag = {"windows": windows, "drift": last_drift,
                        "mode": "exact", "_segments": segments,
                        "_warnings": warns,
                        "_steady": float(np.mean(tq))}
                return _outcome(PHASE_BOUNDED, eng, sink, stride,
                                HALT_PLATEAU, None, diag, collect)

    diag = {"windows": windows, "drift": last_drift, "mode": "exact",
            "_segments": segments, "_warnings": warns}
    return _outcome(PHASE_INDETERMINATE, eng, sink, stride, HALT_BUDGET,
                    None, diag, collect)


def _classify_quasilinear(setup: RunSetup, collect: bool):
    """Burst-and-extrapolate runner.

    Alternates short exact bursts with linear jumps along the measured
    hot-site slope. Bounded is declared when window heating and cooling
    balance (or the slope is below its own noise) for stable_windows
    consecutive windows; a jump that would cross the runaway temperature
    is capped to land just above it so the following burst halts with an
    exact onset stamp. Stalls fall back to exact stepping.
    """
    num = setup.numerics
    ql = num.quasilinear
    stride = num.sampling_stride
    eng = Engine(setup)
    budget = num.budget_steps(setup.time_step)
    t0 = setup.base_temp
    t_run = runaway_temperature(setup.error_model, setup.policy)
    sink = _SampleSink()
    segments: list = []
    warns: list = []

    jump_frac = ql.jump_frac
    prev_slope: float | None = None
    stable = 0
    balanced = 0
    stall = 0
    jumps = 0
    windows = 0
    exact_steps = 0

    while eng.state.step_count < budget:
        tq_now = float(eng.state.temps[0])
        f_now = frequency_at_temp(setup.error_model, setup.policy, tq_now)
        if f_now > 0 and math.isfinite(f_now):
            w = ql.events_per_window / f_now
        else:
            w = ql.max_window_steps if f_now == 0 else ql.min_window_steps
        w = min(max(w, ql.min_window_steps), ql.max_window_steps)
        w = int(math.ceil(w / stride)) * stride
        w = min(w, budget - eng.state.step_count)

        sstr = stride
        while sstr > 1 and w // sstr < 64:
            sstr //= 2

        t_mark = eng.time
        wsink = _SampleSink()
        status, info = eng.advance(w, sstr, wsink)
        segments.append((t_mark, eng.time, "exact"))
        windows += 1
        exact_steps += info["steps"]
        g, tq, tl, tm, perr, fr = wsink.arrays()
        if collect and len(g):
            keep = (g % stride) == 0
            sink.extend(g[keep], tq[keep], tl[keep], tm[keep], perr[keep],
                        fr[keep], int(keep.sum()))

        if status in (kernels.STATUS_RUNAWAY, kernels.STATUS_THRESHOLD):
            halt = (HALT_F_SATURATED if status == kernels.STATUS_RUNAWAY
                    else HALT_PERR_THRESHOLD)
            diag = {"windows": windows, "jumps": jumps,
                    "exact_steps": exact_steps, "mode": "quasilinear",
                    "_segments": segments, "_warnings": warns}
            return _outcome(PHASE_UNBOUNDED, eng, sink, stride, halt,
                            info["tau_s"], diag, collect)

        if len(g) < 8:
            continue

        slope, sig = _fit_slope(g, tq)
        heat, cool = info["heat"], info["cool"]

        bal_ok = heat > 0 and abs(heat + cool) <= ql.balance_tol * heat
        noise_ok = abs(slope) <= 2.0 * sig
        if bal_ok or noise_ok:
            balanced += 1
            stall = 0
            prev_slope = slope
            if balanced >= ql.stable_windows:
                diag = {"windows": windows, "jumps": jumps,
                        "exact_steps": exact_steps, "mode": "quasilinear",
                        "balance_residual": (abs(heat + cool) / heat
                                             if heat > 0 else 0.0),
                        "_segments": segments, "_warnings": warns,
                        "_steady": float(np.mean(tq))}
                return _outcome(PHASE_BOUNDED, eng, sink, stride,
                                HALT_PLATEAU, None, diag, collect)
            continue
        balanced = 0

        if prev_slope is not None and slope * prev_slope > 0 and \
                abs(slope - prev_slope) <= ql.slope_rel_tol * abs(prev_slope):
            stable += 1
        else:
            if prev_slope is not None and slope * prev_slope < 0:
                jump_frac = max(jump_frac * 0.5, 1.0 / 1024.0)
            stable = 0
        prev_slope = slope

        did_jump = False
        if stable + 1 >= ql.stable_windows and slope != 0.0:
            tq_now = float(eng.state.temps[0])
            gap = tq_now - t0
            if gap > 0:
                n_jump = int(jump_frac * gap / abs(slope) / stride) * stride
                n_jump = min(n_jump,
                             (budget - eng.state.step_count) // stride
                             * stride)
                target = tq_now + slope * n_jump
                if slope > 0 and target >= t_run:
                    t_land = t_run * (1.0 + 1e-12)
                    n_jump = int(math.ceil(
                        (t_land - tq_now) / slope / stride)) * stride
                    shift = t_land - tq_now
                else:
                    shift = slope * n_jump
                if n_jump > 0:
                    t_mark = eng.time
                    eng.shift_all(shift, n_jump)
                    segments.append((t_mark, eng.time, "extrapolated"))
                    if collect:
                        sink.append_point(*eng.sample_now())
                    jumps += 1
                    did_jump = True
                    stable = 0
                    stall = 0

        if not did_jump:
            stall += 1
            if stall >= ql.max_burst_windows:
                warns.append(
                    "accelerated runner stalled after "
                    f"{ql.max_burst_windows} windows without progress; "
                    "falling back to exact stepping")
                out, rec = _classify_exact(setup, collect, eng=eng,
                                           sink=sink, segments=segments,
                                           warns=warns)
                out.diagnostics["mode"] = "quasilinear+exact_fallback"
                out.diagnostics["jumps"] = jumps
                return out, rec

    diag = {"windows": windows, "jumps": jumps, "exact_steps": exact_steps,
            "mode": "quasilinear", "_segments": segments,
            "_warnings": warns}
    return _outcome(PHASE_INDETERMINATE, eng, sink, stride, HALT_BUDGET,
                    None, diag, collect)


def _classify_impl(setup: RunSetup, mode: str, collect: bool):
    if mode == "auto":
        mode = ("quasilinear" if setup.numerics.quasilinear.enabled
                else "exact")
    if mode == "quasilinear":
        return _classify_quasilinear(setup, collect)
    if mode == "exact":
        return _classify_exact(setup, collect)
    raise ValidationError(f"unknown mode {mode!r}")


def classify(setup: RunSetup, mode: str = "auto") -> PhaseOutcome:
    """Classify one operating point. Returns the outcome only."""
    out, _ = _classify_impl(setup, mode, collect=False)
    return out


def simulate_trajectory(setup: RunSetup, mode: str = "auto"):
    """Classify and keep the sampled trajectory (for file output)."""
    return _classify_impl(setup, mode, collect=True)


@dataclass
class CriticalPoint:
    gamma_c: float
    uncertainty: float
    iterations: int
    audit: list = field(default_factory=list)


@dataclass
class CriticalFit:
    zeta: float
    zeta_stderr: float
    log_prefactor: float
    n_points: int
    epsilons: np.ndarray = None
    taus: np.ndarray = None


def find_gamma_c(classify_at, lo: float, hi: float,
                 iters: int = 24) -> CriticalPoint:
    """Bisect the cooling coefficient for the bounded/unbounded boundary.

    classify_at(gamma) must return a PhaseOutcome (or a phase string).
    lo must classify unbounded and hi bounded, else BracketError. An
    indeterminate midpoint is treated as bounded-side (it shrinks hi)
    and noted in the audit trail.
    """
    if not (0 <= lo < hi) or not math.isfinite(hi):
        raise ValidationError("need 0 <= lo < hi and finite hi")

    def phase_of(g):
        out = classify_at(g)
        return out if isinstance(out, str) else out.phase

    audit = []
    p_lo = phase_of(lo)
    audit.append((lo, p_lo))
    if p_lo != PHASE_UNBOUNDED:
        raise BracketError(
            f"lower endpoint gamma={lo:.6g} classified {p_lo}, expected "
            "unbounded; widen the bracket downward")
    p_hi = phase_of(hi)
    audit.append((hi, p_hi))
    if p_hi != PHASE_BOUNDED:
        raise BracketError(
            f"upper endpoint gamma={hi:.6g} classified {p_hi}, expected "
            "bounded; widen the bracket upward")

    it = 0
    for it in range(1, iters + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        p = phase_of(mid)
        audit.append((mid, p))
        if p == PHASE_UNBOUNDED:
            lo = mid
        else:
            hi = mid
    gamma_c = 0.5 * (lo + hi)
    return CriticalPoint(gamma_c=gamma_c, uncertainty=0.5 * (hi - lo),
                         iterations=it, audit=audit)


def fit_zeta(points, gamma_c: float, min_gap: float = 0.0) -> CriticalFit:
    """Power-law fit tau = C * eps^(-zeta), eps = (gamma_c - gamma)/gamma_c.

    points is a sequence of (gamma, tau_s) pairs from the unbounded side.
    Points closer to gamma_c than min_gap (absolute) are dropped; at
    least five must survive.
    """
    if gamma_c <= 0 or not math.isfinite(gamma_c):
        raise ValidationError("gamma_c must be positive and finite")
    eps = []
    taus = []
    for g, tau in points:
        if tau is None or tau <= 0 or not math.isfinite(tau):
            continue
        if g >= gamma_c or (gamma_c - g) < min_gap:
            continue
        eps.append((gamma_c - g) / gamma_c)
        taus.append(tau)
    if len(eps) < 5:
        raise ValidationError(
            f"power-law fit needs at least 5 usable points, got {len(eps)}")
    x = np.log(np.asarray(eps))
    y = np.log(np.asarray(taus))
    (m, b), cov = np.polyfit(x, y, 1, cov=True)
    zeta = -float(m)
    stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    if zeta <= 0:
        raise ValidationError(
            f"fitted exponent {zeta:.4g} is not positive; the points do "
            "not show critical slowing")
    return CriticalFit(zeta=zeta, zeta_stderr=stderr, log_prefactor=float(b),
                       n_points=len(eps), epsilons=np.asarray(eps),
                       taus=np.asarray(taus))


@dataclass
class CriticalResult:
    point: CriticalPoint
    fit: CriticalFit
    fit_points: list


def run_critical(setup: RunSetup, bracket_lo: float, bracket_hi: float,
                 iters: int = 24, fit_points: int = 7,
                 eps_lo: float = 0.05, eps_hi: float = 0.5,
                 mode: str = "auto") -> CriticalResult:
    """Full pipeline: bisect gamma_c, then fit the onset-time exponent.

    Fit abscissas are log-spaced in relative distance below gamma_c,
    clear of the final bisection bracket.
    """
    if not (0 < eps_lo < eps_hi < 1):
        raise ValidationError("need 0 < eps_lo < eps_hi < 1")

    def classify_at(g):
        return classify(setup.with_coefficients(gamma=g), mode=mode)

    point = find_gamma_c(classify_at, bracket_lo, bracket_hi, iters)
    min_gap = 4.0 * point.uncertainty

    pts = []
    for e in np.geomspace(eps_lo, eps_hi, fit_points):
        g = point.gamma_c * (1.0 - float(e))
        out = classify_at(g)
        if out.phase == PHASE_UNBOUNDED and out.tau_s:
            pts.append((g, out.tau_s))
    fit = fit_zeta(pts, point.gamma_c, min_gap=min_gap)
    return CriticalResult(point=point, fit=fit, fit_points=pts)
