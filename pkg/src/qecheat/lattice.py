"""Lattice state, run configuration, and the exact stepping driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .coefficients import Coefficients, DELTA_WARN_LIMIT
from .errors import NumericalInstabilityError, ValidationError
from .thermo import ErrorModel, QecPolicy

# Halt reasons carried on TrajectoryRecord
HALT_BUDGET = "budget"
HALT_F_SATURATED = "f_saturated"
HALT_PERR_THRESHOLD = "p_err_threshold"
HALT_PLATEAU = "plateau"

_CHUNK_STEPS = 1 << 20


@dataclass(frozen=True)
class QuasilinearConfig:
    """Knobs for the burst-and-extrapolate accelerated runner."""

    enabled: bool = True
    slope_rel_tol: float = 0.2
    events_per_window: float = 48.0
    min_window_steps: int = 4096
    max_window_steps: int = 1 << 22
    stable_windows: int = 2
    jump_frac: float = 0.3
    max_burst_windows: int = 64
    balance_tol: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 < self.slope_rel_tol < 1.0):
            raise ValidationError("slope_rel_tol must be in (0, 1)")
        if self.events_per_window < 4:
            raise ValidationError("events_per_window must be >= 4")
        if self.min_window_steps < 2:
            raise ValidationError("min_window_steps must be >= 2")
        if self.max_window_steps < self.min_window_steps:
            raise ValidationError("max_window_steps < min_window_steps")
        if self.stable_windows < 1:
            raise ValidationError("stable_windows must be >= 1")
        if not (0.0 < self.jump_frac <= 1.0):
            raise ValidationError("jump_frac must be in (0, 1]")
        if self.max_burst_windows < 2:
            raise ValidationError("max_burst_windows must be >= 2")
        if not (0.0 < self.balance_tol < 1.0):
            raise ValidationError("balance_tol must be in (0, 1)")


@dataclass(frozen=True)
class NumericsConfig:
    """Budgets, sampling, and detection thresholds for a run."""

    max_steps: int | None = None
    max_seconds: float | None = 200.0
    sampling_stride: int = 1024
    plateau_window_samples: int = 10_000
    plateau_rel_tol: float = 1e-6
    debounce_window: int = 100
    quasilinear: QuasilinearConfig = field(default_factory=QuasilinearConfig)

    def __post_init__(self) -> None:
        if self.max_steps is None and self.max_seconds is None:
            raise ValidationError("one of max_steps / max_seconds is required")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValidationError("max_seconds must be positive")
        if self.sampling_stride < 1:
            raise ValidationError("sampling_stride must be >= 1")
        if self.plateau_window_samples < 4:
            raise ValidationError("plateau_window_samples must be >= 4")
        if self.plateau_rel_tol <= 0:
            raise ValidationError("plateau_rel_tol must be positive")
        if self.debounce_window < 1:
            raise ValidationError("debounce_window must be >= 1")
        if self.quasilinear.enabled:
            s = self.sampling_stride
            if s & (s - 1):
                raise ValidationError(
                    "sampling_stride must be a power of two when the "
                    "quasilinear runner is enabled (keeps burst samples "
                    "aligned with the output stride)")

    def budget_steps(self, time_step: float) -> int:
        steps = self.max_steps if self.max_steps is not None else None
        if self.max_seconds is not None:
            by_time = int(self.max_seconds / time_step)
            steps = by_time if steps is None else min(steps, by_time)
        return max(int(steps), 1)


@dataclass(frozen=True)
class RunSetup:
    """Everything the stepping engine needs for one run."""

    coefficients: Coefficients
    error_model: ErrorModel = field(default_factory=ErrorModel)
    policy: QecPolicy = field(default_factory=QecPolicy)
    time_step: float = 0.5246e-12
    base_temp: float = 0.010
    num_sites: int = 50
    fridge_neighbors: int = 1
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def __post_init__(self) -> None:
        if self.time_step <= 0:
            raise ValidationError("time_step must be positive")
        if self.base_temp <= 0:
            raise ValidationError("base_temp must be positive")
        if self.num_sites < 2:
            raise ValidationError("num_sites must be >= 2")
        if self.fridge_neighbors < 0:
            raise ValidationError("fridge_neighbors must be >= 0")
        if self.coefficients.delta > DELTA_WARN_LIMIT:
            raise ValidationError(
                f"delta = {self.coefficients.delta:.6g} exceeds the "
                f"permitted band (<= {DELTA_WARN_LIMIT}); reduce the time "
                "step or coarsen the lattice")

    def with_coefficients(self, **kw) -> "RunSetup":
        return replace(self, coefficients=replace(self.coefficients, **kw))


@dataclass
class LatticeState:
    """Mutable simulation state."""

    temps: np.ndarray
    time: float = 0.0
    step_count: int = 0
    qec_accumulator: float = 0.0
    qec_events_fired: int = 0

    def copy(self) -> "LatticeState":
        return LatticeState(self.temps.copy(), self.time, self.step_count,
                            self.qec_accumulator, self.qec_events_fired)


def init_state(num_sites: int, base_temp: float) -> LatticeState:
    """Uniform field at the fridge base temperature."""
    if num_sites < 2:
        raise ValidationError("num_sites must be >= 2")
    if base_temp <= 0:
        raise ValidationError("base_temp must be positive")
    return LatticeState(temps=np.full(num_sites, float(base_temp)))


@dataclass
class TrajectoryRecord:
    """Sampled time series plus halt metadata for one run.

    Sample columns follow the CSV layout:
    time_s, T_qubit_K, T_fridge_K, T_mean_K, p_err, f_rate.
    segments lists (t_start, t_end, kind) spans, kind "exact" or
    "extrapolated"; exact-only runs carry a single exact span.
    """

    times: np.ndarray
    t_qubit: np.ndarray
    t_fridge: np.ndarray
    t_mean: np.ndarray
    p_err: np.ndarray
    f_rate: np.ndarray
    sampling_stride: int
    time_step: float
    halt_reason: str | None = None
    tau_s: float | None = None
    runaway: bool = False
    segments: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def to_csv(self, path) -> None:
        cols = (self.times, self.t_qubit, self.t_fridge, self.t_mean,
                self.p_err, self.f_rate)
        with open(path, "w") as fh:
            fh.write("time_s,T_qubit_K,T_fridge_K,T_mean_K,p_err,f_rate\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class RunResult:
    trajectory: TrajectoryRecord
    final_state: LatticeState
    runaway: bool


class _SampleSink:
    """Accumulates kernel sample buffers across chunks."""

    def __init__(self):
        self.g = []
        self.tq = []
        self.tl = []
        self.tmean = []
        self.perr = []
        self.f = []

    def extend(self, g, tq, tl, tmean, perr, f, n):
        if n:
            self.g.append(g[:n].copy())
            self.tq.append(tq[:n].copy())
            self.tl.append(tl[:n].copy())
            self.tmean.append(tmean[:n].copy())
            self.perr.append(perr[:n].copy())
            self.f.append(f[:n].copy())

    def append_point(self, g, tq, tl, tmean, perr, f):
        self.extend(np.array([g], dtype=np.int64), np.array([tq]),
                    np.array([tl]), np.array([tmean]), np.array([perr]),
                    np.array([f]), 1)

    def arrays(self):
        if not self.g:
            empty = np.empty(0)
            return (np.empty(0, dtype=np.int64), empty.copy(), empty.copy(),
                    empty.copy(), empty.copy(), empty.copy())
        return (np.concatenate(self.g), np.concatenate(self.tq),
                np.concatenate(self.tl), np.concatenate(self.tmean),
                np.concatenate(self.perr), np.concatenate(self.f))


class Engine:
    """Owns a LatticeState and drives the selected kernel chunk by chunk."""

    def __init__(self, setup: RunSetup, state: LatticeState | None = None,
                 halt_checks: bool = True):
        self.setup = setup
        self.state = state.copy() if state is not None else init_state(
            setup.num_sites, setup.base_temp)
        if len(self.state.temps) != setup.num_sites:
            raise ValidationError("state size does not match setup.num_sites")
        self.halt_checks = halt_checks
        self._fsat_run = 0
        self._fsat_start = -1
        c = setup.coefficients
        m = setup.error_model
        p = setup.policy
        from .constants import K_B
        self._args = dict(
            alpha=c.alpha, gamma=c.gamma, delta=c.delta,
            t0=setup.base_temp, n_fridge=float(setup.fridge_neighbors),
            p0=m.p0, tls_B=m.tls_B, tls_n=m.tls_n, qp_amp=m.qp_amplitude,
            qp_gap_kb=(m.qp_gap / K_B if m.qp_amplitude > 0 else 0.0),
            p_th=p.p_th, half_dc=p.code_distance / 2.0, c_f=p.c_f,
            halt_perr=(p.p_th if halt_checks else math.inf),
            debounce=(setup.numerics.debounce_window if halt_checks
                      else (1 << 62)),
        )
        # running totals (exact steps only)
        self.heat_total = 0.0
        self.cool_total = 0.0

    @property
    def time(self) -> float:
        return self.state.step_count * self.setup.time_step

    def advance(self, n_steps: int, stride: int, sink: _SampleSink | None):
        """Run up to n_steps; returns (status, info dict for this call)."""
        st = self.state
        n_steps = int(n_steps)
        cap = n_steps // stride + 2
        samp_g = np.empty(cap, dtype=np.int64)
        samp_tq = np.empty(cap)
        samp_tl = np.empty(cap)
        samp_tmean = np.empty(cap)
        samp_perr = np.empty(cap)
        samp_f = np.empty(cap)
        a = self._args

        done_total = 0
        heat = 0.0
        cool = 0.0
        status = kernels.STATUS_OK
        bad_site = -1
        bad_g = -1
        while done_total < n_steps:
            n = min(_CHUNK_STEPS, n_steps - done_total)
            (status, done, st.qec_accumulator, self._fsat_run,
             self._fsat_start, events, h, c_, nsamp, bad_site, bad_g) = \
                kernels.step_chunk(
                    st.temps, np.int64(n), np.int64(st.step_count),
                    st.qec_accumulator, self._fsat_run, self._fsat_start,
                    a["alpha"], a["gamma"], a["delta"], a["t0"],
                    a["n_fridge"], a["p0"], a["tls_B"], a["tls_n"],
                    a["qp_amp"], a["qp_gap_kb"], a["p_th"], a["half_dc"],
                    a["c_f"], a["halt_perr"], np.int64(a["debounce"]),
                    np.int64(stride),
                    samp_g, samp_tq, samp_tl, samp_tmean, samp_perr, samp_f)
            st.step_count += done
            st.time = st.step_count * self.setup.time_step
            st.qec_events_fired += events
            done_total += done
            heat += h
            cool += c_
            if sink is not None:
                sink.extend(samp_g, samp_tq, samp_tl, samp_tmean,
                            samp_perr, samp_f, nsamp)
            if status != kernels.STATUS_OK:
                break

        self.heat_total += heat
        self.cool_total += cool
        if status == kernels.STATUS_UNSTABLE:
            raise NumericalInstabilityError(bad_site, bad_g)
        info = {
            "steps": done_total,
            "heat": float(heat),
            "cool": float(cool),
            "tau_s": None,
        }
        if status == kernels.STATUS_RUNAWAY:
            info["tau_s"] = float(self._fsat_start * self.setup.time_step)
        elif status == kernels.STATUS_THRESHOLD:
            info["tau_s"] = float(bad_g * self.setup.time_step)
        return status, info

    def shift_all(self, delta_temp: float, n_steps: int) -> None:
        """Uniform extrapolation jump: every site moves by delta_temp."""
        st = self.state
        st.temps += delta_temp
        if not np.all((st.temps > 0.0) & np.isfinite(st.temps)):
            bad = int(np.argmin((st.temps > 0.0) & np.isfinite(st.temps)))
            raise NumericalInstabilityError(bad, st.step_count)
        st.step_count += int(n_steps)
        st.time = st.step_count * self.setup.time_step

    def sample_now(self) -> tuple:
        """Instantaneous sample tuple for the current state."""
        from .thermo import p_err as p_err_fn, logical_failure, qec_frequency
        st = self.state
        tq = float(st.temps[0])
        pe = p_err_fn(self.setup.error_model, tq)
        f = qec_frequency(self.setup.policy,
                          logical_failure(self.setup.policy, pe))
        return (st.step_count, tq, float(st.temps[-1]),
                float(st.temps.mean()), pe, f)


def _build_record(setup: RunSetup, sink: _SampleSink, stride: int,
                  halt_reason, tau_s, runaway, segments, warns) -> TrajectoryRecord:
    g, tq, tl, tmean, perr, f = sink.arrays()
    return TrajectoryRecord(
        times=g * setup.time_step, t_qubit=tq, t_fridge=tl, t_mean=tmean,
        p_err=perr, f_rate=f, sampling_stride=stride,
        time_step=setup.time_step, halt_reason=halt_reason, tau_s=tau_s,
        runaway=runaway, segments=segments, warnings=warns)


def step(state: LatticeState, setup: RunSetup) -> LatticeState:
    """Apply exactly one update step and return the new state.

    Halt checks are disabled: the single-step form always commits, so the
    worked examples and property tests can probe arbitrary fields.
    """
    eng = Engine(setup, state=state, halt_checks=False)
    eng.advance(1, stride=1 << 62, sink=None)
    return eng.state


def run(setup: RunSetup, state: LatticeState | None = None,
        collect: bool = True) -> RunResult:
    """Exact stepping until budget, runaway, or threshold.

    Returns the sampled trajectory, the final state, and the runaway flag.
    Raises NumericalInstabilityError when the field leaves (0, 1e30).
    """
    eng = Engine(setup, state=state)
    budget = setup.numerics.budget_steps(setup.time_step)
    stride = setup.numerics.sampling_stride
    sink = _SampleSink() if collect else None
    t_start = eng.time

    remaining = budget - eng.state.step_count
    status, info = eng.advance(max(remaining, 0), stride, sink)

    if status == kernels.STATUS_RUNAWAY:
        halt, runaway = HALT_F_SATURATED, True
    elif status == kernels.STATUS_THRESHOLD:
        halt, runaway = HALT_PERR_THRESHOLD, True
    else:
        halt, runaway = HALT_BUDGET, False

    segments = [(t_start, eng.time, "exact")]
    traj = _build_record(setup, sink or _SampleSink(), stride, halt,
                         info["tau_s"], runaway, segments, [])
    return RunResult(trajectory=traj, final_state=eng.state, runaway=runaway)
