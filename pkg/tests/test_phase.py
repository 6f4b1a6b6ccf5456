import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecheat import (BracketError, NumericsConfig, QuasilinearConfig,
                     RunSetup, ValidationError, classify, detect_plateau,
                     detect_tau, find_gamma_c, fit_zeta, run,
                     simulate_trajectory)
from qecheat.lattice import TrajectoryRecord
from qecheat.phase import PHASE_BOUNDED, PHASE_UNBOUNDED


class TestDetectPlateau:
    def test_flat_series_is_plateau(self):
        flat, drift = detect_plateau(np.full(1000, 0.01), 1e-6)
        assert flat and drift == 0.0

    def test_limit_cycle_is_plateau(self):
        # a stationary sawtooth has equal half-window means
        t = np.arange(2000)
        vals = 0.01 + 0.002 * (t % 40) / 40
        flat, drift = detect_plateau(vals, 1e-3)
        assert flat

    def test_linear_drift_is_not(self):
        vals = 0.01 + 1e-5 * np.arange(2000)
        flat, drift = detect_plateau(vals, 1e-3)
        assert not flat
        assert drift == pytest.approx(1e-5 * 1000 / np.mean(vals), rel=0.01)

    def test_too_short_window(self):
        flat, drift = detect_plateau(np.array([1.0, 2.0]), 1e-3)
        assert not flat and math.isinf(drift)


class TestDetectTau:
    def _record(self, f_rate, p_err, tau_s=None):
        n = len(f_rate)
        z = np.zeros(n)
        return TrajectoryRecord(
            times=np.arange(1, n + 1) * 1e-12, t_qubit=z, t_fridge=z,
            t_mean=z, p_err=np.asarray(p_err), f_rate=np.asarray(f_rate),
            sampling_stride=1, time_step=1e-12, tau_s=tau_s)

    def test_prefers_stamped_time(self):
        rec = self._record([0.0, 2.0], [0.0, 0.0], tau_s=42.0)
        assert detect_tau(rec, 0.01) == 42.0

    def test_scans_f_saturation(self):
        rec = self._record([0.1, 0.5, 1.5, 2.0], [0.0] * 4)
        assert detect_tau(rec, 0.01) == pytest.approx(3e-12)

    def test_scans_threshold_crossing(self):
        rec = self._record([0.1] * 4, [0.001, 0.02, 0.02, 0.02])
        assert detect_tau(rec, 0.01) == pytest.approx(2e-12)

    def test_none_when_no_onset(self):
        rec = self._record([0.1] * 4, [0.001] * 4)
        assert detect_tau(rec, 0.01) is None


class TestClassifyToy:
    def test_weak_cooling_unbounded(self, toy_setup_factory):
        out = classify(toy_setup_factory(1e-8), mode="exact")
        assert out.phase == PHASE_UNBOUNDED
        assert out.tau_s is not None and out.tau_s > 0

    def test_strong_cooling_bounded(self, toy_setup_factory):
        out = classify(toy_setup_factory(1e-5), mode="exact")
        assert out.phase == PHASE_BOUNDED
        assert 0.01 < out.steady_temp < 0.02

    def test_budget_exhaustion_is_indeterminate(self, toy_setup_factory):
        # a tiny budget can neither settle nor run away
        out = classify(toy_setup_factory(1e-5, max_steps=1000),
                       mode="exact")
        assert out.phase == "indeterminate"
        assert out.budget_spent == 1000

    def test_simulate_returns_matching_record(self, toy_setup_factory):
        out, rec = simulate_trajectory(toy_setup_factory(1e-8),
                                       mode="exact")
        assert out.phase == PHASE_UNBOUNDED
        assert rec.runaway
        assert rec.tau_s == out.tau_s
        assert rec.n_samples > 0
        assert rec.segments and rec.segments[0][2] == "exact"


class TestQuasilinear:
    def _setup(self, gamma_scale, default_coeffs, **kw):
        co = dataclasses.replace(default_coeffs,
                                 gamma=default_coeffs.gamma * gamma_scale)
        num = NumericsConfig(max_seconds=kw.pop("max_seconds", 200.0),
                             **kw)
        return RunSetup(coefficients=co, numerics=num)

    def test_no_cooling_unbounded_seconds(self, default_coeffs):
        out = classify(self._setup(0.0, default_coeffs),
                       mode="quasilinear")
        assert out.phase == PHASE_UNBOUNDED
        assert 0.1 <= out.tau_s <= 100.0
        assert out.diagnostics["jumps"] > 0

    def test_default_cooling_bounded(self, default_coeffs):
        out = classify(self._setup(1.0, default_coeffs),
                       mode="quasilinear")
        assert out.phase == PHASE_BOUNDED
        assert out.steady_temp < 0.011

    def test_jump_landing_samples_aligned(self, default_coeffs):
        out, rec = simulate_trajectory(self._setup(0.0, default_coeffs),
                                       mode="quasilinear")
        g = np.rint(rec.times / rec.time_step).astype(np.int64)
        assert (g % rec.sampling_stride == 0).all()
        assert (np.diff(g) > 0).all()
        kinds = {k for _, _, k in rec.segments}
        assert kinds == {"exact", "extrapolated"}

    def test_overlap_matches_exact(self, default_coeffs):
        s = self._setup(0.0, default_coeffs, max_seconds=None,
                        max_steps=400_000, sampling_stride=1024)
        rec_exact = run(s).trajectory
        _, rec_ql = simulate_trajectory(s, mode="quasilinear")
        ge = np.rint(rec_exact.times / s.time_step).astype(np.int64)
        gq = np.rint(rec_ql.times / s.time_step).astype(np.int64)
        common, ie, iq = np.intersect1d(ge, gq, return_indices=True)
        assert len(common) > 20
        rel = np.abs(rec_ql.t_qubit[iq] - rec_exact.t_qubit[ie]) \
            / rec_exact.t_qubit[ie]
        assert rel.max() < 1e-4

    def test_stall_falls_back_to_exact(self, default_coeffs):
        # forbid jumps entirely by demanding impossible slope agreement
        ql = QuasilinearConfig(slope_rel_tol=1e-12, stable_windows=2,
                               max_burst_windows=3)
        num = NumericsConfig(max_steps=400_000, max_seconds=None,
                             quasilinear=ql)
        co = dataclasses.replace(default_coeffs, gamma=0.0)
        out, rec = simulate_trajectory(RunSetup(coefficients=co,
                                                numerics=num),
                                       mode="quasilinear")
        assert "exact_fallback" in out.diagnostics["mode"]
        assert rec.warnings


class TestFindGammaC:
    @staticmethod
    def _stub(gc):
        def classify_at(g):
            return PHASE_UNBOUNDED if g < gc else PHASE_BOUNDED
        return classify_at

    def test_recovers_stub_boundary(self):
        gc = 3.731e-7
        pt = find_gamma_c(self._stub(gc), 1e-8, 1e-4, iters=40)
        assert pt.gamma_c == pytest.approx(gc, rel=1e-6)
        assert pt.uncertainty < 1e-12
        assert pt.audit[0] == (1e-8, PHASE_UNBOUNDED)

    @given(gc=st.floats(2e-8, 9e-5))
    @settings(max_examples=30, deadline=None)
    def test_bisection_brackets_boundary(self, gc):
        pt = find_gamma_c(self._stub(gc), 1e-8, 1e-4, iters=24)
        assert abs(pt.gamma_c - gc) <= max(2 * pt.uncertainty, 1e-12 * gc)

    def test_rejects_bad_lower_endpoint(self):
        with pytest.raises(BracketError, match="widen the bracket"):
            find_gamma_c(self._stub(1e-9), 1e-8, 1e-4)

    def test_rejects_bad_upper_endpoint(self):
        with pytest.raises(BracketError, match="widen the bracket"):
            find_gamma_c(self._stub(1.0), 1e-8, 1e-4)

    def test_indeterminate_shrinks_from_above(self):
        # indeterminate cells are treated as the bounded side
        def classify_at(g):
            if g <= 1e-6:
                return PHASE_UNBOUNDED
            if g <= 2e-6:
                return "indeterminate"
            return PHASE_BOUNDED
        pt = find_gamma_c(classify_at, 1e-8, 1e-4, iters=40)
        assert pt.gamma_c == pytest.approx(1e-6, rel=1e-6)


class TestFitZeta:
    def _points(self, c, zeta, gamma_c, eps):
        return [(gamma_c * (1 - e), c * e ** (-zeta)) for e in eps]

    def test_exact_recovery(self):
        eps = np.geomspace(0.05, 0.5, 9)
        fit = fit_zeta(self._points(2.5, 0.5, 1e-7, eps), 1e-7)
        assert fit.zeta == pytest.approx(0.5, abs=1e-6)
        assert fit.zeta_stderr < 1e-9
        assert math.exp(fit.log_prefactor) == pytest.approx(2.5, rel=1e-9)

    @given(zeta=st.floats(0.1, 2.0), c=st.floats(1e-3, 1e3))
    @settings(max_examples=40, deadline=None)
    def test_recovery_over_parameter_range(self, zeta, c):
        eps = np.geomspace(0.03, 0.6, 7)
        fit = fit_zeta(self._points(c, zeta, 1e-6, eps), 1e-6)
        assert fit.zeta == pytest.approx(zeta, rel=1e-6)

    def test_min_gap_drops_near_critical_points(self):
        eps = np.geomspace(1e-4, 0.5, 12)
        pts = self._points(1.0, 0.5, 1e-6, eps)
        fit = fit_zeta(pts, 1e-6, min_gap=1e-6 * 0.01)
        assert fit.n_points == int((eps > 0.01).sum())

    def test_requires_five_points(self):
        eps = np.geomspace(0.05, 0.5, 4)
        with pytest.raises(ValidationError, match="5"):
            fit_zeta(self._points(1.0, 0.5, 1e-6, eps), 1e-6)

    def test_rejects_wrong_sign(self):
        eps = np.geomspace(0.05, 0.5, 6)
        pts = [(1e-6 * (1 - e), 2.0 * e ** (+0.5)) for e in eps]
        with pytest.raises(ValidationError, match="not positive"):
            fit_zeta(pts, 1e-6)

    def test_ignores_unusable_points(self):
        eps = np.geomspace(0.05, 0.5, 6)
        pts = self._points(1.0, 0.5, 1e-6, eps)
        pts += [(2e-6, 1.0), (1e-6 * 0.9, None), (1e-6 * 0.8, math.inf)]
        fit = fit_zeta(pts, 1e-6)
        assert fit.n_points == 6
