"""Stepping kernels: numba-compiled hot loop with a pure-numpy twin.

Backend selection: environment variable QECHEAT_BACKEND ("numba" or
"numpy"). Default is numba when importable, otherwise numpy. Both kernels
implement the identical arithmetic; a parity test holds them together.

One step of the update map, synchronous from the pre-step field T:

    T'[i]   = T[i] + delta * lap[i]                    every site
    T'[0]  += alpha / T[0]^2        when the event accumulator fires
    T'[L-1]+= (gamma / T[L-1]^3) * n_fridge * (t0^2 - T[L-1]^2)

with closed ends (sites 0 and L-1 have a single neighbor) and the cooled
site clamped so the fridge never pulls it below t0. Event scheduling is a
fractional accumulator fed by f(T[0]) capped at one event per step.

Chunk status codes:
    0  completed the requested number of steps
    1  f >= 1 sustained for the debounce window (runaway)
    2  p_err reached p_th at the qubit site
    3  a site went non-positive or non-finite (instability)
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

STATUS_OK = 0
STATUS_RUNAWAY = 1
STATUS_THRESHOLD = 2
STATUS_UNSTABLE = 3

_EXPLODE_LIMIT = 1e30


def _step_chunk_py(T, n_steps, g0, acc, fsat_run, fsat_start,
                   alpha, gamma, delta, t0, n_fridge,
                   p0, tls_B, tls_n, qp_amp, qp_gap_kb,
                   p_th, half_dc, c_f, halt_perr, debounce,
                   stride,
                   samp_g, samp_tq, samp_tl, samp_tmean, samp_perr, samp_f):
    """Pure-numpy twin of the jit kernel. Same arguments, same returns."""
    L = T.shape[0]
    lap = np.empty(L)
    events = 0
    heat_sum = 0.0
    cool_sum = 0.0
    nsamp = 0
    cap = samp_g.shape[0]
    steps_done = 0

    for i in range(n_steps):
        g = g0 + i
        tq = T[0]

        # pre-step response at the qubit site
        perr = p0 + (tls_B * tq if tls_n == 1.0 else tls_B * tq**tls_n)
        if qp_amp > 0.0 and tq > 0.0:
            perr += qp_amp * math.exp(-qp_gap_kb / tq)
        if perr < 0.0:
            perr = 0.0
        elif perr > 1.0:
            perr = 1.0
        if perr >= halt_perr:
            return (STATUS_THRESHOLD, steps_done, acc, fsat_run, fsat_start,
                    events, heat_sum, cool_sum, nsamp, -1, g)

        pf = (perr / p_th) ** half_dc
        if pf > 1.0:
            pf = 1.0
        if pf >= 1.0:
            f_raw = math.inf
        else:
            f_raw = (pf / (1.0 - pf)) ** c_f

        if f_raw >= 1.0:
            if fsat_run == 0:
                fsat_start = g
            fsat_run += 1
            if fsat_run >= debounce:
                return (STATUS_RUNAWAY, steps_done, acc, fsat_run, fsat_start,
                        events, heat_sum, cool_sum, nsamp, -1, g)
        else:
            fsat_run = 0
            fsat_start = -1

        acc += f_raw if f_raw < 1.0 else 1.0
        deposit = 0.0
        if acc >= 1.0:
            deposit = alpha / (tq * tq)
            acc -= 1.0
            events += 1

        # synchronous diffusion from the pre-step field, closed ends
        lap[1:-1] = T[:-2] + T[2:] - 2.0 * T[1:-1]
        lap[0] = T[1] - T[0]
        lap[L - 1] = T[L - 2] - T[L - 1]
        Tn = T + delta * lap
        Tn[0] += deposit

        tl = T[L - 1]
        x_diff = Tn[L - 1]
        cool = (gamma / (tl * tl * tl)) * n_fridge * (t0 * t0 - tl * tl)
        tl_new = x_diff + cool
        if cool < 0.0:
            floor = x_diff if x_diff < t0 else t0
            if tl_new < floor:
                tl_new = floor
        Tn[L - 1] = tl_new

        ok = (Tn > 0.0) & (Tn < _EXPLODE_LIMIT)
        if not ok.all():
            bad = int(np.argmin(ok))
            return (STATUS_UNSTABLE, steps_done, acc, fsat_run, fsat_start,
                    events, heat_sum, cool_sum, nsamp, bad, g)

        T[:] = Tn
        steps_done += 1
        heat_sum += deposit
        cool_sum += tl_new - x_diff

        gn = g + 1
        if gn % stride == 0 and nsamp < cap:
            tq2 = T[0]
            perr2 = p0 + (tls_B * tq2 if tls_n == 1.0 else tls_B * tq2**tls_n)
            if qp_amp > 0.0 and tq2 > 0.0:
                perr2 += qp_amp * math.exp(-qp_gap_kb / tq2)
            if perr2 < 0.0:
                perr2 = 0.0
            elif perr2 > 1.0:
                perr2 = 1.0
            pf2 = (perr2 / p_th) ** half_dc
            if pf2 > 1.0:
                pf2 = 1.0
            f2 = math.inf if pf2 >= 1.0 else (pf2 / (1.0 - pf2)) ** c_f
            # sequential sum, matching the compiled twin bit for bit
            total = 0.0
            for k in range(L):
                total += T[k]
            samp_g[nsamp] = gn
            samp_tq[nsamp] = tq2
            samp_tl[nsamp] = T[L - 1]
            samp_tmean[nsamp] = total / L
            samp_perr[nsamp] = perr2
            samp_f[nsamp] = f2
            nsamp += 1

    return (STATUS_OK, steps_done, acc, fsat_run, fsat_start,
            events, heat_sum, cool_sum, nsamp, -1, -1)


def _step_chunk_loops(T, n_steps, g0, acc, fsat_run, fsat_start,
                      alpha, gamma, delta, t0, n_fridge,
                      p0, tls_B, tls_n, qp_amp, qp_gap_kb,
                      p_th, half_dc, c_f, halt_perr, debounce,
                      stride,
                      samp_g, samp_tq, samp_tl, samp_tmean, samp_perr, samp_f):
    # scalar-loop variant; compiled by numba below
    L = T.shape[0]
    lap = np.empty(L)
    Tn = np.empty(L)
    events = 0
    heat_sum = 0.0
    cool_sum = 0.0
    nsamp = 0
    cap = samp_g.shape[0]
    steps_done = 0

    for i in range(n_steps):
        g = g0 + i
        tq = T[0]

        perr = p0 + (tls_B * tq if tls_n == 1.0 else tls_B * tq**tls_n)
        if qp_amp > 0.0 and tq > 0.0:
            perr += qp_amp * math.exp(-qp_gap_kb / tq)
        if perr < 0.0:
            perr = 0.0
        elif perr > 1.0:
            perr = 1.0
        if perr >= halt_perr:
            return (STATUS_THRESHOLD, steps_done, acc, fsat_run, fsat_start,
                    events, heat_sum, cool_sum, nsamp, -1, g)

        pf = (perr / p_th) ** half_dc
        if pf > 1.0:
            pf = 1.0
        if pf >= 1.0:
            f_raw = math.inf
        else:
            f_raw = (pf / (1.0 - pf)) ** c_f

        if f_raw >= 1.0:
            if fsat_run == 0:
                fsat_start = g
            fsat_run += 1
            if fsat_run >= debounce:
                return (STATUS_RUNAWAY, steps_done, acc, fsat_run, fsat_start,
                        events, heat_sum, cool_sum, nsamp, -1, g)
        else:
            fsat_run = 0
            fsat_start = -1

        acc += f_raw if f_raw < 1.0 else 1.0
        deposit = 0.0
        if acc >= 1.0:
            deposit = alpha / (tq * tq)
            acc -= 1.0
            events += 1

        for k in range(1, L - 1):
            lap[k] = T[k - 1] + T[k + 1] - 2.0 * T[k]
        lap[0] = T[1] - T[0]
        lap[L - 1] = T[L - 2] - T[L - 1]
        for k in range(L):
            Tn[k] = T[k] + delta * lap[k]
        Tn[0] += deposit

        tl = T[L - 1]
        x_diff = Tn[L - 1]
        cool = (gamma / (tl * tl * tl)) * n_fridge * (t0 * t0 - tl * tl)
        tl_new = x_diff + cool
        if cool < 0.0:
            floor = x_diff if x_diff < t0 else t0
            if tl_new < floor:
                tl_new = floor
        Tn[L - 1] = tl_new

        bad = -1
        for k in range(L):
            v = Tn[k]
            if not (v > 0.0 and v < _EXPLODE_LIMIT):
                bad = k
                break
        if bad >= 0:
            return (STATUS_UNSTABLE, steps_done, acc, fsat_run, fsat_start,
                    events, heat_sum, cool_sum, nsamp, bad, g)

        for k in range(L):
            T[k] = Tn[k]
        steps_done += 1
        heat_sum += deposit
        cool_sum += tl_new - x_diff

        gn = g + 1
        if gn % stride == 0 and nsamp < cap:
            tq2 = T[0]
            perr2 = p0 + (tls_B * tq2 if tls_n == 1.0 else tls_B * tq2**tls_n)
            if qp_amp > 0.0 and tq2 > 0.0:
                perr2 += qp_amp * math.exp(-qp_gap_kb / tq2)
            if perr2 < 0.0:
                perr2 = 0.0
            elif perr2 > 1.0:
                perr2 = 1.0
            pf2 = (perr2 / p_th) ** half_dc
            if pf2 > 1.0:
                pf2 = 1.0
            f2 = math.inf if pf2 >= 1.0 else (pf2 / (1.0 - pf2)) ** c_f
            total = 0.0
            for k in range(L):
                total += T[k]
            samp_g[nsamp] = gn
            samp_tq[nsamp] = tq2
            samp_tl[nsamp] = T[L - 1]
            samp_tmean[nsamp] = total / L
            samp_perr[nsamp] = perr2
            samp_f[nsamp] = f2
            nsamp += 1

    return (STATUS_OK, steps_done, acc, fsat_run, fsat_start,
            events, heat_sum, cool_sum, nsamp, -1, -1)


def _pick_backend():
    requested = os.environ.get("QECHEAT_BACKEND", "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ValueError(
            f"QECHEAT_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numpy":
        return "numpy", _step_chunk_py
    try:
        import numba
    except ImportError:
        if requested == "numba":
            raise
        warnings.warn("numba unavailable; falling back to the numpy kernel "
                      "(set QECHEAT_BACKEND=numpy to silence)")
        return "numpy", _step_chunk_py
    jitted = numba.njit(cache=True, fastmath=False)(_step_chunk_loops)
    return "numba", jitted


BACKEND, step_chunk = _pick_backend()


def get_backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND


def kernel_for(backend: str):
    """Fetch a specific kernel implementation (for benchmarks and tests)."""
    if backend == "numpy":
        return _step_chunk_py
    if backend == "numba":
        import numba
        return numba.njit(cache=True, fastmath=False)(_step_chunk_loops)
    raise ValueError(f"unknown backend {backend!r}")
