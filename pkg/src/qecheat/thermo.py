"""Temperature-to-error response and the correction-event frequency law.

Chain: T -> physical error rate p_err -> logical failure probability p_f
-> expected correction events per step f. Each stage is monotone
nondecreasing in temperature, which the phase analysis relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import K_B
from .errors import ValidationError


@dataclass(frozen=True)
class ErrorModel:
    """Physical error rate vs temperature.

    p_err(T) = clamp(p0 + qp_amplitude * exp(-qp_gap / (k_B T)) + tls_B * T^tls_n)

    Defaults: pure power law 0.1 * T, which crosses the 1% threshold at
    exactly 100 mK. The quasiparticle term ships disabled.
    """

    p0: float = 0.0
    tls_B: float = 0.1
    tls_n: float = 1.0
    qp_amplitude: float = 0.0
    qp_gap: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p0 <= 1.0):
            raise ValidationError("p0 must be in [0, 1]")
        if self.tls_B < 0:
            raise ValidationError("tls_B must be >= 0")
        if self.tls_n <= 0:
            raise ValidationError("tls_n must be positive")
        if self.qp_amplitude < 0:
            raise ValidationError("qp_amplitude must be >= 0")
        if self.qp_gap < 0:
            raise ValidationError("qp_gap must be >= 0")


@dataclass(frozen=True)
class QecPolicy:
    """Surface-code failure law and correction-frequency response."""

    p_th: float = 0.01
    code_distance: int = 27
    c_f: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 < self.p_th < 1.0):
            raise ValidationError("p_th must be in (0, 1)")
        if self.code_distance < 3:
            raise ValidationError("code_distance must be >= 3")
        if self.c_f <= 0:
            raise ValidationError("c_f must be positive")


def heat_capacity(debye_A: float, temp: float) -> float:
    """Debye T^3 heat capacity C(T) = A * T^3 [J/K]."""
    if temp < 0:
        raise ValidationError("temperature must be >= 0")
    return debye_A * temp**3


def p_err(model: ErrorModel, temp: float) -> float:
    """Physical error rate at temperature temp [K], clamped to [0, 1]."""
    if temp < 0:
        raise ValidationError("temperature must be >= 0")
    p = model.p0 + model.tls_B * temp**model.tls_n
    if model.qp_amplitude > 0.0 and temp > 0.0:
        p += model.qp_amplitude * math.exp(-model.qp_gap / (K_B * temp))
    return min(max(p, 0.0), 1.0)


def logical_failure(policy: QecPolicy, p: float) -> float:
    """Logical failure probability p_f = min((p/p_th)^(d/2), 1)."""
    if not (0.0 <= p <= 1.0):
        raise ValidationError("p must be in [0, 1]")
    if p == 0.0:
        return 0.0
    return min((p / policy.p_th) ** (policy.code_distance / 2.0), 1.0)


def qec_frequency(policy: QecPolicy, p_f: float) -> float:
    """Expected correction events per step, f = (p_f / (1 - p_f))^c_f.

    Returns +inf at p_f = 1 (the odds diverge); the stepper caps the applied
    rate at one event per step and raises its runaway flag instead of
    propagating the non-finite value.
    """
    if not (0.0 <= p_f <= 1.0):
        raise ValidationError("p_f must be in [0, 1]")
    if p_f >= 1.0:
        return math.inf
    if p_f == 0.0:
        return 0.0
    return (p_f / (1.0 - p_f)) ** policy.c_f


def frequency_at_temp(model: ErrorModel, policy: QecPolicy, temp: float) -> float:
    """Convenience composition f(p_f(p_err(T)))."""
    return qec_frequency(policy, logical_failure(policy, p_err(model, temp)))


def runaway_temperature(model: ErrorModel, policy: QecPolicy,
                        t_hi: float = 10.0) -> float:
    """Temperature at which f reaches one event per step (p_f = 1/2).

    Solved by bisection on the monotone p_err(T); used by the accelerated
    runner to land extrapolation jumps exactly on the saturation point.
    Returns +inf if even t_hi does not saturate.
    """
    target = policy.p_th * 0.5 ** (2.0 / policy.code_distance)
    if p_err(model, 0.0) >= target:
        return 0.0
    if p_err(model, t_hi) < target:
        return math.inf
    lo, hi = 0.0, t_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p_err(model, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)
