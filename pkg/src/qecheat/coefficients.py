"""Hardware parameters and the derived update-map coefficients.

The simulator's discrete update map is controlled by three dimensionless-ish
coefficients derived from hardware numbers:

    alpha  [K^3]  heating kick scale: one error-correction event deposits
                  alpha / T^2 kelvin at the qubit-end site
    gamma  [K^2]  refrigerator coupling: the fridge-end site changes by
                  (gamma / T^3) * n_fridge * (T0^2 - T^2) per step
    delta  [-]    diffusion number: J * dt / a^2, with J = lambda * c / 3

plus the Debye heat-capacity prefactor A [J/K^4] (C(T) = A T^3) that both
alpha and gamma divide by. All inputs and outputs are SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import K_B
from .errors import ValidationError

# Explicit scheme: strictly stable below 1/2 for the interior stencil.
# The band up to 0.505 is flagged "warn", not an error: marginally
# supercritical settings are common in published operating points and the
# caller may want short runs there anyway.
DELTA_PASS_LIMIT = 0.5
DELTA_WARN_LIMIT = 0.505


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


@dataclass(frozen=True)
class PhysicalParams:
    """Hardware description of the cold stage and qubit array.

    Attributes
    ----------
    lambda_mfp : float
        Phonon mean free path [m] (typically chip-thickness limited).
    sound_speed : float
        Mean phonon (sound) speed [m/s].
    lattice_spacing : float
        Coarse-graining cell size a [m].
    time_step : float
        Simulation time step dt [s].
    debye_temp : float
        Debye temperature of the substrate [K].
    atom_count : float
        Number of atoms in one coarse-graining cell.
    cooling_power_coeff : float
        Refrigerator power-law coefficient [W/K^2]; cooling power is
        coeff * (T^2 - T0^2). Zero disables cooling.
    base_temp : float
        Refrigerator base temperature T0 [K].
    n_ancilla : float
        Ancilla qubits erased per correction event. Zero disables heating.
    n_cooled_sites : int
        Number of lattice sites sharing the fridge power.
    n_fridge_neighbors : int
        Fridge contacts adjacent to the cooled end site.
    dimension : int
        Lattice dimension; only 1 is supported.
    num_sites : int
        Lattice length L (sites), >= 2.
    heating_ln2 : bool
        Include the ln 2 Landauer factor in alpha (default True). The
        published value of alpha matches the formula without it; the derive
        report shows both.
    end_placement : bool
        Qubits sit at a lattice end, which halves the 2d neighbor sharing
        in alpha's denominator (default True).
    """

    lambda_mfp: float = 0.5e-3
    sound_speed: float = 5718.0
    lattice_spacing: float = 1e-6
    time_step: float = 0.5246e-12
    debye_temp: float = 636.0
    atom_count: float = 2.5e27
    cooling_power_coeff: float = 0.04
    base_temp: float = 0.010
    n_ancilla: float = 2e7
    n_cooled_sites: int = 1
    n_fridge_neighbors: int = 1
    dimension: int = 1
    num_sites: int = 50
    heating_ln2: bool = True
    end_placement: bool = True

    def __post_init__(self) -> None:
        _require(self.dimension == 1,
                 f"dimension must be 1 (got {self.dimension}); higher-"
                 "dimensional lattices are not supported")
        _require(self.lambda_mfp > 0, "lambda_mfp must be positive")
        _require(self.sound_speed > 0, "sound_speed must be positive")
        _require(self.lattice_spacing > 0, "lattice_spacing must be positive")
        _require(self.time_step > 0, "time_step must be positive")
        _require(self.debye_temp > 0, "debye_temp must be positive")
        _require(self.atom_count > 0, "atom_count must be positive")
        _require(self.base_temp > 0, "base_temp must be positive")
        _require(self.base_temp < self.debye_temp,
                 "base_temp must be below debye_temp for the T^3 "
                 "heat-capacity regime to hold")
        _require(self.cooling_power_coeff >= 0,
                 "cooling_power_coeff must be >= 0")
        _require(self.n_ancilla >= 0, "n_ancilla must be >= 0")
        _require(self.n_cooled_sites >= 1, "n_cooled_sites must be >= 1")
        _require(self.n_fridge_neighbors >= 0,
                 "n_fridge_neighbors must be >= 0")
        _require(self.num_sites >= 2, "num_sites must be >= 2")
        for name in ("lambda_mfp", "sound_speed", "lattice_spacing",
                     "time_step", "debye_temp", "atom_count",
                     "cooling_power_coeff", "base_temp", "n_ancilla"):
            _require(math.isfinite(getattr(self, name)),
                     f"{name} must be finite")


@dataclass(frozen=True)
class Coefficients:
    """Derived update-map coefficients (see module docstring for units)."""

    alpha: float
    gamma: float
    delta: float
    debye_A: float
    diffusivity: float

    def __post_init__(self) -> None:
        for name in ("alpha", "gamma", "delta", "debye_A", "diffusivity"):
            v = getattr(self, name)
            _require(math.isfinite(v) and v >= 0,
                     f"coefficient {name} must be finite and >= 0")


def derive_debye_A(atom_count: float, debye_temp: float) -> float:
    """Debye heat-capacity prefactor A = (12 pi^4 / 5) N k_B / Theta^3."""
    _require(atom_count > 0, "atom_count must be positive")
    _require(debye_temp > 0, "debye_temp must be positive")
    return (12.0 * math.pi**4 / 5.0) * atom_count * K_B / debye_temp**3


def derive_diffusivity(lambda_mfp: float, sound_speed: float) -> float:
    """Kinetic-theory phonon diffusivity J = lambda * c / 3 [m^2/s]."""
    _require(lambda_mfp >= 0, "lambda_mfp must be >= 0")
    _require(sound_speed >= 0, "sound_speed must be >= 0")
    return lambda_mfp * sound_speed / 3.0


def derive_delta(lambda_mfp: float, sound_speed: float, time_step: float,
                 lattice_spacing: float) -> float:
    """Diffusion number delta = J dt / a^2. dt = 0 is allowed (no diffusion)."""
    _require(time_step >= 0, "time_step must be >= 0")
    _require(lattice_spacing > 0, "lattice_spacing must be positive")
    J = derive_diffusivity(lambda_mfp, sound_speed)
    return J * time_step / lattice_spacing**2


def derive_gamma(cooling_power_coeff: float, time_step: float,
                 debye_A: float, n_cooled_sites: int) -> float:
    """Fridge coupling gamma = coeff * dt / (A * n_cooled) [K^2]."""
    _require(cooling_power_coeff >= 0, "cooling_power_coeff must be >= 0")
    _require(time_step >= 0, "time_step must be >= 0")
    _require(debye_A > 0, "debye_A must be positive")
    _require(n_cooled_sites >= 1, "n_cooled_sites must be >= 1")
    return cooling_power_coeff * time_step / (debye_A * n_cooled_sites)


def derive_alpha(n_ancilla: float, dimension: int, debye_A: float,
                 heating_ln2: bool = True, end_placement: bool = True) -> float:
    """Heating kick scale alpha [K^3].

    alpha = n_ancilla * k_B * [ln 2] / (share * dimension * A), where the
    neighbor share is 2 for a bulk qubit column and 1 when the qubits sit at
    a lattice end (all the heat enters one site).
    """
    _require(n_ancilla >= 0, "n_ancilla must be >= 0")
    _require(dimension >= 1, "dimension must be >= 1")
    _require(debye_A > 0, "debye_A must be positive")
    share = 1.0 if end_placement else 2.0
    ln2 = math.log(2.0) if heating_ln2 else 1.0
    return n_ancilla * K_B * ln2 / (share * dimension * debye_A)


def derive_coefficients(params: PhysicalParams) -> Coefficients:
    """Derive the full coefficient set from hardware parameters."""
    A = derive_debye_A(params.atom_count, params.debye_temp)
    return Coefficients(
        alpha=derive_alpha(params.n_ancilla, params.dimension, A,
                           params.heating_ln2, params.end_placement),
        gamma=derive_gamma(params.cooling_power_coeff, params.time_step,
                           A, params.n_cooled_sites),
        delta=derive_delta(params.lambda_mfp, params.sound_speed,
                           params.time_step, params.lattice_spacing),
        debye_A=A,
        diffusivity=derive_diffusivity(params.lambda_mfp, params.sound_speed),
    )


@dataclass(frozen=True)
class CflReport:
    """Stability check of the explicit diffusion step.

    verdict is "pass" (delta < 0.5), "warn" (0.5 <= delta <= 0.505, runs are
    allowed but marginal), or "fail" (delta > 0.505).
    """

    time_step: float
    bound: float
    delta: float
    verdict: str


def check_cfl(params: PhysicalParams) -> CflReport:
    """Compare the configured time step against the diffusion bound a^2/2J."""
    J = derive_diffusivity(params.lambda_mfp, params.sound_speed)
    bound = params.lattice_spacing**2 / (2.0 * J)
    delta = derive_delta(params.lambda_mfp, params.sound_speed,
                         params.time_step, params.lattice_spacing)
    if delta < DELTA_PASS_LIMIT:
        verdict = "pass"
    elif delta <= DELTA_WARN_LIMIT:
        verdict = "warn"
    else:
        verdict = "fail"
    return CflReport(time_step=params.time_step, bound=bound,
                     delta=delta, verdict=verdict)
