"""Thermal feedback simulator for error-corrected qubit lattices.

Couples a 1D phonon temperature field to the waste heat of quantum
error correction: correction events deposit erasure work at the hot end
while a refrigerator pins the far end, and the competition decides
whether logical errors stay bounded.
"""

__version__ = "0.1.0"

from .coefficients import (CflReport, Coefficients, PhysicalParams,
                           check_cfl, derive_alpha, derive_coefficients,
                           derive_debye_A, derive_delta, derive_diffusivity,
                           derive_gamma)
from .config import (RunConfig, build_run_setup, canonical_yaml,
                     config_digest, load_config)
from .constants import K_B
from .errors import (BracketError, ConfigError, NumericalInstabilityError,
                     QecHeatError, ValidationError)
from .lattice import (LatticeState, NumericsConfig, QuasilinearConfig,
                      RunResult, RunSetup, TrajectoryRecord, init_state,
                      run, step)
from .phase import (CriticalFit, CriticalPoint, CriticalResult, PhaseOutcome,
                    classify, detect_plateau, detect_tau, find_gamma_c,
                    fit_zeta, run_critical, simulate_trajectory)
from .sweep import AxisSpec, PhaseGrid, ScanResult, SweepSpec, run_sweep, \
    scan_transition
from .thermo import (ErrorModel, QecPolicy, frequency_at_temp, heat_capacity,
                     logical_failure, p_err, qec_frequency,
                     runaway_temperature)

__all__ = [
    "K_B", "__version__",
    "PhysicalParams", "Coefficients", "CflReport",
    "derive_debye_A", "derive_diffusivity", "derive_delta", "derive_gamma",
    "derive_alpha", "derive_coefficients", "check_cfl",
    "ErrorModel", "QecPolicy", "heat_capacity", "p_err", "logical_failure",
    "qec_frequency", "frequency_at_temp", "runaway_temperature",
    "LatticeState", "NumericsConfig", "QuasilinearConfig", "RunSetup",
    "RunResult", "TrajectoryRecord", "init_state", "step", "run",
    "PhaseOutcome", "CriticalPoint", "CriticalFit", "CriticalResult",
    "classify", "simulate_trajectory", "detect_plateau", "detect_tau",
    "find_gamma_c", "fit_zeta", "run_critical",
    "AxisSpec", "SweepSpec", "PhaseGrid", "ScanResult", "run_sweep",
    "scan_transition",
    "RunConfig", "load_config", "build_run_setup", "canonical_yaml",
    "config_digest",
    "QecHeatError", "ValidationError", "ConfigError",
    "NumericalInstabilityError", "BracketError",
]
