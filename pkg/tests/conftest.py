import dataclasses

import pytest

from qecheat import (NumericsConfig, PhysicalParams, QuasilinearConfig,
                     RunSetup, derive_coefficients)


@pytest.fixture(scope="session")
def default_params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def default_coeffs(default_params):
    return derive_coefficients(default_params)


@pytest.fixture(scope="session")
def toy_setup_factory(default_coeffs):
    """Reduced operating point with a fast, sharp transition."""

    def make(gamma, max_steps=30_000_000, **numerics_kw):
        co = dataclasses.replace(default_coeffs, alpha=1e-6, delta=0.5,
                                 gamma=gamma)
        kw = dict(max_steps=max_steps, max_seconds=None,
                  sampling_stride=32, plateau_window_samples=10_000,
                  plateau_rel_tol=1.5e-3,
                  quasilinear=QuasilinearConfig(enabled=False))
        kw.update(numerics_kw)
        return RunSetup(coefficients=co, numerics=NumericsConfig(**kw))

    return make
