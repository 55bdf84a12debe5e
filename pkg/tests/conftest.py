import math

import numpy as np
import pytest

from volterraveritas.kernels import MemoryKernel
from volterraveritas.solver import Forcing, VolterraProblem
from volterraveritas.spectral import SpectralOperator


@pytest.fixture
def dirichlet8():
    return SpectralOperator.dirichlet(8)


@pytest.fixture
def dirichlet16():
    return SpectralOperator.dirichlet(16)


@pytest.fixture
def unit_exponential():
    return MemoryKernel.exponential(1.0, 1.0)


@pytest.fixture
def kernel_grid():
    return [MemoryKernel.exponential(1.0, 1.0), MemoryKernel.exponential(2.0, 3.0),
            MemoryKernel.monomial_exponential(1.0, 1.0, 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_problem():
    """Factory for small Dirichlet problems; keyword arguments override the defaults below."""

    def build(modes=8, alpha=0.5, kernel=None, forcing=None, horizon=0.5, step=1e-3, seed=None, bandwidth=None,
              **extra):
        op = SpectralOperator.dirichlet(modes)
        kernel = kernel or MemoryKernel.exponential(1.0, 1.0)
        if forcing is None:
            if seed is None:
                forcing = Forcing.constant(modes, 1)
            else:
                forcing = Forcing.random(modes, np.random.default_rng(seed), bandwidth)
        return VolterraProblem(op, alpha, kernel, forcing, horizon, step, **extra)

    return build
