import numpy as np
import pytest

from lindblad_ft.hilbert import DensityMatrix, Operator
from lindblad_ft.model import build_two_spin_model

# benchmark diagonal initial state, in the {uu, ud, du, dd} basis
DIAG_WEIGHTS = (0.4, 0.275, 0.175, 0.15)


@pytest.fixture(scope="session")
def model_equilibrium():
    """J=0, equal temperatures: the classical equilibrium benchmark."""
    return build_two_spin_model(J=0.0, h0=0.2, h1=0.2, t_f=15.0, T_a=1.0, T_b=1.0, g=0.1)


@pytest.fixture(scope="session")
def model_local():
    """J=0.1, T_b=1.2: local master equation with a temperature bias."""
    return build_two_spin_model(J=0.1, h0=0.2, h1=0.2, t_f=15.0, T_a=1.0, T_b=1.2, g=0.1)


@pytest.fixture(scope="session")
def model_driven():
    """J=0.2 with the linear field ramp h: 0 -> 0.4 over t_f=15."""
    return build_two_spin_model(J=0.2, h0=0.0, h1=0.4, t_f=15.0, T_a=1.0, T_b=1.2, g=0.1)


@pytest.fixture(scope="session")
def rho_diagonal():
    return DensityMatrix.from_diagonal(DIAG_WEIGHTS)


@pytest.fixture(scope="session")
def rho_nondiagonal():
    from lindblad_ft.harness import nondiagonal_initial_state
    return nondiagonal_initial_state(0.2)


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (m + m.conj().T)


def random_density(rng: np.random.Generator, d: int) -> DensityMatrix:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(Operator(rho))
