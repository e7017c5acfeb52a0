import numpy as np
import pytest

from disentsim.qcore import TWO_QUBITS, QuantumState


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


BELL = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)

# delta = 3/4 for this one; several expected values below derive from it
TILTED = np.array([np.sqrt(3.0) / 2.0, 0.0, 0.0, 0.5], dtype=complex)


def bell_state() -> QuantumState:
    return QuantumState.pure(BELL, TWO_QUBITS)


def tilted_state() -> QuantumState:
    return QuantumState.pure(TILTED, TWO_QUBITS)


def random_product_psi(rng) -> np.ndarray:
    from disentsim.qcore import random_pure_state

    return np.kron(random_pure_state(2, rng), random_pure_state(2, rng))


def analytic_driven_spin_bloch(delta, omega1, damping) -> np.ndarray:
    """Closed-form steady-state Bloch vector of a driven, damped spin.

    Independent oracle used against the numerical steady-state solver:
    dispersive, absorptive and longitudinal components of the standard
    saturation line shape expressed through T1, T2 and the equilibrium
    polarization.
    """
    t1, t2, pz0 = damping.t1, damping.t2, damping.p_z0
    den = 1.0 + delta**2 * t2**2 + omega1**2 * t1 * t2
    return np.array([
        delta * omega1 * t2**2 * pz0 / den,
        -omega1 * t2 * pz0 / den,
        (1.0 + delta**2 * t2**2) * pz0 / den,
    ])
