"""Dense complex linear algebra on small Hilbert spaces.

Everything here operates on plain ``numpy`` arrays (``complex128``); operators
and density matrices are ordinary 2-D arrays.  Units follow the convention
hbar = k_B = 1, with all rates and frequencies expressed relative to the
reference Larmor frequency of the undriven spin.

The spectral helpers implement the entropy-like functionals that drive the
deranking dynamics: for a PSD matrix A with positive trace,

    entropy(A)  = -Tr[(A/TrA) log(A/TrA)]          (nats, 0 log 0 -> 0)
    rank_ratio  = entropy(A) / log(D)              (in [0, 1])

Bare matrix logarithms are regularized by clamping eigenvalues at
``floor * max(eigenvalue)``.  The clamp matters because the deranking
operators take log of matrices that are exactly singular on product states;
the clamped eigendirections are annihilated by the accompanying factors, so
the floor value never leaks into physical drifts (verified by tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ComplexMatrix = np.ndarray

#: Default relative eigenvalue floor used inside matrix logarithms.
DEFAULT_LOG_FLOOR = 1e-13

PURE_NORM_TOL = 1e-10
MIXED_TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-12
MIN_EIGENVALUE_TOL = -1e-8


class DimensionError(ValueError):
    """Operands have incompatible or invalid shapes."""


class HermiticityError(ValueError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class PSDViolationError(ValueError):
    """A matrix required to be positive semi-definite has a negative eigenvalue."""


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def as_complex_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def herm_residual(a: np.ndarray) -> float:
    """max|A - A^dag|, the absolute deviation from Hermiticity."""
    return float(np.abs(a - a.conj().T).max())


@dataclass(frozen=True)
class Factorization:
    """Tensor factorization (d_a, d_b, d_c) of a Hilbert space.

    The third slot is a spectator subsystem; d_c = 1 means the space is a
    plain bipartite product.
    """

    d_a: int
    d_b: int
    d_c: int = 1

    def __post_init__(self):
        if self.d_a < 2 or self.d_b < 2:
            raise DimensionError("subsystems a and b need dimension >= 2")
        if self.d_c < 1:
            raise DimensionError("spectator dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.d_a * self.d_b * self.d_c


TWO_QUBITS = Factorization(2, 2, 1)


@dataclass
class QuantumState:
    """A pure state vector or a density operator, tagged with its factorization.

    Use the ``pure``/``mixed`` constructors; they validate normalization,
    Hermiticity and positivity at the documented tolerances.
    """

    factor: Factorization
    psi: np.ndarray | None = None
    rho: np.ndarray | None = None

    @classmethod
    def pure(cls, psi, factor: Factorization) -> "QuantumState":
        v = np.asarray(psi, dtype=complex).reshape(-1)
        if v.size != factor.dim:
            raise DimensionError(
                f"state vector length {v.size} != factorization dim {factor.dim}"
            )
        norm2 = float(np.vdot(v, v).real)
        if abs(norm2 - 1.0) > PURE_NORM_TOL:
            raise ValueError(f"state vector not normalized: <psi|psi> = {norm2!r}")
        return cls(factor=factor, psi=v)

    @classmethod
    def mixed(cls, rho, factor: Factorization) -> "QuantumState":
        m = as_complex_matrix(rho)
        if m.shape != (factor.dim, factor.dim):
            raise DimensionError(
                f"density matrix shape {m.shape} != ({factor.dim}, {factor.dim})"
            )
        tr = float(m.trace().real)
        if abs(tr - 1.0) > MIXED_TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        scale = max(float(np.abs(m).max()), 1.0)
        if herm_residual(m) > HERMITICITY_TOL * scale:
            raise HermiticityError("density matrix is not Hermitian")
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w[0] < MIN_EIGENVALUE_TOL:
            raise PSDViolationError(f"density matrix has eigenvalue {w[0]!r}")
        return cls(factor=factor, rho=m)

    @property
    def is_pure(self) -> bool:
        return self.psi is not None

    @property
    def dim(self) -> int:
        return self.factor.dim

    def density(self) -> np.ndarray:
        """Density matrix; pure states are promoted to |psi><psi|."""
        if self.rho is not None:
            return self.rho
        return np.outer(self.psi, self.psi.conj())


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (dimensions multiply, traces multiply)."""
    return np.kron(a, b)


def partial_trace_rho(rho: np.ndarray, factor: Factorization, keep: str) -> np.ndarray:
    """Reduced density matrix of subsystem ``keep`` ('a' or 'b')."""
    da, db, dc = factor.d_a, factor.d_b, factor.d_c
    r = as_complex_matrix(rho).reshape(da, db, dc, da, db, dc)
    if keep == "a":
        return np.einsum("ibcjbc->ij", r)
    if keep == "b":
        return np.einsum("aicajc->ij", r)
    raise ValueError(f"unknown subsystem label {keep!r} (expected 'a' or 'b')")


def partial_trace(state: QuantumState, keep: str) -> np.ndarray:
    return partial_trace_rho(state.density(), state.factor, keep)


def herm_eig(a: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, A = V diag(w) V^dag.

    The input is symmetrized as (A + A^dag)/2 before decomposition to strip
    integrator round-off; inputs that are non-Hermitian beyond ``tol``
    (relative to max|A|) are rejected.
    """
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    scale = max(float(np.abs(m).max()), 1.0)
    if herm_residual(m) > tol * scale:
        raise HermiticityError(f"matrix is not Hermitian within {tol!r}")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def _clamped_log(w: np.ndarray, floor: float) -> np.ndarray:
    wmax = float(np.max(w)) if w.size else 0.0
    cut = floor * (wmax if wmax > 0.0 else 1.0)
    return np.log(np.maximum(w, cut))


def spectral_log(a: np.ndarray, floor: float = DEFAULT_LOG_FLOOR) -> np.ndarray:
    """Matrix logarithm of a Hermitian PSD matrix with eigenvalue flooring.

    Eigenvalues are clamped at ``floor`` times the largest eigenvalue before
    taking the log, which keeps the result finite on singular inputs.
    """
    w, v = herm_eig(a)
    scale = max(float(np.abs(w).max()), 1.0)
    if w[0] < -1e-8 * scale:
        raise PSDViolationError(f"matrix has negative eigenvalue {w[0]!r}")
    lw = _clamped_log(np.maximum(w, 0.0), floor)
    return (v * lw) @ v.conj().T


def entropy_functional(a: np.ndarray) -> float:
    """Spectral entropy -Tr[(A/TrA) log(A/TrA)] in nats, with 0 log 0 -> 0."""
    w, _ = herm_eig(a)
    scale = max(float(np.abs(w).max()), 1.0)
    if w[0] < -1e-8 * scale:
        raise PSDViolationError(f"matrix has negative eigenvalue {w[0]!r}")
    tr = float(w.sum())
    if tr <= 0.0:
        raise ValueError("entropy functional needs a positive trace")
    p = np.maximum(w, 0.0) / tr
    nz = p > 0.0
    return float(-(p[nz] * np.log(p[nz])).sum())


def normalized_rank(a: np.ndarray) -> float:
    """Spectral entropy divided by log(D): 0 for rank one, 1 for maximal mixing."""
    d = as_complex_matrix(a).shape[0]
    if d < 2:
        raise DimensionError("normalized rank needs dimension >= 2")
    return entropy_functional(a) / math.log(d)


def expectation(state: QuantumState | np.ndarray, obs: np.ndarray) -> float:
    """Real expectation value Tr(rho O) of a Hermitian observable."""
    rho = state.density() if isinstance(state, QuantumState) else as_complex_matrix(state)
    o = as_complex_matrix(obs)
    if rho.shape != o.shape:
        raise DimensionError(f"dimension mismatch: state {rho.shape}, observable {o.shape}")
    val = complex(np.einsum("ij,ji->", o, rho))
    limit = 1e-10 * max(1.0, float(np.abs(o).max()) * float(np.abs(rho).max()) * o.shape[0])
    if abs(val.imag) > limit:
        raise HermiticityError(f"expectation has imaginary residue {val.imag!r}")
    return float(val.real)


# ---------------------------------------------------------------------------
# Random objects for tests and Monte Carlo checks.


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random normalized state vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full(ish)-rank density matrix from a Ginibre factor."""
    k = rank or dim
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    return rho / rho.trace()


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase-fixed R)."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph
