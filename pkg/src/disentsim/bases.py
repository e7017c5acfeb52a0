"""Operator bases: generalized Gell-Mann sets, the bipartite observable grid,
Bloch matrices, and Weyl (clock-and-shift) operators.

Conventions used throughout:

* Gell-Mann matrices are ordered symmetric pairs first (lexicographic),
  then antisymmetric pairs, then diagonal matrices; for d = 2 this is
  exactly (sigma_x, sigma_y, sigma_z).  They satisfy Tr(l l')/2 = delta.
* The bipartite grid G[a, b] = Gamma_a (x) Gamma_b uses the scaled elements
  Gamma_0 = 2^(1/4)/sqrt(d) * I and Gamma_l = 2^(-1/4) lambda_l, so the full
  grid is orthonormal in the same Tr(G G')/2 sense and traceless away from
  (0, 0).
* All index origins are 0-based.  Extraction of physical single-spin Bloch
  vectors rescales grid expectations by sqrt(2) so that |k| <= 1 and
  k_z = -1/(2 n0 + 1) for a thermal spin (the grid normalization stores
  sigma expectations divided by sqrt(2)).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qcore import (
    DimensionError,
    Factorization,
    QuantumState,
    as_complex_matrix,
    kron,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class GellMannSet:
    """The d^2 - 1 traceless Hermitian generators for dimension d."""

    dim: int
    matrices: tuple[np.ndarray, ...]

    def stack(self) -> np.ndarray:
        return np.stack(self.matrices)


@lru_cache(maxsize=None)
def gell_mann(d: int) -> GellMannSet:
    """Generalized Gell-Mann set for a d-level system.

    Entries are 0, +-1, +-i and real diagonal normalization factors; the
    orthogonality relation Tr(l l')/2 = delta holds exactly.
    """
    if d < 2:
        raise DimensionError("Gell-Mann set needs dimension >= 2")
    mats: list[np.ndarray] = []
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = 1.0
        m[k, j] = 1.0
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        mats.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        coeff = np.sqrt(2.0 / (l * (l + 1)))
        for i in range(l):
            m[i, i] = coeff
        m[l, l] = -l * coeff
        mats.append(m)
    for m in mats:
        m.setflags(write=False)
    return GellMannSet(dim=d, matrices=tuple(mats))


def _gamma_elements(d: int) -> list[np.ndarray]:
    """Scaled subsystem basis [Gamma_0, Gamma_1, ...] for one factor."""
    g0 = (2.0 ** 0.25 / np.sqrt(d)) * np.eye(d, dtype=complex)
    return [g0] + [(2.0 ** -0.25) * lam for lam in gell_mann(d).matrices]


@dataclass(frozen=True)
class ObservableGrid:
    """Grid of product observables G[a, b] = Gamma_a (x) Gamma_b."""

    d_a: int
    d_b: int
    entries: np.ndarray  # shape (d_a^2, d_b^2, D, D)

    @property
    def flat(self) -> np.ndarray:
        d = self.d_a * self.d_b
        return self.entries.reshape(self.d_a ** 2 * self.d_b ** 2, d, d)


@lru_cache(maxsize=None)
def observable_grid(d_a: int, d_b: int) -> ObservableGrid:
    if d_a < 2 or d_b < 2:
        raise DimensionError("observable grid needs both dimensions >= 2")
    ga = _gamma_elements(d_a)
    gb = _gamma_elements(d_b)
    dim = d_a * d_b
    entries = np.empty((d_a ** 2, d_b ** 2, dim, dim), dtype=complex)
    for a, xa in enumerate(ga):
        for b, xb in enumerate(gb):
            entries[a, b] = kron(xa, xb)
    entries.setflags(write=False)
    return ObservableGrid(d_a=d_a, d_b=d_b, entries=entries)


@dataclass(frozen=True)
class BlochMatrix:
    """Real matrix of grid expectations B[a, b] = <G[a, b]>."""

    d_a: int
    d_b: int
    values: np.ndarray  # real, shape (d_a^2, d_b^2)

    @property
    def gram_norm(self) -> float:
        """Tr(B B^T) = 2 Tr rho^2."""
        return float((self.values * self.values).sum())


def bloch_matrix_from_rho(rho: np.ndarray, d_a: int, d_b: int) -> BlochMatrix:
    grid = observable_grid(d_a, d_b)
    vals = np.einsum("abij,ji->ab", grid.entries, as_complex_matrix(rho))
    resid = float(np.abs(vals.imag).max())
    if resid > 1e-9:
        raise ValueError(f"Bloch matrix has imaginary residue {resid!r}")
    return BlochMatrix(d_a=d_a, d_b=d_b, values=np.ascontiguousarray(vals.real))


def bloch_matrix(state: QuantumState) -> BlochMatrix:
    """Bloch matrix of a bipartite state (spectator slot must be trivial)."""
    if state.factor.d_c != 1:
        raise DimensionError("Bloch matrix is defined for d_c = 1 states only")
    return bloch_matrix_from_rho(state.density(), state.factor.d_a, state.factor.d_b)


def single_spin_bloch_vectors(b: BlochMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Physical Bloch vectors (<sigma_x>, <sigma_y>, <sigma_z>) of each qubit.

    The first column / first row of B hold the single-spin expectations in
    grid normalization (sigma expectation divided by sqrt(2)); they are
    rescaled here so the vectors live in the unit ball.
    """
    if b.d_a != 2 or b.d_b != 2:
        raise DimensionError("single-spin Bloch vectors need a 2 x 2 factorization")
    k_a = np.sqrt(2.0) * b.values[1:4, 0]
    k_b = np.sqrt(2.0) * b.values[0, 1:4]
    return np.ascontiguousarray(k_a), np.ascontiguousarray(k_b)


# ---------------------------------------------------------------------------
# Weyl operators.


@lru_cache(maxsize=None)
def weyl_ops(d: int) -> np.ndarray:
    """Weyl operators W[n', n''] = sum_n exp(2 pi i n n'/d) |n><n + n'' mod d|.

    Returned as an array of shape (d, d, d, d); each W[n', n''] is unitary
    and W[0, 0] is the identity.
    """
    if d < 2:
        raise DimensionError("Weyl operators need dimension >= 2")
    w = np.zeros((d, d, d, d), dtype=complex)
    omega = np.exp(2j * np.pi / d)
    for np_ in range(d):
        for npp in range(d):
            for n in range(d):
                w[np_, npp, n, (n + npp) % d] = omega ** (n * np_)
    w.setflags(write=False)
    return w


def weyl_matrix_single(rho: np.ndarray) -> np.ndarray:
    """D x D matrix of scaled Weyl expectations Tr(W rho)/sqrt(D) for one system."""
    m = as_complex_matrix(rho)
    d = m.shape[0]
    return np.einsum("pqij,ji->pq", weyl_ops(d), m) / np.sqrt(d)


def _weyl_product_traces(rho: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """T[p, q, r, s] = Tr((W_a[p, q] (x) W_b[r, s]) rho)."""
    r4 = as_complex_matrix(rho).reshape(d_a, d_b, d_a, d_b)
    return np.einsum("pqik,rsjl,klij->pqrs", weyl_ops(d_a), weyl_ops(d_b), r4)


def weyl_matrix(state: QuantumState) -> np.ndarray:
    """Bipartite Weyl matrix with rows (n', n''') and columns (n'', n'''').

    Laid out with a-indices outer and b-indices inner, so a product state
    rho_a (x) rho_b yields exactly kron(W_a, W_b).
    """
    if state.factor.d_c != 1:
        raise DimensionError("bipartite Weyl matrix needs d_c = 1")
    da, db = state.factor.d_a, state.factor.d_b
    t = _weyl_product_traces(state.density(), da, db) / np.sqrt(da * db)
    return t.transpose(0, 2, 1, 3).reshape(da * db, da * db)


def weyl_s_matrix(state: QuantumState) -> np.ndarray:
    """Weyl S matrix: rows n' + n''*D collect the a-operator labels, columns
    n''' + n''''*D the b-operator labels, entries Tr((W (x) W) rho)/D.

    Only defined when both subsystems share the same dimension D; for pure
    states Tr(S^dag S) = 1 and the spectrum of S^dag S matches that of
    (M^dag M) (x) (M^dag M) built from the state matrix M.
    """
    if state.factor.d_a != state.factor.d_b:
        raise DimensionError("Weyl S matrix needs d_a = d_b")
    if state.factor.d_c != 1:
        raise DimensionError("Weyl S matrix needs d_c = 1")
    d = state.factor.d_a
    t = _weyl_product_traces(state.density(), d, d) / d
    return t.transpose(1, 0, 3, 2).reshape(d * d, d * d)
