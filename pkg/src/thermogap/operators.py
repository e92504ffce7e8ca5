"""Dense operator utilities: Gibbs powers, spin matrices and row-stacked superoperators.

Vectorization convention: a d x d matrix ``rho`` maps to the length d**2 vector
``rho.reshape(-1)`` (row stacking, numpy C order).  Under this convention

    vec(A @ rho @ B) == np.kron(A, B.T) @ vec(rho)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

HERMITIAN_RTOL = 1e-10


class NotHermitianError(ValueError):
    pass


def hermiticity_residual(m: np.ndarray) -> float:
    """Max-abs entry of ``m - m^dagger``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return hermiticity_residual(m) <= tol


def hermitian_spectrum(m: np.ndarray, rtol: float = HERMITIAN_RTOL):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    The input is symmetrized as ``(m + m^dagger)/2`` before solving; asymmetry
    larger than ``rtol * ||m||`` is rejected.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))) if m.size else 0.0, 1e-300)
    res = hermiticity_residual(m)
    if res > rtol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian: max|M - M^dagger| = {res:.3e} "
            f"exceeds {rtol:.1e} * ||M|| = {rtol * scale:.3e}"
        )
    herm = 0.5 * (m + m.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    return evals, evecs


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1).copy()


def devectorize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise ValueError(f"vector of length {vec.size} is not a vectorized square matrix")
    return vec.reshape(d, d).copy()


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of the map ``rho -> a @ rho @ b`` acting on row-stacked vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return np.kron(a, b.T)


def left_superop(a: np.ndarray) -> np.ndarray:
    """``rho -> a @ rho``."""
    return np.kron(a, np.eye(a.shape[0], dtype=a.dtype))


def right_superop(b: np.ndarray) -> np.ndarray:
    """``rho -> rho @ b``."""
    return np.kron(np.eye(b.shape[0], dtype=b.dtype), b.T)


def commutator_superop(k: np.ndarray) -> np.ndarray:
    """``rho -> k @ rho - rho @ k``."""
    return left_superop(k) - right_superop(k)


def anticommutator_superop(k: np.ndarray) -> np.ndarray:
    """``rho -> k @ rho + rho @ k``."""
    return left_superop(k) + right_superop(k)


@dataclass(frozen=True)
class SpinAlgebra:
    s: Fraction
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def dim(self) -> int:
        return int(2 * self.s + 1)

    def as_list(self) -> list[np.ndarray]:
        return [self.sx, self.sy, self.sz]


def _as_spin(s) -> Fraction:
    frac = Fraction(s).limit_denominator(2)
    if frac <= 0 or (2 * frac).denominator != 1 or abs(float(frac) - float(s)) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer, got {s!r}")
    return frac


def spin_operators(s) -> SpinAlgebra:
    """Spin-s matrices in the S_z eigenbasis, ordered m = s, s-1, ..., -s."""
    s = _as_spin(s)
    sf = float(s)
    m = sf - np.arange(int(2 * s + 1))
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1)); index of m+1 is one less than index of m
    up = np.sqrt(sf * (sf + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(up, k=1).astype(complex)
    sminus = splus.conj().T
    sx = 0.5 * (splus + sminus)
    sy = -0.5j * (splus - sminus)
    return SpinAlgebra(s=s, sx=sx, sy=sy, sz=sz)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class PowerUnderflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class GibbsState:
    """Thermal state exp(-beta H)/Z with a cached eigendecomposition of H.

    ``energies`` are the eigenvalues of H in ascending order and ``vectors``
    the matching orthonormal eigenvectors (columns).
    """

    hamiltonian: np.ndarray
    beta: float
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    log_z: float

    @classmethod
    def from_hamiltonian(cls, hamiltonian, beta: float) -> "GibbsState":
        h = np.asarray(hamiltonian, dtype=complex)
        beta = float(beta)
        if not np.isfinite(beta) or beta < 0:
            raise ValueError(f"beta must be finite and non-negative, got {beta}")
        if not np.all(np.isfinite(h)):
            raise ValueError("Hamiltonian has non-finite entries")
        energies, vectors = hermitian_spectrum(h)
        shifted = energies - energies[0]
        log_z = float(-beta * energies[0] + np.log(np.sum(np.exp(-beta * shifted))))
        return cls(h, beta, energies, vectors, log_z)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def shifted_energies(self) -> np.ndarray:
        return self.energies - self.energies[0]

    def populations(self) -> np.ndarray:
        """Boltzmann weights in the energy eigenbasis (sum to one)."""
        w = np.exp(-self.beta * self.shifted_energies)
        return w / w.sum()

    def to_energy_basis(self, op: np.ndarray) -> np.ndarray:
        v = self.vectors
        return v.conj().T @ op @ v

    def from_energy_basis(self, op: np.ndarray) -> np.ndarray:
        v = self.vectors
        return v @ op @ v.conj().T

    def density_matrix(self) -> np.ndarray:
        return gibbs_power(self, 1.0)

    def power_diagonal(self, x: float) -> np.ndarray:
        """Eigenvalues of rho_beta**x, ordered like ``energies``."""
        if x == 0:
            return np.ones(self.dim)
        shifted = self.shifted_energies
        log_z_shifted = np.log(np.sum(np.exp(-self.beta * shifted)))
        with np.errstate(over="ignore", under="ignore"):
            diag = np.exp(-x * self.beta * shifted - x * log_z_shifted)
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            raise PowerUnderflowError("power underflow; reduce beta or x")
        return diag


def gibbs_power(g: GibbsState, x: float) -> np.ndarray:
    """rho_beta**x as a dense matrix, Hermitian positive definite."""
    diag = g.power_diagonal(x)
    v = g.vectors
    out = (v * diag) @ v.conj().T
    return 0.5 * (out + out.conj().T)
