"""Translation and global-flip symmetry sectors of periodic spin chains.

The symmetry group is generated by the cyclic translation ``T`` (site ``i``
moves to ``i + 1``) and the global flip ``F = prod_i sigma^x_i``.  A sector is
labelled by the flip parity ``p = +-1`` and a momentum index ``k`` with
``T |psi> = exp(2 pi i k / N) |psi>``.  Orbit representatives are the smallest
configuration integers in each orbit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .classical import all_configs


@dataclass(frozen=True)
class SectorLabel:
    flip_parity: int
    momentum_index: int

    def __post_init__(self):
        if self.flip_parity not in (1, -1):
            raise ValueError(f"flip parity must be +1 or -1, got {self.flip_parity}")

    def __str__(self):
        return f"(flip={self.flip_parity:+d}, k={self.momentum_index})"


def sector_labels(n: int) -> list[SectorLabel]:
    return [SectorLabel(p, k) for p in (1, -1) for k in range(n)]


def translate(configs: np.ndarray, n: int, shift: int = 1) -> np.ndarray:
    """Move the spin at site ``i`` to site ``i + shift`` (periodic)."""
    shift %= n
    if shift == 0:
        return np.asarray(configs, dtype=np.int64)
    full = (1 << n) - 1
    c = np.asarray(configs, dtype=np.int64)
    # site i sits in bit n-1-i, so moving to higher sites is a right rotation
    return ((c >> shift) | (c << (n - shift))) & full


def flip(configs: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(configs, dtype=np.int64) ^ ((1 << n) - 1)


def translation_operator(n: int) -> sp.csr_matrix:
    x = all_configs(n)
    return sp.csr_matrix((np.ones(x.size), (translate(x, n), x)), shape=(x.size, x.size))


def flip_operator(n: int) -> sp.csr_matrix:
    x = all_configs(n)
    return sp.csr_matrix((np.ones(x.size), (flip(x, n), x)), shape=(x.size, x.size))


def orbit_representatives(n: int) -> np.ndarray:
    """Smallest orbit member of every configuration."""
    x = all_configs(n)
    rep = x.copy()
    for f in (0, 1):
        y = flip(x, n) if f else x
        for j in range(n):
            np.minimum(rep, translate(y, n, j), out=rep)
    return rep


def sector_basis(n: int, label: SectorLabel) -> sp.csc_matrix:
    """Orthonormal symmetry-adapted basis of a sector as columns of a sparse matrix.

    Column ``r`` is ``sum_g chi(g)^* g |r>`` normalized, for each orbit
    representative ``r`` whose stabilizer is compatible with the character
    ``chi(T^j F^f) = exp(2 pi i k j / N) p^f``.
    """
    k = label.momentum_index
    if not 0 <= k < n:
        raise ValueError(f"momentum index must lie in 0..{n - 1}, got {k}")
    p = label.flip_parity
    reps = np.unique(orbit_representatives(n))
    rows, cols, vals = [], [], []
    col_idx = np.arange(reps.size)
    for f in (0, 1):
        base = flip(reps, n) if f else reps
        for j in range(n):
            rows.append(translate(base, n, j))
            cols.append(col_idx)
            vals.append(np.full(reps.size, np.exp(-2j * np.pi * k * j / n) * p**f))
    mat = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(1 << n, reps.size),
    )
    mat.sum_duplicates()
    norms = np.sqrt(np.asarray(abs(mat).power(2).sum(axis=0)).ravel())
    keep = norms > 1e-9
    mat = mat[:, keep] @ sp.diags(1.0 / norms[keep])
    if k == 0 or 2 * k == n:
        # real characters give real basis vectors
        mat = sp.csc_matrix(mat.real)
    return sp.csc_matrix(mat)


def sector_decompose(h, n: int, label: SectorLabel, *, check: bool = True):
    """Block of ``h`` in a symmetry sector, with the basis that produced it.

    Returns ``(block, basis)`` where ``block = basis^dagger h basis``.  With
    ``check`` the commutators of ``h`` with ``T`` and ``F`` are verified first.
    """
    h = getattr(h, "parent", h)
    h = sp.csr_matrix(h)
    if check:
        res = symmetry_residual(h, n)
        if res > 1e-10 * max(1.0, abs(h).max()):
            raise ValueError(f"operator is not translation/flip symmetric (commutator norm {res:.3e})")
    basis = sector_basis(n, label)
    block = (basis.conj().T @ h @ basis).tocsr()
    block = 0.5 * (block + block.conj().T)
    return block, basis


def symmetry_residual(h, n: int) -> float:
    h = sp.csr_matrix(h)
    t, f = translation_operator(n), flip_operator(n)
    c1 = t @ h - h @ t
    c2 = f @ h - h @ f
    return float(max(abs(c1).max() if c1.nnz else 0.0, abs(c2).max() if c2.nnz else 0.0))
