"""Detailed-balance Lindbladians built from infinite-temperature jump operators.

Jump operators ``A~_l`` are dressed to finite temperature as
``A_l = rho^{1/4} A~_l rho^{-1/4}``; the pair ``(l, n)`` also brings in the
partner transition built from ``A~_n^dagger`` and ``A~_l^dagger``.  A coherent
correction ``K_ln`` restores detailed balance, and the parent Hamiltonian is
assembled from symmetric-logarithmic-derivative operators ``G_ln``.

All per-pair objects are formed elementwise in the energy eigenbasis of the
cached :class:`~thermogap.operators.GibbsState` and rotated back once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .operators import (
    GibbsState,
    anticommutator_superop,
    commutator_superop,
    gibbs_power,
    hermiticity_residual,
    vectorize,
)

DENSE_CAP = 4096


class KineticMatrixError(ValueError):
    pass


class DenseCapError(ValueError):
    pass


def check_kinetic_matrix(gamma, m: int | None = None) -> np.ndarray:
    """Validate a Hermitian positive-semidefinite matrix of kinetic coefficients."""
    gamma = np.atleast_2d(np.asarray(gamma, dtype=complex))
    if gamma.shape[0] != gamma.shape[1]:
        raise KineticMatrixError(f"kinetic matrix must be square, got {gamma.shape}")
    if m is not None and gamma.shape[0] != m:
        raise KineticMatrixError(f"kinetic matrix is {gamma.shape[0]}x{gamma.shape[0]}, expected {m}x{m}")
    scale = max(1.0, float(np.max(np.abs(gamma))))
    if hermiticity_residual(gamma) > 1e-12 * scale:
        raise KineticMatrixError("kinetic matrix is not Hermitian")
    gamma = 0.5 * (gamma + gamma.conj().T)
    lam_min = float(np.linalg.eigvalsh(gamma)[0])
    if lam_min < -1e-10 * scale:
        raise KineticMatrixError(f"kinetic matrix is not positive semidefinite (min eigenvalue {lam_min:.3e})")
    return gamma


def dress_jump(g: GibbsState, a_tilde: np.ndarray) -> np.ndarray:
    """Imaginary-time evolved jump ``rho^{1/4} A~ rho^{-1/4}``."""
    return g.from_energy_basis(_dress_energy(g, g.to_energy_basis(_checked(g, a_tilde))))


def coherent_term(g: GibbsState, a_l: np.ndarray, a_n: np.ndarray) -> np.ndarray:
    """Coherent correction ``K_ln`` for the ordered pair of bare jumps ``(A~_l, A~_n)``."""
    ml = _pair_product(g, g.to_energy_basis(_checked(g, a_l)), g.to_energy_basis(_checked(g, a_n)))
    return g.from_energy_basis(_coherent_energy(g, ml))


def sld_operator(g: GibbsState, a_l: np.ndarray, a_n: np.ndarray) -> np.ndarray:
    """``G_ln`` solving ``{G, rho^{1/2}}/2 = A~_n^dagger rho^{1/2} A~_l``."""
    ml = _pair_product(g, g.to_energy_basis(_checked(g, a_l)), g.to_energy_basis(_checked(g, a_n)))
    return g.from_energy_basis(_sld_energy(g, ml))


def _checked(g: GibbsState, op) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (g.dim, g.dim):
        raise ValueError(f"operator shape {op.shape} does not match Hilbert space dimension {g.dim}")
    return op


def _half_weights(g: GibbsState) -> np.ndarray:
    # exp(-beta (E - E_min) / 2), entries in (0, 1]
    w = np.exp(-0.5 * g.beta * g.shifted_energies)
    if np.any(w == 0.0):
        raise FloatingPointError("power underflow; reduce beta or x")
    return w


def _dress_energy(g: GibbsState, a_e: np.ndarray) -> np.ndarray:
    e = g.shifted_energies
    return np.exp(-0.25 * g.beta * (e[:, None] - e[None, :])) * a_e


def _pair_product(g: GibbsState, al_e: np.ndarray, an_e: np.ndarray) -> np.ndarray:
    # <a| A~_n^dagger exp(-beta H/2) A~_l |b> with energies shifted by E_min
    return an_e.conj().T @ (_half_weights(g)[:, None] * al_e)


def _coherent_energy(g: GibbsState, m: np.ndarray) -> np.ndarray:
    e = g.shifted_energies
    q = 0.25 * g.beta
    factor = 0.5j * np.exp(q * (e[:, None] + e[None, :])) * np.tanh(q * (e[:, None] - e[None, :]))
    return factor * m


def _sld_energy(g: GibbsState, m: np.ndarray) -> np.ndarray:
    w = _half_weights(g)
    return 2.0 * m / (w[:, None] + w[None, :])


@dataclass
class LindbladAssembly:
    """Lindbladian, parent Hamiltonian and bookkeeping for one kinetic matrix.

    ``lindbladian`` and ``parent`` act on row-stacked density matrices in the
    original (not energy) basis.
    """

    lindbladian: np.ndarray
    parent: np.ndarray
    coherent: np.ndarray
    tfd: np.ndarray
    gibbs: GibbsState = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.gibbs.dim


@dataclass
class _PairData:
    l: int
    n: int
    k: np.ndarray  # K_ln + K_{n+M,l+M}, energy basis
    g: np.ndarray  # G_ln + G_{n+M,l+M}, energy basis
    dissip: np.ndarray  # A_n^dag A_l + A_{l+M}^dag A_{n+M}, energy basis


class LindbladianFamily:
    """All detailed-balance Lindbladians spanned by a fixed jump set.

    Per-pair operators are computed once; :meth:`assemble` and
    :meth:`parent_matvec` are linear in the kinetic matrix.
    """

    def __init__(self, g: GibbsState, jumps: Sequence[np.ndarray], dense_cap: int = DENSE_CAP):
        if len(jumps) == 0:
            raise ValueError("jump set is empty")
        self.gibbs = g
        self.dense_cap = dense_cap
        self.bare = [_checked(g, a) for a in jumps]
        self.m = len(self.bare)
        self.bare_e = [g.to_energy_basis(a) for a in self.bare]
        self.dressed_e = [_dress_energy(g, a) for a in self.bare_e]
        self.dressed_dag_e = [_dress_energy(g, a.conj().T) for a in self.bare_e]  # A_{l+M}
        self._block_cache: dict = {}
        self.pairs: dict[tuple[int, int], _PairData] = {}
        for l in range(self.m):
            for n in range(self.m):
                self.pairs[(l, n)] = self._pair(l, n)
        d = g.dim
        w = _half_weights(g)
        self.tfd_energy = vectorize(np.diag(np.sqrt(w**2 / np.sum(w**2))).astype(complex))
        tr_bare = np.array([np.trace(a) for a in self.bare_e])
        self.cost_weights = np.empty((self.m, self.m), dtype=complex)
        for (l, n), p in self.pairs.items():
            self.cost_weights[l, n] = (d * np.trace(p.g) - 2.0 * tr_bare[l] * np.conj(tr_bare[n])) / d**2

    def _pair(self, l: int, n: int) -> _PairData:
        g = self.gibbs
        al, an = self.bare_e[l], self.bare_e[n]
        m_fwd = _pair_product(g, al, an)  # A~_n^dag w A~_l
        m_rev = _pair_product(g, an.conj().T, al.conj().T)  # A~_l w A~_n^dag
        k = _coherent_energy(g, m_fwd) + _coherent_energy(g, m_rev)
        gg = _sld_energy(g, m_fwd) + _sld_energy(g, m_rev)
        a_l, a_n = self.dressed_e[l], self.dressed_e[n]
        a_lm, a_nm = self.dressed_dag_e[l], self.dressed_dag_e[n]
        dissip = a_n.conj().T @ a_l + a_lm.conj().T @ a_nm
        return _PairData(l, n, k, gg, dissip)

    def cost(self, gamma) -> float:
        """Normalized trace cost ``-tr(L)/d**2``, linear in ``gamma``."""
        gamma = np.asarray(gamma, dtype=complex)
        return float(np.real(np.sum(gamma * self.cost_weights)))

    def operators(self, gamma, pair_order=None, include_coherent: bool = True):
        """Energy-basis ``(K, G, D)`` totals for a kinetic matrix."""
        d = self.gibbs.dim
        k_tot = np.zeros((d, d), dtype=complex)
        g_tot = np.zeros((d, d), dtype=complex)
        d_tot = np.zeros((d, d), dtype=complex)
        order = list(self.pairs) if pair_order is None else list(pair_order)
        for key in order:
            c = gamma[key]
            if c == 0:
                continue
            p = self.pairs[key]
            if include_coherent:
                k_tot += c * p.k
            g_tot += c * p.g
            d_tot += c * p.dissip
        return k_tot, g_tot, d_tot

    def assemble(self, gamma, *, pair_order=None, include_coherent: bool = True) -> LindbladAssembly:
        g = self.gibbs
        d = g.dim
        if d * d > self.dense_cap:
            raise DenseCapError(
                f"superoperator dimension d^2 = {d * d} exceeds dense cap {self.dense_cap}; "
                "use the classical/sparse path for larger systems"
            )
        gamma = check_kinetic_matrix(gamma, self.m)
        k_e, g_e, d_e = self.operators(gamma, pair_order, include_coherent)
        v = g.vectors
        rot = lambda x: v @ x @ v.conj().T  # noqa: E731
        k_tot, g_tot, d_tot = rot(k_e), rot(g_e), rot(d_e)
        dressed = [rot(a) for a in self.dressed_e]
        dressed_dag = [rot(a) for a in self.dressed_dag_e]

        lind = -1j * commutator_superop(k_tot) - 0.5 * anticommutator_superop(d_tot)
        parent = 0.5 * anticommutator_superop(g_tot)
        m = self.m
        for l in range(m):
            # sum_n gamma_ln A_l rho A_n^dag  ->  kron(A_l, sum_n gamma_ln A_n^*)
            lind += np.kron(dressed[l], sum(gamma[l, n] * dressed[n].conj() for n in range(m)))
            parent -= np.kron(self.bare[l], sum(gamma[l, n] * self.bare[n].conj() for n in range(m)))
        for n in range(m):
            # partner transitions: sum_l gamma_ln A_{n+M} rho A_{l+M}^dag
            lind += np.kron(dressed_dag[n], sum(gamma[l, n] * dressed_dag[l].conj() for l in range(m)))
            parent -= np.kron(self.bare[n].conj().T, sum(gamma[l, n] * self.bare[l].T for l in range(m)))

        rho_half = gibbs_power(g, 0.5)
        tfd = vectorize(rho_half)
        asm = LindbladAssembly(
            lindbladian=lind,
            parent=parent,
            coherent=k_tot,
            tfd=tfd,
            gibbs=g,
            gamma=gamma,
        )
        asm.diagnostics = assembly_diagnostics(asm)
        return asm

    def parent_matvec(self, gamma):
        """Matrix-free parent Hamiltonian in the energy basis.

        Returns ``(matvec, tfd)`` where ``matvec`` maps row-stacked vectors and
        ``tfd`` is the thermofield-double ground vector in the same basis.
        """
        gamma = np.asarray(gamma, dtype=complex)
        d = self.gibbs.dim
        _, g_e, _ = self.operators(gamma)
        bare = self.bare_e
        bare_dag = [a.conj().T for a in bare]
        right_l = [sum(gamma[l, n] * bare_dag[n] for n in range(self.m)) for l in range(self.m)]
        right_n = [sum(gamma[l, n] * bare[l] for l in range(self.m)) for n in range(self.m)]

        def matvec(x):
            xm = x.reshape(d, d)
            out = 0.5 * (g_e @ xm + xm @ g_e)
            for l in range(self.m):
                out -= bare[l] @ xm @ right_l[l]
                out -= bare_dag[l] @ xm @ right_n[l]
            return out.reshape(-1)

        return matvec, self.tfd_energy


    def _pair_parent_block(self, l: int, n: int, index: np.ndarray) -> np.ndarray:
        """Rows/columns ``index`` of the parent for the unit kinetic matrix at ``(l, n)``."""
        d = self.gibbs.dim
        v = self.gibbs.vectors
        g_pair = v @ self.pairs[(l, n)].g @ v.conj().T
        ra, rb = np.divmod(np.asarray(index), d)
        same_a = ra[:, None] == ra[None, :]
        same_b = rb[:, None] == rb[None, :]
        al, an = self.bare[l], self.bare[n]
        block = 0.5 * (g_pair[np.ix_(ra, ra)] * same_b + same_a * g_pair.T[np.ix_(rb, rb)])
        block -= al[np.ix_(ra, ra)] * an.conj()[np.ix_(rb, rb)]
        block -= an.conj().T[np.ix_(ra, ra)] * al.T[np.ix_(rb, rb)]
        return block

    def parent_block(self, gamma, index: np.ndarray, key=None) -> np.ndarray:
        """Dense block of the parent Hamiltonian on row-stacked indices ``index``.

        Blocks are linear in ``gamma``; per-pair blocks are cached under ``key``
        (defaults to the index bytes) so repeated evaluations cost one linear
        combination.  Only meaningful when ``index`` spans an invariant subspace
        for the given ``gamma``, e.g. a symmetry sector.
        """
        gamma = np.asarray(gamma, dtype=complex)
        index = np.asarray(index)
        key = index.tobytes() if key is None else key
        cache = self._block_cache.setdefault(key, {})
        out = np.zeros((index.size, index.size), dtype=complex)
        for (l, n) in self.pairs:
            c = gamma[l, n]
            if c == 0:
                continue
            if (l, n) not in cache:
                cache[(l, n)] = self._pair_parent_block(l, n, index)
            out += c * cache[(l, n)]
        return out


def superoperator_sectors(phases: np.ndarray) -> list[np.ndarray]:
    """Row-stacked index sets on which ``rho -> U rho U^dagger`` acts as a phase.

    ``phases`` are the diagonal entries of a diagonal unitary symmetry ``U``.
    The entry ``(a, b)`` picks up ``u_a conj(u_b)``; indices are grouped by that
    value, the sector containing the identity (value 1) first.
    """
    u = np.asarray(phases, dtype=complex)
    vals = np.round((u[:, None] * u.conj()[None, :]).reshape(-1), 10)
    keys = sorted(set(vals.tolist()), key=lambda z: (abs(z - 1) > 1e-9, z.real, z.imag))
    return [np.flatnonzero(vals == k) for k in keys]


def assemble(g: GibbsState, jumps: Sequence[np.ndarray], gamma, **kwargs) -> LindbladAssembly:
    """Assemble the Lindbladian and parent Hamiltonian for kinetic matrix ``gamma``."""
    return LindbladianFamily(g, jumps).assemble(gamma, **kwargs)


def adjoint(lind: np.ndarray) -> np.ndarray:
    """Hilbert-Schmidt adjoint of a row-stacked superoperator."""
    return lind.conj().T


def detailed_balance_residual(asm: LindbladAssembly, g: GibbsState | None = None) -> float:
    """Relative Frobenius residual of ``L^# = rho^{-1/2} L[rho^{1/2} . rho^{1/2}] rho^{-1/2}``."""
    g = asm.gibbs if g is None else g
    lind = asm.lindbladian
    rp = gibbs_power(g, 0.5)
    rm = gibbs_power(g, -0.5)
    right = np.kron(rp, rp.T)
    left = np.kron(rm, rm.T)
    norm = np.linalg.norm(lind)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(adjoint(lind) - left @ lind @ right) / norm)


def parent_by_similarity(asm: LindbladAssembly) -> np.ndarray:
    """``-(rho^{-1/4} (x) rho^{-1/4,T}) L (rho^{1/4} (x) rho^{1/4,T})``."""
    rp = gibbs_power(asm.gibbs, 0.25)
    rm = gibbs_power(asm.gibbs, -0.25)
    return -np.kron(rm, rm.T) @ asm.lindbladian @ np.kron(rp, rp.T)


def assembly_diagnostics(asm: LindbladAssembly) -> dict:
    lind, parent = asm.lindbladian, asm.parent
    rho = vectorize(gibbs_power(asm.gibbs, 1.0))
    ident = vectorize(np.eye(asm.dim, dtype=complex))
    pnorm = max(float(np.linalg.norm(parent)), 1e-300)
    return {
        "parent_hermiticity": hermiticity_residual(parent) / pnorm,
        "steady_state_residual": float(np.linalg.norm(lind @ rho)),
        "trace_preservation_residual": float(np.linalg.norm(adjoint(lind) @ ident)),
        "tfd_residual": float(np.linalg.norm(parent @ asm.tfd)),
        "detailed_balance_residual": detailed_balance_residual(asm),
        "coherent_hermiticity": hermiticity_residual(asm.coherent),
    }


def parent_terms(g: GibbsState, jumps: Sequence[np.ndarray], gamma) -> list[np.ndarray]:
    """Per-channel parent Hamiltonian terms.

    ``gamma`` is diagonalized as ``sum_k lam_k v_k v_k^dagger``; channel ``k``
    uses the single jump ``B_k = sum_l v_kl A~_l`` with weight ``lam_k``.  Each
    term is Hermitian, positive semidefinite and annihilates the thermofield
    double, and the terms sum to the full parent Hamiltonian.
    """
    gamma = check_kinetic_matrix(gamma, len(jumps))
    lam, vecs = np.linalg.eigh(gamma)
    terms = []
    for k in range(lam.size):
        if abs(lam[k]) <= 1e-14 * max(1.0, abs(lam).max()):
            continue
        b = sum(vecs[l, k] * np.asarray(jumps[l], dtype=complex) for l in range(len(jumps)))
        terms.append(assemble(g, [b], [[lam[k]]]).parent)
    return terms
