"""Classical Markov generators for commuting (Ising-type) Hamiltonians.

Configurations of ``n`` two-level sites are indexed by integers.  Site ``i``
is stored in bit ``n - 1 - i`` (site 0 is the most significant bit, matching
``np.kron`` ordering), and bit value 0 means ``sigma^z = +1``.

A generator ``L`` acts on probability vectors, ``dp/dt = L p``; column ``b``
holds the rates out of configuration ``b``.  The parent Hamiltonian is the
symmetric matrix ``-P^{-1/2} L P^{1/2}`` with ``P`` the diagonal equilibrium
distribution; its ground state is ``sqrt(p_eq)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

SQRT_EQ_CAP = 24


# -- configurations ---------------------------------------------------------------------


def all_configs(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def spin_values(n: int, configs: Optional[np.ndarray] = None) -> np.ndarray:
    """``sigma^z`` eigenvalues, shape ``(n, len(configs))`` with entries +-1."""
    x = all_configs(n) if configs is None else np.asarray(configs, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)[:, None]
    return 1 - 2 * ((x[None, :] >> shifts) & 1)


def site_mask(n: int, i: int) -> int:
    return 1 << (n - 1 - i)


# -- the chain ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalIsingChain:
    """Periodic chain ``H = -J sum_i s_i s_{i+1}`` at inverse temperature ``beta``.

    ``beta`` may be ``inf`` (zero temperature); the derived quantities then take
    their limits ``eta = gamma_eq = 1`` and ``epsilon = 0``.
    """

    n: int
    beta: float = 0.0
    j: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("chain needs at least one site")
        if not (self.beta >= 0):
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @classmethod
    def from_eta(cls, n: int, eta: float, j: float = 1.0) -> "ClassicalIsingChain":
        if not 0 <= eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        beta = math.inf if eta == 1 else math.atanh(eta) / j
        return cls(n, beta, j)

    @classmethod
    def from_epsilon(cls, n: int, epsilon: float, j: float = 1.0) -> "ClassicalIsingChain":
        if not 0 <= epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        if epsilon == 0:
            return cls(n, math.inf, j)
        gamma = math.sqrt(1.0 - epsilon**2)
        return cls(n, math.atanh(gamma) / (2 * j), j)

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def eta(self) -> float:
        return 1.0 if self.zero_temperature else math.tanh(self.beta * self.j)

    @property
    def gamma_eq(self) -> float:
        return 1.0 if self.zero_temperature else math.tanh(2 * self.beta * self.j)

    @property
    def epsilon(self) -> float:
        # 1/cosh avoids the cancellation in sqrt(1 - tanh^2)
        return 0.0 if self.zero_temperature else 1.0 / math.cosh(2 * self.beta * self.j)

    def energies(self) -> np.ndarray:
        s = spin_values(self.n)
        return -self.j * np.sum(s * np.roll(s, -1, axis=0), axis=0).astype(float)


@dataclass(frozen=True)
class KineticParamsKI:
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"rate unit must be positive, got {self.gamma}")
        if not -1 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [-1, 1], got {self.delta}")


# -- generators ---------------------------------------------------------------------------


@dataclass
class ClassicalGenerator:
    """Markov generator with its parent Hamiltonian and per-site parent terms."""

    n: int
    liouvillian: sp.csr_matrix
    parent: sp.csr_matrix
    local_terms: list = field(repr=False)
    sqrt_equilibrium: np.ndarray = field(repr=False)
    local_support: int = 3

    @property
    def dim(self) -> int:
        return self.liouvillian.shape[0]

    def local_costs(self) -> np.ndarray:
        """``tr(H_i)/2**n`` per term, which equals the cost on the term's support."""
        return np.array([t.diagonal().sum() / self.dim for t in self.local_terms])


def _generator_from_rates(n, rows, cols, rates, parent_off, per_term, sqrt_eq, support):
    """Assemble ``L`` and the parent from jump lists.

    ``rows``/``cols``: target/source configuration per jump; ``rates``: jump
    rates; ``parent_off``: parent off-diagonal entries; ``per_term``: term index
    per jump (for the local decomposition).
    """
    dim = 1 << n
    out_rate = np.bincount(cols, weights=rates, minlength=dim)
    lind = sp.csr_matrix((rates, (rows, cols)), shape=(dim, dim)) - sp.diags(out_rate)
    terms = []
    n_terms = int(per_term.max()) + 1 if per_term.size else 0
    for t in range(n_terms):
        sel = per_term == t
        diag = np.bincount(cols[sel], weights=rates[sel], minlength=dim)
        terms.append(
            (sp.csr_matrix((parent_off[sel], (rows[sel], cols[sel])), shape=(dim, dim)) + sp.diags(diag)).tocsr()
        )
    parent = (sp.csr_matrix((parent_off, (rows, cols)), shape=(dim, dim)) + sp.diags(out_rate)).tocsr()
    return ClassicalGenerator(n, lind.tocsr(), parent, terms, sqrt_eq, support)


def build_ki1d(chain: ClassicalIsingChain, kp: KineticParamsKI, *, site_rates=None) -> ClassicalGenerator:
    """Single spin-flip kinetic Ising chain with two kinetic coefficients.

    The rate for flipping site ``i`` is
    ``Gamma (1 + delta s_l s_r) (1 - gamma_eq s_i (s_l + s_r) / 2)``, and the
    parent off-diagonal element is ``-Gamma (1 + delta) epsilon`` when the two
    neighbours agree and ``-Gamma (1 - delta)`` when they differ.

    ``site_rates`` optionally gives per-site ``(Gamma_i, delta_i)`` pairs,
    breaking translation invariance.
    """
    n = chain.n
    if n < 3:
        raise ValueError(f"single-flip chain needs N >= 3 sites for three-site local terms, got {n}")
    if site_rates is None:
        site_rates = [(kp.gamma, kp.delta)] * n
    if len(site_rates) != n:
        raise ValueError("site_rates must give one (Gamma, delta) pair per site")
    g_eq, eps = chain.gamma_eq, chain.epsilon
    x = all_configs(n)
    s = spin_values(n)
    rows, cols, rates, offs, which = [], [], [], [], []
    for i in range(n):
        gam_i, del_i = site_rates[i]
        if gam_i < 0 or abs(del_i) > 1:
            raise ValueError(f"invalid rates at site {i}: {site_rates[i]}")
        sl, sc, sr = s[(i - 1) % n], s[i], s[(i + 1) % n]
        agree = sl * sr
        rate = gam_i * (1 + del_i * agree) * (1 - 0.5 * g_eq * sc * (sl + sr))
        off = -gam_i * (1 + del_i * agree) * np.where(agree > 0, eps, 1.0)
        rows.append(x ^ site_mask(n, i))
        cols.append(x)
        rates.append(rate)
        offs.append(off)
        which.append(np.full(x.size, i))
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    rates, offs, which = np.concatenate(rates), np.concatenate(offs), np.concatenate(which)
    keep = rates != 0
    keep_off = keep | (offs != 0)
    # zero rates still carry no parent entry only if the parent entry also vanishes
    sel = keep_off
    gen = _generator_from_rates(
        n, rows[sel], cols[sel], rates[sel], offs[sel], which[sel], sqrt_equilibrium_vector(chain), 3
    )
    return gen


# -- multi-flip builder --------------------------------------------------------------------


@dataclass(frozen=True)
class LocalTerm:
    """Diagonal energy term on ``sites``; ``values[c]`` is the energy of local configuration ``c``.

    Local configurations use the same bit order as global ones, restricted to
    ``sites`` in the given order.
    """

    sites: tuple
    values: np.ndarray


@dataclass(frozen=True)
class FlipCollection:
    sites: frozenset

    def __post_init__(self):
        if not self.sites:
            raise ValueError("flip collection must be nonempty")


def ising_terms(n: int, j: float = 1.0, bonds: Optional[Sequence[tuple]] = None) -> list[LocalTerm]:
    """Bond terms ``-J s_a s_b``; periodic chain bonds by default."""
    bonds = [(i, (i + 1) % n) for i in range(n)] if bonds is None else bonds
    vals = -j * np.array([1.0, -1.0, -1.0, 1.0])
    return [LocalTerm((a, b), vals) for a, b in bonds]


def _term_energy(term: LocalTerm, n: int, configs: np.ndarray) -> np.ndarray:
    idx = np.zeros(configs.size, dtype=np.int64)
    for site in term.sites:
        idx = (idx << 1) | ((configs >> (n - 1 - site)) & 1)
    return np.asarray(term.values, dtype=float)[idx]


class InfiniteTemperatureViolation(ValueError):
    pass


def build_multiflip(
    n: int,
    terms: Sequence[LocalTerm],
    collections: Sequence[FlipCollection],
    rate: Callable,
    beta: float,
) -> ClassicalGenerator:
    """Generator flipping each collection of sites with detailed-balance rates.

    ``rate(k, before, after)`` returns the symmetric strength of the transition
    pair for collection ``k``; ``before``/``after`` are arrays of global
    configurations.  The rate from ``b`` to ``a`` is
    ``rate * exp(-beta (E_a - E_b) / 2)``, where only terms touching the
    collection enter the energy difference.  Strengths must be symmetric under
    ``before <-> after``.
    """
    if not np.isfinite(beta) or beta < 0:
        raise ValueError("multi-flip builder needs finite beta >= 0")
    for t in terms:
        if any(not 0 <= site < n for site in t.sites):
            raise ValueError(f"term {t.sites} outside lattice of {n} sites")
    x = all_configs(n)
    rows, cols, rates, offs, which = [], [], [], [], []
    for k, col in enumerate(collections):
        if any(not 0 <= site < n for site in col.sites):
            raise ValueError(f"collection {sorted(col.sites)} outside lattice of {n} sites")
        mask = 0
        for site in col.sites:
            mask |= site_mask(n, site)
        touching = [t for t in terms if set(t.sites) & col.sites]
        y = x ^ mask
        e_b = sum((_term_energy(t, n, x) for t in touching), np.zeros(x.size))
        e_a = sum((_term_energy(t, n, y) for t in touching), np.zeros(x.size))
        fwd = np.asarray(rate(k, x, y), dtype=float) * np.ones(x.size)
        bwd = np.asarray(rate(k, y, x), dtype=float) * np.ones(x.size)
        if np.any(np.abs(fwd - bwd) > 1e-12 * np.maximum(1.0, np.abs(fwd))):
            raise InfiniteTemperatureViolation("infinite-temperature steady state violated: asymmetric pair rates")
        if np.any(fwd < 0):
            raise ValueError("transition strengths must be non-negative")
        rows.append(y)
        cols.append(x)
        rates.append(fwd * np.exp(-0.5 * beta * (e_a - e_b)))
        offs.append(-fwd)
        which.append(np.full(x.size, k))
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    rates, offs, which = np.concatenate(rates), np.concatenate(offs), np.concatenate(which)
    energy = sum((_term_energy(t, n, x) for t in terms), np.zeros(x.size))
    support = max(len(set().union(*[set(t.sites) for t in terms if set(t.sites) & c.sites] + [set(c.sites)]))
                  for c in collections)
    return _generator_from_rates(n, rows, cols, rates, offs, which, _sqrt_boltzmann(energy, beta), support)


def ki_single_flip_rate(n: int, kp: KineticParamsKI, chain: ClassicalIsingChain) -> Callable:
    """Strengths reproducing :func:`build_ki1d` in :func:`build_multiflip`."""
    same = (1 + kp.delta) * kp.gamma * chain.epsilon
    diff = (1 - kp.delta) * kp.gamma

    def rate(k, before, after):
        sl = 1 - 2 * ((before >> (n - 1 - (k - 1) % n)) & 1)
        sr = 1 - 2 * ((before >> (n - 1 - (k + 1) % n)) & 1)
        return np.where(sl * sr > 0, same, diff)

    return rate


# -- equilibrium ---------------------------------------------------------------------------


def _sqrt_boltzmann(energy: np.ndarray, beta: float) -> np.ndarray:
    if math.isinf(beta):
        v = (energy <= energy.min() + 1e-12 * max(1.0, abs(energy.min()))).astype(float)
        return v / np.linalg.norm(v)
    logw = -0.5 * beta * (energy - energy.min())
    logw -= 0.5 * np.logaddexp.reduce(2 * logw)
    return np.exp(logw)


def sqrt_equilibrium_vector(chain: ClassicalIsingChain, cap: int = SQRT_EQ_CAP) -> np.ndarray:
    """Unit vector with amplitudes proportional to ``exp(-beta E / 2)``."""
    if chain.n > cap:
        raise ValueError(f"N = {chain.n} exceeds the configured cap {cap}")
    return _sqrt_boltzmann(chain.energies(), chain.beta)


def equilibrium_distribution(chain: ClassicalIsingChain) -> np.ndarray:
    return sqrt_equilibrium_vector(chain) ** 2


# -- variational states ----------------------------------------------------------------------


def _normalize(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("variational state vanishes")
    return v / nrm


def variational_state(chain: ClassicalIsingChain, which: int) -> np.ndarray:
    """Trial states for the symmetry sectors of the single-flip chain.

    1: ``sum_i s_i |sqrt p>``; 2: ``sum_i s_{i-1} s_i s_{i+1} |sqrt p>``;
    3: ``(|1...1> - |0...0>)/sqrt 2``; 4: ``sum_j (-1)^j s_j s_{j+1} |sqrt p>``
    (even N); 5: ``sum_j (s_j s_{j+1} - <s_j s_{j+1}>) |sqrt p>``, i.e. the bond
    state with its ground-state component removed.  At zero temperature state
    5 is taken as its low-temperature limit, the uniform superposition of all
    configurations with two domain walls.
    """
    n = chain.n
    s = spin_values(n)
    psi = sqrt_equilibrium_vector(chain)
    bonds = s * np.roll(s, -1, axis=0)
    if which == 1:
        return _normalize(s.sum(axis=0) * psi)
    if which == 2:
        return _normalize((np.roll(s, 1, axis=0) * s * np.roll(s, -1, axis=0)).sum(axis=0) * psi)
    if which == 3:
        v = np.zeros(1 << n)
        v[-1], v[0] = 1.0, -1.0
        return v / math.sqrt(2)
    if which == 4:
        if n % 2:
            raise ValueError("alternating bond state needs even N")
        signs = (-1.0) ** np.arange(n)
        return _normalize((signs[:, None] * bonds).sum(axis=0) * psi)
    if which == 5:
        total = bonds.sum(axis=0).astype(float)
        if chain.zero_temperature:
            return _normalize((total == n - 4).astype(float))
        v = (total - np.dot(psi**2, total)) * psi
        return _normalize(v)
    raise ValueError(f"variational state index must be 1..5, got {which}")


def rayleigh_quotient(h, v: np.ndarray) -> float:
    v = np.asarray(v)
    return float(np.real(np.vdot(v, h @ v)) / np.real(np.vdot(v, v)))
