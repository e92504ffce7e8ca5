"""Gap maximization over kinetic coefficients at fixed dissipation cost.

Quantum kinetic matrices are searched through a triangular factor ``B`` with
``gamma = B^dagger B`` (positive semidefinite by construction) and rescaled
onto the cost constraint before every evaluation, which is exact because the
cost is linear in ``gamma``.  The search itself is Nelder-Mead with seeded
restarts.  Because the gap is concave in the kinetic coefficients, averaging a
candidate over a symmetry group never lowers it; problems may therefore carry
a kinetic symmetry group whose average is applied to every candidate.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .operators import GibbsState, gibbs_power, vectorize
from .quantum import LindbladAssembly, check_kinetic_matrix
from .spectral import NonUniqueSteadyState, SpectralError, cost_classical, cost_super, gap

log = logging.getLogger(__name__)

CHOLESKY_FACTOR = "CHOLESKY_FACTOR"
SCALAR_DELTA = "SCALAR_DELTA"
QUANTUM = "QUANTUM"
CLASSICAL = "CLASSICAL"


def default_threads() -> int:
    raw = os.environ.get("THERMOGAP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"THERMOGAP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"THERMOGAP_THREADS must be a positive integer, got {raw!r}")
    return n


# -- symmetry groups ---------------------------------------------------------------------------


def _same(a, b, tol=1e-10) -> bool:
    if sp.issparse(a) or sp.issparse(b):
        diff = sp.csr_matrix(a) - sp.csr_matrix(b)
        return diff.nnz == 0 or abs(diff).max() <= tol
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol)


class SymmetryGroup:
    """Finite group of unitaries (dense arrays or sparse permutation matrices).

    Closure under multiplication is verified on construction.
    """

    def __init__(self, elements: Sequence, tol: float = 1e-10):
        if not elements:
            raise ValueError("group needs at least one element")
        self.elements = list(elements)
        self.tol = tol
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                prod = a @ b
                if not any(_same(prod, c, tol) for c in self.elements):
                    raise ValueError(f"group not closed: element {i} * element {j} is not in the set")

    @classmethod
    def generated_by(cls, generators: Sequence, max_order: int = 4096, tol: float = 1e-10) -> "SymmetryGroup":
        gens = list(generators)
        if not gens:
            raise ValueError("need at least one generator")
        first = gens[0]
        ident = sp.identity(first.shape[0], format="csr") if sp.issparse(first) else np.eye(first.shape[0])
        elems = [ident]
        frontier = [ident]
        while frontier:
            new = []
            for a in frontier:
                for gen in gens:
                    c = gen @ a
                    if not any(_same(c, e, tol) for e in elems):
                        elems.append(c)
                        new.append(c)
                        if len(elems) > max_order:
                            raise ValueError("generated group exceeds max_order")
            frontier = new
        return cls(elems, tol)

    def __len__(self):
        return len(self.elements)

    def average(self, fn: Callable):
        """``(1/|G|) sum_g fn(U_g)``."""
        acc = None
        for u in self.elements:
            val = fn(u)
            acc = val if acc is None else acc + val
        return acc / len(self.elements)


def symmetrize_kinetic(gamma, group: Optional[SymmetryGroup]) -> np.ndarray:
    """Group average ``(1/|G|) sum_g R_g gamma R_g^dagger`` in kinetic-matrix space."""
    gamma = np.asarray(gamma, dtype=complex)
    if group is None:
        return gamma
    return group.average(lambda r: r @ gamma @ r.conj().T)


def _kinetic_mask(group: Optional[SymmetryGroup], m: int) -> np.ndarray:
    if group is None:
        return np.ones((m, m), dtype=bool)
    probe = np.arange(1, m * m + 1, dtype=float).reshape(m, m)
    probe = probe + probe.T + 1j * (probe - probe.T)
    return np.abs(symmetrize_kinetic(probe, group)) > 1e-12


def symmetrize(obj, group: SymmetryGroup, g: Optional[GibbsState] = None):
    """Average a generator over a finite symmetry group of its equilibrium state.

    Quantum assemblies are averaged as ``U L[U^dagger . U] U^dagger``; every
    ``U`` must commute with the thermal state.  Classical generators (objects
    with ``liouvillian``/``parent``) are conjugated by permutation matrices,
    which must fix the equilibrium distribution.
    """
    if isinstance(obj, LindbladAssembly):
        return _symmetrize_assembly(obj, group, g)
    if hasattr(obj, "liouvillian") and hasattr(obj, "parent"):
        return _symmetrize_classical(obj, group)
    raise TypeError(f"cannot symmetrize object of type {type(obj).__name__}")


def _symmetrize_assembly(asm: LindbladAssembly, group: SymmetryGroup, g=None) -> LindbladAssembly:
    g = asm.gibbs if g is None else g
    rho = gibbs_power(g, 1.0)
    scale = max(float(np.max(np.abs(rho))), 1e-300)
    for i, u in enumerate(group.elements):
        u = np.asarray(u.toarray() if sp.issparse(u) else u)
        res = float(np.max(np.abs(u @ rho - rho @ u)))
        if res > 1e-10 * scale:
            raise ValueError(f"group element {i} does not commute with the thermal state (residual {res:.3e})")

    def superop(u):
        u = np.asarray(u.toarray() if sp.issparse(u) else u)
        return np.kron(u, u.conj())

    lind = group.average(lambda u: superop(u) @ asm.lindbladian @ superop(u).conj().T)
    parent = group.average(lambda u: superop(u) @ asm.parent @ superop(u).conj().T)
    coherent = group.average(lambda u: np.asarray(u) @ asm.coherent @ np.asarray(u).conj().T)
    out = LindbladAssembly(lind, parent, coherent, asm.tfd.copy(), asm.gibbs, asm.gamma.copy())
    from .quantum import assembly_diagnostics

    out.diagnostics = assembly_diagnostics(out)
    out.diagnostics["symmetrized_over"] = len(group)
    return out


def _symmetrize_classical(gen, group: SymmetryGroup):
    from .classical import ClassicalGenerator

    sqrt_p = np.asarray(gen.sqrt_equilibrium)
    for i, u in enumerate(group.elements):
        res = float(np.max(np.abs(u @ sqrt_p - sqrt_p)))
        if res > 1e-10 * max(float(np.max(sqrt_p)), 1e-300):
            raise ValueError(f"group element {i} does not fix the equilibrium distribution (residual {res:.3e})")

    def conj(m, u):
        return (u @ m @ u.T).tocsr() if sp.issparse(m) else u @ m @ u.T

    k = len(group)
    lind = group.average(lambda u: conj(gen.liouvillian, u)).tocsr()
    parent = group.average(lambda u: conj(gen.parent, u)).tocsr()
    terms = [conj(t, u) / k for t in gen.local_terms for u in group.elements]
    return ClassicalGenerator(gen.n, lind, parent, terms, sqrt_p.copy(), gen.local_support)


# -- problems and results ----------------------------------------------------------------------


@dataclass
class OptimizationProblem:
    """Gap maximization problem.

    ``objective`` maps a feasible kinetic parameter (a kinetic matrix already on
    the cost constraint, or a scalar ``delta``) to its gap and may raise
    :class:`NonUniqueSteadyState`.  For ``CHOLESKY_FACTOR``, ``cost`` is the
    linear cost of a kinetic matrix and ``target_cost`` the constraint value.
    ``budget`` caps objective evaluations per restart.
    """

    objective: Callable
    parametrization: str = CHOLESKY_FACTOR
    size: int = 3
    cost: Optional[Callable] = None
    target_cost: float = 1.0
    budget: int = 400
    restarts: int = 8
    seed: int = 0
    bounds: tuple = (-1.0, 1.0)
    canonical: Optional[np.ndarray] = None
    real_factor: bool = False
    kinetic_group: Optional[SymmetryGroup] = None
    gap_tol: float = 1e-8
    threads: Optional[int] = None

    def __post_init__(self):
        if self.parametrization not in (CHOLESKY_FACTOR, SCALAR_DELTA):
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        if self.budget < 50:
            raise ValueError("budget must allow at least 50 evaluations")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.parametrization == CHOLESKY_FACTOR and self.cost is None:
            raise ValueError("factor parametrization needs a cost function")


@dataclass
class RestartResult:
    index: int
    params: object
    gap: float
    evaluations: int
    flagged: int


@dataclass
class OptimizationResult:
    best_params: object
    best_gap: float
    canonical_gap: Optional[float]
    trace: list = field(repr=False)
    restarts: list = field(repr=False)
    seed: int = 0


class _FactorMap:
    """Triangular factor ``B`` (entries allowed by ``mask``) to a normalized kinetic matrix."""

    def __init__(self, m: int, real: bool, mask: np.ndarray, cost: Callable, target: float, group):
        self.m = m
        self.real = real
        self.cost = cost
        self.target = target
        self.group = group
        upper = np.triu(np.ones((m, m), dtype=bool)) & mask
        self.diag = [(i, i) for i in range(m) if upper[i, i]]
        self.off = [(i, j) for i in range(m) for j in range(i + 1, m) if upper[i, j]]
        self.nparams = len(self.diag) + (1 if real else 2) * len(self.off)

    def factor(self, x) -> np.ndarray:
        b = np.zeros((self.m, self.m), dtype=complex)
        k = 0
        for i, j in self.diag:
            b[i, j] = x[k]
            k += 1
        for i, j in self.off:
            b[i, j] = x[k]
            k += 1
            if not self.real:
                b[i, j] += 1j * x[k]
                k += 1
        return b

    def kinetic(self, x) -> Optional[np.ndarray]:
        b = self.factor(x)
        gamma = symmetrize_kinetic(b.conj().T @ b, self.group)
        gamma = 0.5 * (gamma + gamma.conj().T)
        c = self.cost(gamma)
        if not c > 1e-12 * max(1.0, float(np.max(np.abs(gamma)))):
            return None
        return gamma * (self.target / c)

    def start(self, canonical: np.ndarray) -> np.ndarray:
        """Parameters whose factor is the Cholesky factor of ``canonical``."""
        chol = np.linalg.cholesky(np.asarray(canonical, dtype=complex)).conj().T  # upper, c = B^dag B
        x = [chol[i, j].real for i, j in self.diag]
        for i, j in self.off:
            x.append(chol[i, j].real)
            if not self.real:
                x.append(chol[i, j].imag)
        return np.array(x, dtype=float)


def _delta_from(t: float, bounds) -> float:
    lo, hi = bounds
    return lo + (hi - lo) * 0.5 * (1.0 + math.sin(t))


def _t_from(delta: float, bounds) -> float:
    lo, hi = bounds
    return math.asin(min(1.0, max(-1.0, 2.0 * (delta - lo) / (hi - lo) - 1.0)))


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Maximize the gap with seeded multi-start Nelder-Mead.

    Restart 0 starts from the canonical point; the others from seeded random
    points.  Each restart re-launches the simplex from its incumbent until the
    gap improves by less than ``gap_tol`` or the budget is spent.  Near-ties
    (within ``gap_tol``) between restarts go to the point closest to the
    canonical one in Frobenius norm.
    """
    p = problem
    seeds = np.random.SeedSequence(p.seed).spawn(p.restarts)
    if p.parametrization == CHOLESKY_FACTOR:
        canonical = np.eye(p.size, dtype=complex) if p.canonical is None else np.asarray(p.canonical, dtype=complex)
        fmap = _FactorMap(p.size, p.real_factor, _kinetic_mask(p.kinetic_group, p.size), p.cost, p.target_cost,
                          p.kinetic_group)
        canonical_n = canonical * (p.target_cost / p.cost(canonical))
        to_params = fmap.kinetic
        x_canon = fmap.start(canonical)
        dim = fmap.nparams
    else:
        canonical_n = 0.0 if p.canonical is None else float(p.canonical)
        to_params = lambda x: _delta_from(float(x[0]), p.bounds)  # noqa: E731
        x_canon = np.array([_t_from(canonical_n, p.bounds)])
        dim = 1

    try:
        canonical_gap = float(p.objective(canonical_n))
    except NonUniqueSteadyState:
        canonical_gap = 0.0

    def run(r: int) -> tuple[RestartResult, list]:
        rng = np.random.default_rng(seeds[r])
        x = x_canon.copy() if r == 0 else rng.standard_normal(dim) * (np.pi if dim == 1 else 1.0)
        trace = []
        flagged = 0
        best = [-np.inf, None]

        def neg_gap(xv):
            nonlocal flagged
            if len(trace) >= p.budget:
                raise _BudgetSpent
            params = to_params(xv)
            if params is None:
                val = 0.0
            else:
                try:
                    val = float(p.objective(params))
                except NonUniqueSteadyState:
                    flagged += 1
                    val = 0.0
            trace.append((r, len(trace), val))
            if val > best[0]:
                best[0], best[1] = val, params
            return -val

        prev = -np.inf
        try:
            while True:
                res = scipy.optimize.minimize(
                    neg_gap,
                    x,
                    method="Nelder-Mead",
                    options={"xatol": 1e-7, "fatol": p.gap_tol, "adaptive": dim > 2,
                             "maxfev": max(1, p.budget - len(trace))},
                )
                x = res.x
                if -res.fun - prev <= p.gap_tol:
                    break
                prev = -res.fun
        except _BudgetSpent:
            pass
        return RestartResult(r, best[1], float(best[0]), len(trace), flagged), trace

    threads = p.threads or default_threads()
    if threads > 1 and p.restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(p.restarts)))
    else:
        outcomes = [run(r) for r in range(p.restarts)]
    results = [o[0] for o in outcomes]
    trace = [t for o in outcomes for t in o[1]]
    evaluated = sum(r.evaluations for r in results)
    flagged = sum(r.flagged for r in results)
    if evaluated and flagged == evaluated:
        raise SpectralError("gap closed everywhere in search region")

    top = max(r.gap for r in results)
    close = [r for r in results if r.gap >= top - p.gap_tol and r.params is not None]

    def distance(r):
        return float(np.linalg.norm(np.asarray(r.params) - np.asarray(canonical_n)))

    winner = min(close, key=lambda r: (distance(r), r.index))
    return OptimizationResult(winner.params, winner.gap, canonical_gap, trace, results, p.seed)


class _BudgetSpent(Exception):
    pass


# -- single-body optima ----------------------------------------------------------------------------


@dataclass
class SingleBodyOptimum:
    kind: str
    generator: np.ndarray
    parent: np.ndarray
    gap: float
    ground: np.ndarray
    cost: float


def single_body_optimal(g: GibbsState, gamma: float = 1.0, kind: str = QUANTUM) -> SingleBodyOptimum:
    """Generator whose parent is a multiple of the projector off the equilibrium state.

    Normalized to cost ``gamma``, so all nonzero decay rates equal
    ``gamma d^2/(d^2-1)`` (quantum) or ``gamma d/(d-1)`` (classical, using
    the Boltzmann populations of ``g``).
    """
    d = g.dim
    if d < 2:
        raise ValueError("need dimension at least 2")
    if kind == QUANTUM:
        ground = vectorize(gibbs_power(g, 0.5))
        n = d * d
        rate = gamma * n / (n - 1)
        parent = rate * (np.eye(n) - np.outer(ground, ground.conj()))
        rp, rm = gibbs_power(g, 0.25), gibbs_power(g, -0.25)
        sim, sim_inv = np.kron(rp, rp.T), np.kron(rm, rm.T)
        generator = -sim @ parent @ sim_inv
    elif kind == CLASSICAL:
        ground = np.sqrt(g.populations())
        n = d
        rate = gamma * n / (n - 1)
        parent = rate * (np.eye(n) - np.outer(ground, ground))
        generator = -(ground[:, None] * parent) / ground[None, :]
    else:
        raise ValueError(f"kind must be {QUANTUM!r} or {CLASSICAL!r}, got {kind!r}")
    rep = gap(parent, 1, method="dense", ground=ground)
    cost = cost_super(generator, "trace") if kind == QUANTUM else cost_classical(generator)
    return SingleBodyOptimum(kind, generator, parent, rep.gap, ground, cost)
