"""Spectral gaps, generator costs and relaxation cross-checks.

Gaps are read off Hermitian parent Hamiltonians, whose spectra coincide with
minus the spectra of the detailed-balance generators they come from.  Dense
problems go through LAPACK; large or matrix-free ones through :func:`lanczos`.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .operators import hermitian_spectrum

log = logging.getLogger(__name__)

ZERO_RTOL = 1e-8
DENSE_LIMIT = 4096


class SpectralError(RuntimeError):
    pass


class NonUniqueSteadyState(SpectralError):
    """More near-zero modes than expected: the dynamics is not ergodic."""

    def __init__(self, report: "SpectralReport"):
        self.report = report
        super().__init__(
            f"NON_UNIQUE_STEADY_STATE: {report.zero_modes} near-zero eigenvalues, "
            f"expected {report.expected_zero_modes}"
        )


class LanczosNotConverged(SpectralError):
    pass


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    gap: float
    zero_mode_residual: float
    cost: Optional[float]
    method: str
    sector: object = None
    expected_zero_modes: int = 1
    zero_modes: int = 0
    scale: float = 0.0
    flags: list = field(default_factory=list)
    vector: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def non_unique(self) -> bool:
        return "NON_UNIQUE_STEADY_STATE" in self.flags


# -- Lanczos ---------------------------------------------------------------------------


@dataclass
class LanczosResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    residuals: np.ndarray
    krylov_dim: int
    restarts: int
    max_ritz: float


def lanczos(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int = 1,
    *,
    deflate: Optional[Sequence[np.ndarray]] = None,
    tol: float = 1e-11,
    max_krylov: int = 300,
    max_restarts: int = 50,
    seed: int = 0,
    dtype=complex,
    return_vectors: bool = False,
    v0: Optional[np.ndarray] = None,
    check_every: int = 8,
) -> LanczosResult:
    """Lowest ``k`` eigenpairs of a Hermitian operator.

    Full reorthogonalization (two Gram-Schmidt passes), block size one.  Vectors
    in ``deflate`` (assumed orthonormal eigenvectors) are projected out of every
    Krylov vector, so the solver sees only their orthogonal complement.  When
    the Krylov space reaches ``max_krylov`` without convergence the solver
    restarts from the combination of the current lowest Ritz vectors.
    Convergence: ``|beta_m s_mi| <= tol * scale`` for the ``k`` lowest, with
    ``scale`` the largest diagonal Rayleigh quotient seen so far.  ``v0``
    seeds the Krylov space (warm start); otherwise a seeded random vector.
    """
    defl = [] if deflate is None else [np.asarray(v, dtype=dtype) / np.linalg.norm(v) for v in deflate]
    avail = dim - len(defl)
    if avail <= 0:
        raise ValueError("nothing left after deflation")
    k = min(k, avail)
    max_krylov = max(min(max_krylov, avail), k + 1) if avail > k else avail

    def project(x):
        for u in defl:
            x = x - u * np.vdot(u, x)
        return x

    rng = np.random.default_rng(seed)
    if v0 is None:
        start = rng.standard_normal(dim)
        if np.dtype(dtype).kind == "c":
            start = start + 1j * rng.standard_normal(dim)
        start = start.astype(dtype)
    else:
        start = np.asarray(v0, dtype=dtype)

    restarts = 0
    while True:
        start = project(start)
        nrm = np.linalg.norm(start)
        if nrm == 0:
            raise SpectralError("start vector vanished after deflation")
        basis = np.zeros((max_krylov + 1, dim), dtype=dtype)
        basis[0] = start / nrm
        alpha = np.zeros(max_krylov)
        beta = np.zeros(max_krylov)
        m = 0
        converged = False
        for j in range(max_krylov):
            w = project(np.asarray(matvec(basis[j]), dtype=dtype))
            alpha[j] = float(np.real(np.vdot(basis[j], w)))
            for _ in range(2):
                # deflated directions are re-projected in every pass, otherwise
                # rounding-level components get amplified toward the true ground state
                w = project(w)
                # <v_i|w> = conj(v_i . conj(w)); avoids copying the conjugated basis
                w = w - basis[: j + 1].T @ (basis[: j + 1] @ w.conj()).conj()
            b = float(np.linalg.norm(w))
            beta[j] = b
            m = j + 1
            alpha_scale = max(float(np.max(np.abs(alpha[:m]))), 1e-300)
            invariant = b <= 1e-14 * max(1.0, alpha_scale)
            if invariant or m == max_krylov or (m >= k and m % check_every == 0):
                theta, s = scipy.linalg.eigh_tridiagonal(
                    alpha[:m], beta[: m - 1], select="i", select_range=(0, min(k, m) - 1)
                )
                res = np.abs(b * s[-1, :k]) if not invariant else np.zeros(min(k, m))
                scale = max(alpha_scale, float(np.max(np.abs(theta))))
                if m >= k and (invariant or np.all(res <= tol * scale)):
                    converged = True
                    break
                if m == max_krylov:
                    break
            if invariant:
                break
            basis[j + 1] = w / b
        theta, s = scipy.linalg.eigh_tridiagonal(alpha[:m], beta[: m - 1])
        kk = min(k, m)
        ritz_vecs = basis[:m].T @ s[:, :kk]
        if converged or m == avail:
            res = np.abs(beta[m - 1] * s[-1, :kk]) if m < avail else np.zeros(kk)
            return LanczosResult(
                eigenvalues=theta[:kk],
                eigenvectors=ritz_vecs if return_vectors else None,
                residuals=res,
                krylov_dim=m,
                restarts=restarts,
                max_ritz=float(np.max(np.abs(theta))),
            )
        restarts += 1
        if restarts > max_restarts:
            raise LanczosNotConverged(f"Lanczos did not converge after {max_restarts} restarts")
        start = ritz_vecs.sum(axis=1)


def as_matvec(h) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    if callable(h) and not hasattr(h, "shape"):
        raise TypeError("bare callables need an explicit dimension; pass (matvec, dim)")
    if isinstance(h, tuple):
        return h
    if sp.issparse(h):
        h = h.tocsr()
        return (lambda x: h @ x), h.shape[0]
    if hasattr(h, "matvec"):
        return h.matvec, h.shape[0]
    h = np.asarray(h)
    return (lambda x: h @ x), h.shape[0]


# -- gap -------------------------------------------------------------------------------


def _classify(evals, expected_zero_modes, zero_rtol, scale):
    zero_tol = zero_rtol * max(scale, 1e-300)
    near_zero = int(np.sum(np.abs(evals) <= zero_tol))
    flags = []
    if near_zero > expected_zero_modes:
        flags.append("NON_UNIQUE_STEADY_STATE")
    elif near_zero < expected_zero_modes:
        flags.append("MISSING_ZERO_MODE")
    idx = near_zero if near_zero < evals.size else evals.size - 1
    return near_zero, float(evals[idx]), flags


def gap(
    h,
    expected_zero_modes: int = 1,
    *,
    method: str = "auto",
    ground: Optional[np.ndarray] = None,
    zero_rtol: float = ZERO_RTOL,
    strict: bool = True,
    sector=None,
    k: int = 3,
    tol: float = 1e-11,
    seed: int = 0,
    v0: Optional[np.ndarray] = None,
) -> SpectralReport:
    """Spectral gap of a Hermitian parent Hamiltonian (or sector block).

    ``expected_zero_modes`` is 1 for a full space or the ground sector and 0
    for excited sectors.  The gap is the first eigenvalue above the cluster of
    near-zero eigenvalues (``|lambda| <= zero_rtol * max|lambda|``).  Extra
    near-zero eigenvalues raise :class:`NonUniqueSteadyState` when ``strict``.

    ``h`` may be a dense array, a scipy sparse matrix, or ``(matvec, dim)``.
    With ``method="lanczos"`` and a known ``ground`` vector, the ground vector
    is deflated and the gap is the lowest eigenvalue of the complement.
    """
    is_dense = isinstance(h, np.ndarray)
    dim = h.shape[0] if not isinstance(h, tuple) else h[1]
    if method == "auto":
        method = "dense" if (is_dense or sp.issparse(h)) and dim <= DENSE_LIMIT else "lanczos"

    cost = None
    if is_dense or sp.issparse(h):
        tr = h.diagonal().sum()
        cost = None if sector is not None else float(np.real(tr)) / dim

    if method == "dense":
        mat = h.toarray() if sp.issparse(h) else np.asarray(h)
        evals, evecs = hermitian_spectrum(mat)
        scale = float(np.max(np.abs(evals)))
        n0, gval, flags = _classify(evals, expected_zero_modes, zero_rtol, scale)
        if ground is not None:
            zres = float(np.linalg.norm(mat @ ground) / np.linalg.norm(ground))
        else:
            zres = float(abs(evals[0])) if expected_zero_modes else 0.0
        report = SpectralReport(evals, gval, zres, cost, "DENSE", sector, expected_zero_modes, n0, scale, flags)
    elif method == "lanczos":
        matvec, dim = as_matvec(h)
        dtype = complex
        if (is_dense or sp.issparse(h)) and np.isrealobj(h.data if sp.issparse(h) else h):
            dtype = float
        if ground is not None and expected_zero_modes >= 1:
            ground = np.asarray(ground, dtype=dtype)
            ground = ground / np.linalg.norm(ground)
            res = lanczos(
                matvec, dim, k=max(1, k - 1), deflate=[ground], tol=tol, seed=seed, dtype=dtype,
                v0=v0, return_vectors=True,
            )
            hg = np.asarray(matvec(ground))
            zval = float(np.real(np.vdot(ground, hg)))
            zres = float(np.linalg.norm(hg))
            evals = np.concatenate([[zval], res.eigenvalues])
        else:
            res = lanczos(
                matvec, dim, k=max(k, expected_zero_modes + 2), tol=tol, seed=seed, dtype=dtype,
                v0=v0, return_vectors=True,
            )
            evals = res.eigenvalues
            zres = float(abs(evals[0])) if expected_zero_modes else 0.0
        scale = max(res.max_ritz, float(np.max(np.abs(evals))))
        n0, gval, flags = _classify(evals, expected_zero_modes, zero_rtol, scale)
        report = SpectralReport(
            evals, gval, zres, cost, "LANCZOS", sector, expected_zero_modes, n0, scale, flags,
            vector=res.eigenvectors[:, 0],
        )
    else:
        raise ValueError(f"unknown method {method!r}")

    if strict and report.non_unique:
        raise NonUniqueSteadyState(report)
    return report


def gap_value(h, expected_zero_modes: int = 1, **kwargs) -> float:
    return gap(h, expected_zero_modes, **kwargs).gap


# -- costs -----------------------------------------------------------------------------


def cost_super(lind: np.ndarray, method: str = "auto", detailed_balance: Optional[bool] = None) -> float:
    """Normalized Schatten-1 cost ``||L||_1 / d**2`` of a superoperator.

    ``method="trace"`` uses ``-tr(L)/d**2``, valid for generators with a real
    non-positive spectrum (detailed balance).  ``method="svd"`` sums singular
    values.  ``"auto"`` takes the trace route only when ``detailed_balance``
    is asserted by the caller.
    """
    lind = np.asarray(lind)
    d2 = lind.shape[0]
    if method == "auto":
        method = "trace" if detailed_balance else "svd"
    if method == "trace":
        return float(-np.real(np.trace(lind)) / d2)
    if method == "svd":
        return float(np.sum(np.linalg.svd(lind, compute_uv=False)) / d2)
    if method == "eig":
        return float(np.sum(np.abs(np.linalg.eigvals(lind))) / d2)
    raise ValueError(f"unknown method {method!r}")


def cost_classical(generator, method: str = "trace") -> float:
    """``||L||_1 / d`` for a classical generator (trace route by default)."""
    mat = getattr(generator, "liouvillian", generator)
    d = mat.shape[0]
    if method == "trace":
        return float(-mat.diagonal().sum() / d)
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    if method == "svd":
        return float(np.sum(np.linalg.svd(dense, compute_uv=False)) / d)
    if method == "eig":
        return float(np.sum(np.abs(np.linalg.eigvals(dense))) / d)
    raise ValueError(f"unknown method {method!r}")


# -- frustration freeness ----------------------------------------------------------------


@dataclass
class TermCheck:
    index: int
    min_eigenvalue: float
    ground_residual: float
    norm: float
    passed: bool


@dataclass
class FrustrationReport:
    passed: bool
    terms: list
    failures: list

    def worst(self, n: int = 3) -> list:
        return sorted(self.failures, key=lambda t: t.min_eigenvalue)[:n]


def frustration_free_check(local_terms, ground, *, eig_rtol: float = 1e-10, res_rtol: float = 1e-9) -> FrustrationReport:
    """Check every term is PSD and annihilates ``ground``."""
    ground = np.asarray(ground)
    ground = ground / np.linalg.norm(ground)
    checks = []
    for i, term in enumerate(local_terms):
        if sp.issparse(term) and term.shape[0] > DENSE_LIMIT:
            matvec, dim = as_matvec(term)
            lo = lanczos(matvec, dim, k=1, dtype=term.dtype).eigenvalues[0]
            hi = -lanczos(lambda x: -(term @ x), dim, k=1, dtype=term.dtype).eigenvalues[0]
            evals = np.array([lo, hi])
        else:
            dense = term.toarray() if sp.issparse(term) else np.asarray(term)
            evals, _ = hermitian_spectrum(dense)
        norm = max(float(np.max(np.abs(evals))), 1e-300)
        res = float(np.linalg.norm(term @ ground))
        ok = evals[0] >= -eig_rtol * norm and res <= res_rtol * norm
        checks.append(TermCheck(i, float(evals[0]), res, norm, bool(ok)))
    failures = [c for c in checks if not c.passed]
    return FrustrationReport(not failures, checks, failures)


# -- relaxation dynamics -------------------------------------------------------------------


@dataclass
class EvolutionTrace:
    times: np.ndarray
    distance_to_equilibrium: np.ndarray
    fitted_rate: float
    total_probability: np.ndarray
    warnings: list = field(default_factory=list)


def evolve_and_fit(generator, p0, t_grid, *, norm: str = "l2", zero_rtol: float = ZERO_RTOL) -> EvolutionTrace:
    """Propagate ``dp/dt = L p`` through the parent Hamiltonian's eigenbasis.

    ``p(t) = rho^{1/2} exp(-H t) rho^{-1/2} p0``.  The deviation from
    equilibrium is summed over non-zero modes only, so it stays accurate far
    below machine precision of ``p`` itself.  The decay rate is the negative
    slope of a least-squares line through ``log distance`` on the last third
    of ``t_grid``.
    """
    p0 = np.asarray(p0, dtype=float)
    if np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
        raise ValueError("p0 must be a probability distribution")
    t_grid = np.asarray(t_grid, dtype=float)
    hpa = generator.parent
    hpa = hpa.toarray() if sp.issparse(hpa) else np.asarray(hpa)
    sqrt_p = np.asarray(generator.sqrt_equilibrium, dtype=float)
    evals, evecs = hermitian_spectrum(hpa)
    scale = float(np.max(np.abs(evals)))
    nonzero = np.abs(evals) > zero_rtol * scale
    coeffs = evecs.T @ (p0 / sqrt_p)
    msgs = []
    slow = np.flatnonzero(nonzero)
    if slow.size:
        lam1 = evals[slow[0]]
        cluster = slow[np.abs(evals[slow] - lam1) <= 1e-8 * scale]
        if np.linalg.norm(coeffs[cluster]) < 1e-12:
            msg = "slow mode unexcited; fitted rate reflects faster mode"
            warnings.warn(msg, RuntimeWarning)
            msgs.append(msg)
    dist = np.empty(t_grid.size)
    total = np.empty(t_grid.size)
    p_eq = sqrt_p**2
    for i, t in enumerate(t_grid):
        dev = sqrt_p * (evecs[:, nonzero] @ (np.exp(-evals[nonzero] * t) * coeffs[nonzero]))
        dist[i] = np.linalg.norm(dev) if norm == "l2" else 0.5 * np.abs(dev).sum()
        total[i] = p_eq.sum() + dev.sum()
    tail = slice(2 * t_grid.size // 3, None)
    tt, dd = t_grid[tail], dist[tail]
    good = dd > 0
    if good.sum() >= 2:
        slope = np.polyfit(tt[good], np.log(dd[good]), 1)[0]
        rate = float(-slope)
    else:
        rate = float("nan")
    return EvolutionTrace(t_grid, dist, rate, total, msgs)
