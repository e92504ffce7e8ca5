"""Concrete models and parameter sweeps.

* LMG: a collective spin ``s`` with ``H = -h_z S_z - (J_x S_x^2 + J_y S_y^2)/(2s)``,
  jumps ``{S_x, S_y, S_z}``, inverse temperature ``beta = beta_tilde / s`` and
  dissipation cost fixed to ``Gamma s (s + 1)``.
* Kinetic Ising chain: single spin-flip dynamics with coefficients
  ``(Gamma, delta)``; gaps from symmetry-sector exact diagonalization.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import bounds as kb
from .classical import ClassicalIsingChain, KineticParamsKI, build_ki1d, variational_state, rayleigh_quotient
from .operators import GibbsState, spin_operators
from .optimize import (
    CHOLESKY_FACTOR,
    SCALAR_DELTA,
    OptimizationProblem,
    SymmetryGroup,
    default_threads,
    optimize,
)
from .quantum import LindbladianFamily, LindbladAssembly, detailed_balance_residual, superoperator_sectors
from .sectors import SectorLabel, sector_decompose, sector_labels
from .spectral import ZERO_RTOL, SpectralReport, gap

log = logging.getLogger(__name__)


# -- LMG ----------------------------------------------------------------------------------------


@dataclass(frozen=True)
class LMGParams:
    s: Fraction
    h_z: float = 1.0
    j_x: float = 1.0
    j_y: float = 0.0
    beta_tilde: float = 5.0
    gamma: float = 1.0

    def __post_init__(self):
        s = Fraction(self.s).limit_denominator(2)
        if s <= 0 or abs(float(s) - float(self.s)) > 1e-12:
            raise ValueError(f"s must be a positive half-integer, got {self.s!r}")
        object.__setattr__(self, "s", s)
        if self.beta_tilde < 0:
            raise ValueError("beta_tilde must be non-negative")
        if self.gamma <= 0:
            raise ValueError("Gamma must be positive")

    @property
    def dim(self) -> int:
        return int(2 * self.s + 1)

    @property
    def beta(self) -> float:
        return self.beta_tilde / float(self.s)

    @property
    def cost_target(self) -> float:
        s = float(self.s)
        return self.gamma * s * (s + 1)


def lmg_hamiltonian(p: LMGParams) -> np.ndarray:
    spins = spin_operators(p.s)
    s = float(p.s)
    return -p.h_z * spins.sz - (p.j_x * spins.sx @ spins.sx + p.j_y * spins.sy @ spins.sy) / (2 * s)


def lmg_kinetic_group() -> SymmetryGroup:
    """Sign flips of the kinetic matrix induced by spin parity and complex conjugation.

    Parity ``exp(i pi (S_z - s))`` sends ``(S_x, S_y, S_z) -> (-S_x, -S_y, S_z)``;
    complex conjugation in the ``S_z`` basis (a symmetry because the LMG
    Hamiltonian is real there) sends ``S_y -> -S_y``.  For Hermitian jumps only
    the real part of the kinetic matrix matters, so both act as ``R gamma R``.
    """
    return SymmetryGroup.generated_by([np.diag([-1.0, -1.0, 1.0]), np.diag([1.0, -1.0, 1.0])])


class LMGModel:
    """Cached LMG Gibbs state, jump family and parity sectors."""

    def __init__(self, p: LMGParams):
        self.params = p
        self.hamiltonian = lmg_hamiltonian(p)
        if np.max(np.abs(self.hamiltonian.imag)) > 0:
            raise ValueError("LMG Hamiltonian should be real in the S_z basis")
        self.spins = spin_operators(p.s)
        self.gibbs = GibbsState.from_hamiltonian(self.hamiltonian, p.beta)
        self.family = LindbladianFamily(self.gibbs, self.spins.as_list())
        self.sectors = superoperator_sectors((-1.0) ** np.arange(p.dim))

    def normalize(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=complex)
        return gamma * (self.params.cost_target / self.family.cost(gamma))

    def assembly(self, gamma) -> LindbladAssembly:
        return self.family.assemble(self.normalize(gamma))

    def _parity_invariant(self, gamma) -> bool:
        scale = max(float(np.max(np.abs(gamma))), 1e-300)
        return abs(gamma[0, 2]) <= 1e-13 * scale and abs(gamma[1, 2]) <= 1e-13 * scale

    def gap_report(self, gamma, *, normalized: bool = False, method: str = "auto",
                   zero_rtol: float = ZERO_RTOL) -> SpectralReport:
        """Gap for a kinetic matrix (rescaled onto the cost constraint unless ``normalized``).

        ``auto`` uses dense parity sectors when the kinetic matrix is parity
        invariant, otherwise matrix-free Lanczos on the full space.
        """
        gamma = np.asarray(gamma, dtype=complex) if normalized else self.normalize(gamma)
        if method == "auto":
            method = "sectors" if self._parity_invariant(gamma) else "lanczos"
        if method == "sectors":
            best = None
            for i, idx in enumerate(self.sectors):
                block = self.family.parent_block(gamma, idx, key=("parity", i))
                if np.max(np.abs(block.imag)) == 0:
                    block = block.real
                rep = gap(block, 1 if i == 0 else 0, method="dense", sector=i, zero_rtol=zero_rtol)
                if best is None or rep.gap < best.gap:
                    best = rep
                if i == 0:
                    zero = rep
            best.zero_mode_residual = zero.zero_mode_residual
            best.cost = self.family.cost(gamma)
            return best
        if method == "lanczos":
            mv, tfd = self.family.parent_matvec(gamma)
            rep = gap((mv, tfd.size), 1, method="lanczos", ground=tfd, k=3, zero_rtol=zero_rtol)
            rep.cost = self.family.cost(gamma)
            return rep
        if method == "dense":
            asm = self.family.assemble(gamma)
            rep = gap(asm.parent, 1, method="dense", ground=asm.tfd, zero_rtol=zero_rtol)
            rep.cost = self.family.cost(gamma)
            return rep
        raise ValueError(f"unknown method {method!r}")

    def gap(self, gamma, **kwargs) -> float:
        return self.gap_report(gamma, **kwargs).gap

    def sector_gap(self, gamma, *, normalized: bool = False) -> float:
        """Eigenvalue-only parity-sector gap (lowest two levels per block); the optimizer objective."""
        gamma = np.asarray(gamma, dtype=complex) if normalized else self.normalize(gamma)
        if not self._parity_invariant(gamma):
            return self.gap(gamma, normalized=True, method="lanczos")
        vals = []
        for i, idx in enumerate(self.sectors):
            block = self.family.parent_block(gamma, idx, key=("parity", i))
            if np.max(np.abs(block.imag)) == 0:
                block = block.real
            ev = scipy.linalg.eigh(block, eigvals_only=True, subset_by_index=[0, 1])
            # the ground sector always holds the thermofield-double zero mode
            vals.append(ev[1] if i == 0 else ev[0])
        return max(float(min(vals)), 0.0)

    def problem(self, *, restarts: int = 8, seed: int = 0, budget: int = 300, threads=None) -> OptimizationProblem:
        return OptimizationProblem(
            objective=lambda g: self.sector_gap(g, normalized=True),
            parametrization=CHOLESKY_FACTOR,
            size=3,
            cost=self.family.cost,
            target_cost=self.params.cost_target,
            budget=budget,
            restarts=restarts,
            seed=seed,
            canonical=np.eye(3),
            real_factor=True,
            kinetic_group=lmg_kinetic_group(),
            threads=threads,
        )


def lmg_assembly(p: LMGParams, gamma) -> LindbladAssembly:
    """Assembly for ``p`` with ``gamma`` rescaled to cost ``Gamma s (s + 1)``."""
    return LMGModel(p).assembly(gamma)


def lmg_optimize(p: LMGParams, *, restarts: int = 8, seed: int = 0, budget: int = 300, threads=None) -> dict:
    model = LMGModel(p)
    res = optimize(model.problem(restarts=restarts, seed=seed, budget=budget, threads=threads))
    return {
        "canonical_gap": res.canonical_gap,
        "optimized_gap": res.best_gap,
        "ratio": res.best_gap / res.canonical_gap if res.canonical_gap else math.inf,
        "gamma_opt": res.best_params,
        "cost": model.family.cost(res.best_params),
        "evaluations": len(res.trace),
    }


# -- kinetic Ising ----------------------------------------------------------------------------------


def ki_chain(n: int, *, eta: Optional[float] = None, epsilon: Optional[float] = None, j: float = 1.0):
    if (eta is None) == (epsilon is None):
        raise ValueError("give exactly one of eta and epsilon")
    if eta is not None:
        return ClassicalIsingChain.from_eta(n, eta, j)
    return ClassicalIsingChain.from_epsilon(n, epsilon, j)


@dataclass
class SectorGap:
    label: SectorLabel
    report: SpectralReport


def ki_sector_gaps(gen, n: int, labels=None, *, method: str = "auto", zero_rtol: float = ZERO_RTOL) -> list[SectorGap]:
    """Lowest relevant eigenvalue in each symmetry sector of a kinetic Ising parent."""
    labels = sector_labels(n) if labels is None else labels
    out = []
    for lab in labels:
        block, basis = sector_decompose(gen.parent, n, lab, check=False)
        ground_sector = lab.flip_parity == 1 and lab.momentum_index == 0
        m = "dense" if (method == "auto" and block.shape[0] <= 2048) else method
        if m == "auto":
            m = "lanczos"
        ground = basis.conj().T @ gen.sqrt_equilibrium if ground_sector else None
        if block.shape[0] == 0:
            continue
        if np.max(np.abs(block.imag.data)) == 0 if block.nnz else True:
            block = block.real
        if m == "dense":
            rep = gap(block.toarray(), 1 if ground_sector else 0, method="dense", ground=ground, sector=lab,
                      zero_rtol=zero_rtol)
        else:
            rep = gap(block, 1 if ground_sector else 0, method="lanczos", ground=ground, sector=lab,
                      zero_rtol=zero_rtol)
        out.append(SectorGap(lab, rep))
    return out


def ki_gap(gen, n: int, *, method: str = "sectors", zero_rtol: float = ZERO_RTOL) -> SpectralReport:
    """Full-space gap: the smallest sector gap (``sectors``) or one dense solve."""
    if method == "dense":
        return gap(gen.parent.toarray(), 1, method="dense", ground=gen.sqrt_equilibrium, zero_rtol=zero_rtol)
    gaps = ki_sector_gaps(gen, n, zero_rtol=zero_rtol)
    best = min(gaps, key=lambda sg: sg.report.gap)
    return best.report


def ki_ground_sector_gap(gen, n: int, method: str = "auto", zero_rtol: float = ZERO_RTOL) -> SpectralReport:
    return ki_sector_gaps(gen, n, [SectorLabel(1, 0)], method=method, zero_rtol=zero_rtol)[0].report


def ki_problem(eta: float, *, objective: str = "delta12", n: int = 10, gamma: float = 1.0,
               restarts: int = 8, seed: int = 0, budget: int = 200, threads=None) -> OptimizationProblem:
    """Scalar ``delta`` problem; ``objective`` is ``delta12``, ``full_min`` or ``ed``."""
    if not 0 <= eta < 1:
        if eta >= 1:
            raise kb.ZeroTemperatureError("eta >= 1 is zero temperature; the gap closes")
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if objective == "delta12":
        fn = lambda d: float(kb.delta12(eta, d, gamma))  # noqa: E731
    elif objective == "full_min":
        fn = lambda d: kb.analytic_bounds(eta, d, n, gamma).full_min  # noqa: E731
    elif objective == "ed":
        chain = ClassicalIsingChain.from_eta(n, eta)

        def fn(d):
            return ki_gap(build_ki1d(chain, KineticParamsKI(gamma, d)), n).gap
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return OptimizationProblem(
        objective=fn, parametrization=SCALAR_DELTA, size=1, budget=budget, restarts=restarts,
        seed=seed, bounds=(-1.0, 1.0), canonical=0.0, threads=threads,
    )


# -- sweeps --------------------------------------------------------------------------------------------

SWEEP_AXES = ("s", "h_z", "delta", "eta", "epsilon", "y", "N")


@dataclass
class SweepSpec:
    """One-axis sweep; ``fixed`` holds the other parameters."""

    model: str
    axis: str
    grid: list
    fixed: dict = field(default_factory=dict)
    outputs: tuple = ()
    axis2: Optional[str] = None
    grid2: list = field(default_factory=list)

    def __post_init__(self):
        if self.model not in ("lmg", "ki"):
            raise ValueError(f"model must be 'lmg' or 'ki', got {self.model!r}")
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        _check_grid(self.grid)
        if self.axis2 is not None:
            if self.model != "ki" or self.axis not in ("eta", "epsilon") or self.axis2 not in ("delta", "y"):
                raise ValueError("a second axis is only available as (eta|epsilon) x (delta|y) for the kinetic Ising model")
            _check_grid(self.grid2)


def _check_grid(grid):
    g = np.asarray(grid, dtype=float)
    if g.size and not np.all(np.isfinite(g)):
        raise ValueError("grid values must be finite")
    if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
        raise ValueError("grid must be strictly monotone")


def _map_ordered(fn, items, threads):
    threads = threads or default_threads()
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _safe(fn, base: dict):
    def point(x):
        row = dict(base(x))
        try:
            row.update(fn(x))
            row["error"] = ""
        except Exception as exc:  # per-point failures are recorded, the sweep goes on
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    return point


def fig2_sweep(s_values, *, j_y_values=(0.0, -1.0), h_z: float = 1.0, j_x: float = 1.0,
               beta_tilde: float = 5.0, gamma: float = 1.0, optimized: bool = False, restarts: int = 8,
               seed: int = 0, budget: int = 300, residuals: bool = True, threads=None,
               h_z_values=None) -> list[dict]:
    """LMG gaps along ``s`` (or along ``h_z`` when ``h_z_values`` is given, at fixed ``s``)."""
    points = []
    if h_z_values is None:
        points = [(jy, s, h_z) for jy in j_y_values for s in s_values]
    else:
        s_fixed = list(s_values)[0]
        points = [(jy, s_fixed, h) for jy in j_y_values for h in h_z_values]

    def base(pt):
        jy, s, h = pt
        return {"s": float(Fraction(s)), "h_z": h, "J_x": j_x, "J_y": jy, "beta_tilde": beta_tilde}

    def compute(pt):
        jy, s, h = pt
        p = LMGParams(s, h, j_x, jy, beta_tilde, gamma)
        model = LMGModel(p)
        rep = model.gap_report(np.eye(3))
        row = {"canonical_gap": rep.gap, "cost": rep.cost}
        if residuals and p.dim**2 <= 1024:
            asm = model.assembly(np.eye(3))
            row["db_residual"] = detailed_balance_residual(asm)
            row["steady_residual"] = asm.diagnostics["steady_state_residual"]
        if optimized:
            res = optimize(model.problem(restarts=restarts, seed=seed, budget=budget, threads=1))
            row["optimized_gap"] = res.best_gap
            row["ratio"] = res.best_gap / rep.gap
        return row

    return _map_ordered(_safe(compute, base), points, threads)


def fig3_sweep(n: int, *, epsilon_values, delta_values, gamma: float = 1.0, ed: bool = True,
               threads=None) -> list[dict]:
    """Kinetic Ising gaps and bounds over an ``(epsilon, delta)`` grid."""
    points = [(e, d) for e in epsilon_values for d in delta_values]

    def base(pt):
        e, d = pt
        return {"N": n, "epsilon": e, "eta": kb.eta_from_epsilon(e), "delta": d, "y": 1.0 - d}

    def compute(pt):
        e, d = pt
        eta = kb.eta_from_epsilon(e)
        row = kb.analytic_bounds(eta, d, n, gamma).as_dict()
        if ed:
            chain = ClassicalIsingChain.from_epsilon(n, e)
            row["ed_gap"] = ki_gap(build_ki1d(chain, KineticParamsKI(gamma, d)), n).gap
        return row

    return _map_ordered(_safe(compute, base), points, threads)


def fig4_sweep(n_values, *, delta: float = -0.99, epsilon: float = 0.0, gamma: float = 1.0,
               threads=None) -> list[dict]:
    """Ground-sector gap against the low-temperature estimate ``4 Gamma (1 + delta)/(N - 1)``."""

    def base(n):
        return {"N": n, "delta": delta, "epsilon": epsilon}

    def compute(n):
        chain = ClassicalIsingChain.from_epsilon(n, epsilon)
        gen = build_ki1d(chain, KineticParamsKI(gamma, delta))
        return {
            "ground_sector_gap": ki_ground_sector_gap(gen, n).gap,
            "Delta5_approx": float(kb.delta5_approx(delta, n, gamma)),
            "psi5_quotient": rayleigh_quotient(gen.parent, variational_state(chain, 5)),
        }

    return _map_ordered(_safe(compute, base), list(n_values), threads)


def run_sweep(spec: SweepSpec, threads=None) -> list[dict]:
    """Dispatch a one-axis sweep to the matching sweep recipe."""
    f = dict(spec.fixed)
    grid = list(spec.grid)
    if not grid:
        return []
    if spec.model == "lmg":
        if spec.axis == "s":
            return fig2_sweep(grid, j_y_values=(f.get("J_y", 0.0),), h_z=f.get("h_z", 1.0), j_x=f.get("J_x", 1.0),
                              beta_tilde=f.get("beta_tilde", 5.0), gamma=f.get("Gamma", 1.0),
                              optimized=bool(f.get("optimize", False)), seed=int(f.get("seed", 0)),
                              restarts=int(f.get("restarts", 8)), threads=threads)
        if spec.axis == "h_z":
            return fig2_sweep([f.get("s", 20)], j_y_values=(f.get("J_y", 0.0),), h_z_values=grid,
                              j_x=f.get("J_x", 1.0), beta_tilde=f.get("beta_tilde", 5.0), gamma=f.get("Gamma", 1.0),
                              optimized=bool(f.get("optimize", False)), seed=int(f.get("seed", 0)),
                              restarts=int(f.get("restarts", 8)), threads=threads)
        raise ValueError(f"axis {spec.axis!r} is not available for the LMG model")
    n = int(f.get("N", 10))
    gamma = f.get("Gamma", 1.0)
    ed = bool(f.get("ed", True))
    if spec.axis == "N":
        return fig4_sweep([int(x) for x in grid], delta=f.get("delta", -0.99), epsilon=f.get("epsilon", 0.0),
                          gamma=gamma, threads=threads)
    if spec.axis in ("delta", "y"):
        deltas = grid if spec.axis == "delta" else [1.0 - y for y in grid]
        eps = [f["epsilon"]] if "epsilon" in f else [_eps_from_eta(f.get("eta", 1 / math.sqrt(3)))]
        return fig3_sweep(n, epsilon_values=eps, delta_values=deltas, gamma=gamma, ed=ed, threads=threads)
    if spec.axis in ("eta", "epsilon"):
        eps = grid if spec.axis == "epsilon" else [_eps_from_eta(e) for e in grid]
        if spec.axis2 is None:
            deltas = [f.get("delta", 0.0)]
        else:
            deltas = list(spec.grid2) if spec.axis2 == "delta" else [1.0 - y for y in spec.grid2]
            if not deltas:
                return []
        return fig3_sweep(n, epsilon_values=eps, delta_values=deltas, gamma=gamma, ed=ed, threads=threads)
    raise ValueError(f"axis {spec.axis!r} is not available for the kinetic Ising model")


def _eps_from_eta(eta: float) -> float:
    g = kb.gamma_from_eta(eta)
    return math.sqrt(max(0.0, 1.0 - g * g))
