"""Invariant suites run by ``thermogap validate``.

Each check returns a :class:`CheckResult`; a suite passes when all its checks do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds as kb
from .classical import (
    ClassicalIsingChain,
    FlipCollection,
    KineticParamsKI,
    build_ki1d,
    build_multiflip,
    equilibrium_distribution,
    ising_terms,
    ki_single_flip_rate,
    rayleigh_quotient,
    variational_state,
)
from .models import LMGModel, LMGParams
from .operators import GibbsState, hermitian_spectrum
from .optimize import CLASSICAL, QUANTUM, single_body_optimal
from .quantum import detailed_balance_residual
from .spectral import gap


@dataclass
class CheckResult:
    suite: str
    check: str
    passed: bool
    value: float
    tolerance: float

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.value = float(self.value)

    def as_row(self) -> dict:
        return {"suite": self.suite, "check": self.check, "passed": self.passed,
                "value": self.value, "tolerance": self.tolerance}


def _random_psd(rng, m):
    b = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return b.conj().T @ b


def quantum_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    worst_db = worst_ss = worst_spec = 0.0
    for s in (0.5, 1, 2):
        for bt in (0.0, 1.0, 5.0):
            model = LMGModel(LMGParams(s, beta_tilde=bt))
            for gamma in (np.eye(3), _random_psd(rng, 3)):
                asm = model.assembly(gamma)
                worst_db = max(worst_db, detailed_balance_residual(asm))
                worst_ss = max(worst_ss, asm.diagnostics["steady_state_residual"])
                lam = np.sort(np.linalg.eigvals(-asm.lindbladian).real)
                hev, _ = hermitian_spectrum(asm.parent)
                worst_spec = max(worst_spec, float(np.max(np.abs(lam - hev))) / max(1.0, np.max(np.abs(hev))))
    out.append(CheckResult("quantum", "detailed_balance_residual", worst_db < 1e-10, worst_db, 1e-10))
    out.append(CheckResult("quantum", "steady_state_residual", worst_ss < 1e-9, worst_ss, 1e-9))
    out.append(CheckResult("quantum", "parent_spectrum_matches_generator", worst_spec < 1e-8, worst_spec, 1e-8))
    err = 0.0
    for s in (1, 5, 10):
        model = LMGModel(LMGParams(s, beta_tilde=0.0))
        err = max(err, abs(model.gap(np.eye(3)) - 1.0))
    out.append(CheckResult("quantum", "infinite_temperature_gap_equals_rate", err < 1e-10, err, 1e-10))
    return out


def single_body_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    qerr = cerr = 0.0
    for d in range(2, 17):
        h = rng.normal(size=(d, d))
        g = GibbsState.from_hamiltonian(h + h.T, rng.uniform(0.1, 2.0))
        qerr = max(qerr, abs(single_body_optimal(g, 1.0, QUANTUM).gap - d * d / (d * d - 1)))
        cerr = max(cerr, abs(single_body_optimal(g, 1.0, CLASSICAL).gap - d / (d - 1)))
    return [
        CheckResult("single_body", "quantum_optimum", qerr < 1e-10, qerr, 1e-10),
        CheckResult("single_body", "classical_optimum", cerr < 1e-10, cerr, 1e-10),
    ]


def classical_checks(seed: int = 0) -> list[CheckResult]:
    n = 6
    chain = ClassicalIsingChain.from_eta(n, 0.6)
    kp = KineticParamsKI(1.0, 0.3)
    gen = build_ki1d(chain, kp)
    lmat = gen.liouvillian.toarray()
    col = float(np.max(np.abs(lmat.sum(axis=0))))
    off = lmat - np.diag(np.diag(lmat))
    neg = float(-min(off.min(), 0.0))
    p = equilibrium_distribution(chain)
    stat = float(np.max(np.abs(lmat @ p)))
    terms = ising_terms(n, chain.j)
    colls = [FlipCollection(frozenset([i])) for i in range(n)]
    multi = build_multiflip(n, terms, colls, ki_single_flip_rate(n, kp, chain), chain.beta)
    mf = float(np.max(np.abs(multi.liouvillian.toarray() - lmat)))
    q3 = rayleigh_quotient(gen.parent, variational_state(chain, 3))
    e3 = abs(q3 - n * (1 + kp.delta) * (1 - chain.gamma_eq))
    q4 = rayleigh_quotient(gen.parent, variational_state(chain, 4))
    e4 = abs(q4 - 4 * (1 - kp.delta))
    rep = gap(gen.parent.toarray(), 1, ground=gen.sqrt_equilibrium)
    return [
        CheckResult("classical", "column_sums", col < 1e-12, col, 1e-12),
        CheckResult("classical", "offdiagonal_nonnegative", neg <= 1e-14, neg, 1e-14),
        CheckResult("classical", "stationary_distribution", stat < 1e-11, stat, 1e-11),
        CheckResult("classical", "multiflip_matches_single_flip", mf < 1e-13, mf, 1e-13),
        CheckResult("classical", "psi3_quotient", e3 < 1e-10, e3, 1e-10),
        CheckResult("classical", "psi4_quotient", e4 < 1e-10, e4, 1e-10),
        CheckResult("classical", "unique_steady_state", not rep.non_unique, float(rep.zero_modes), 1.0),
    ]


def bounds_checks(seed: int = 0) -> list[CheckResult]:
    worst_mat = 0.0
    for eta in np.linspace(0.05, 0.95, 10):
        for d in np.linspace(-1, 1, 9):
            lo = np.linalg.eigvalsh(kb.delta12_matrix(eta, d))[0]
            worst_mat = max(worst_mat, abs(lo - kb.delta12(eta, d)))
    worst_tr = 0.0
    for eta in np.linspace(0.02, 0.98, 50):
        ds = kb.transition_delta(eta)
        worst_tr = max(worst_tr, abs(kb.delta12(eta, ds) - kb.delta4(ds)))
    worst_opt = 0.0
    for eta in (0.1, 0.3, 0.5, 0.7):
        d_opt, g_opt = kb.optimal_coefficients(eta)
        worst_opt = max(worst_opt, abs(kb.delta12(eta, d_opt) - g_opt))
    return [
        CheckResult("bounds", "two_state_matrix", worst_mat < 1e-12, worst_mat, 1e-12),
        CheckResult("bounds", "transition_curve", worst_tr < 1e-9, worst_tr, 1e-9),
        CheckResult("bounds", "closed_form_optimum", worst_opt < 1e-10, worst_opt, 1e-10),
    ]


SUITES: dict[str, Callable[[int], list[CheckResult]]] = {
    "quantum": quantum_checks,
    "single_body": single_body_checks,
    "classical": classical_checks,
    "bounds": bounds_checks,
}


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)


def all_passed(results) -> bool:
    return all(r.passed and not (isinstance(r.value, float) and math.isnan(r.value)) for r in results)
