import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermogap.classical import (
    ClassicalIsingChain,
    FlipCollection,
    InfiniteTemperatureViolation,
    KineticParamsKI,
    LocalTerm,
    build_ki1d,
    build_multiflip,
    equilibrium_distribution,
    ising_terms,
    ki_single_flip_rate,
    rayleigh_quotient,
    sqrt_equilibrium_vector,
    variational_state,
)
from thermogap.optimize import SymmetryGroup, symmetrize
from thermogap.sectors import translation_operator
from thermogap.spectral import cost_classical, frustration_free_check, gap

import oracles


def chain_strategy():
    return st.tuples(st.integers(3, 7), st.floats(0.0, 1.5), st.floats(0.2, 2.0), st.floats(-1.0, 1.0))


@settings(max_examples=25, deadline=None)
@given(chain_strategy())
def test_generator_matches_reference(params):
    n, beta, rate, delta = params
    gen = build_ki1d(ClassicalIsingChain(n, beta), KineticParamsKI(rate, delta))
    ref = oracles.ki_generator(n, beta, rate, delta)
    assert np.max(np.abs(gen.liouvillian.toarray() - ref)) < 1e-12 * max(1.0, rate)


@settings(max_examples=25, deadline=None)
@given(chain_strategy())
def test_generator_soundness(params):
    n, beta, rate, delta = params
    chain = ClassicalIsingChain(n, beta)
    gen = build_ki1d(chain, KineticParamsKI(rate, delta))
    lmat = gen.liouvillian.toarray()
    assert np.max(np.abs(lmat.sum(axis=0))) < 1e-12
    off = lmat - np.diag(np.diag(lmat))
    assert off.min() >= -1e-14
    p = np.exp(-beta * oracles.ising_energies(n))
    p /= p.sum()
    assert np.allclose(equilibrium_distribution(chain), p, atol=1e-14)
    assert np.max(np.abs(lmat @ p)) < 1e-11
    # classical detailed balance: P^{-1} L P = L^T
    assert np.max(np.abs((lmat * p[None, :]) / p[:, None] - lmat.T)) < 1e-12 * max(1.0, rate)
    # parent by similarity with sqrt(p)
    sq = np.sqrt(p)
    parent = -(lmat * sq[None, :]) / sq[:, None]
    assert np.max(np.abs(parent - gen.parent.toarray())) < 1e-12 * max(1.0, rate)
    assert np.max(np.abs(gen.parent @ gen.sqrt_equilibrium)) < 1e-10


def test_all_up_flip_rate():
    n, eta, delta = 6, 0.4, 0.3
    chain = ClassicalIsingChain.from_eta(n, eta)
    gen = build_ki1d(chain, KineticParamsKI(1.5, delta))
    lmat = gen.liouvillian.toarray()
    expected = 1.5 * (1 + delta) * (1 - chain.gamma_eq)
    for i in range(n):
        assert abs(lmat[1 << (n - 1 - i), 0] - expected) < 1e-14


def test_infinite_temperature_decoupled_flips():
    gen = build_ki1d(ClassicalIsingChain(4, 0.0), KineticParamsKI(1.0, 0.0))
    lmat = gen.liouvillian.toarray()
    assert np.allclose(lmat, lmat.T, atol=1e-13)
    x = np.array([[0, 1], [1, 0]])
    expected = sum(np.kron(np.kron(np.eye(2**i), x - np.eye(2)), np.eye(2 ** (3 - i))) for i in range(4))
    assert np.allclose(lmat, expected)
    assert abs(gap(gen.parent.toarray(), 1).gap - 2.0) < 1e-12


def test_chain_parametrizations():
    c = ClassicalIsingChain.from_eta(5, 0.5)
    assert abs(math.tanh(c.beta) - 0.5) < 1e-15
    assert abs(c.gamma_eq - math.tanh(2 * c.beta)) < 1e-15
    assert abs(c.epsilon - math.sqrt(1 - c.gamma_eq**2)) < 1e-15
    e = ClassicalIsingChain.from_epsilon(5, 0.5)
    assert abs(e.epsilon - 0.5) < 1e-14
    z = ClassicalIsingChain.from_epsilon(5, 0.0)
    assert z.zero_temperature and z.epsilon == 0.0


def test_short_chain_and_bad_params_rejected():
    with pytest.raises(ValueError):
        build_ki1d(ClassicalIsingChain(2, 0.1), KineticParamsKI())
    with pytest.raises(ValueError):
        KineticParamsKI(1.0, 1.5)
    with pytest.raises(ValueError):
        KineticParamsKI(0.0, 0.0)


def test_local_costs_and_frustration_freeness():
    chain = ClassicalIsingChain.from_epsilon(8, 0.5)
    gen = build_ki1d(chain, KineticParamsKI(1.0, 0.0))
    assert np.allclose(sum(t.toarray() for t in gen.local_terms), gen.parent.toarray())
    rep = frustration_free_check(gen.local_terms, gen.sqrt_equilibrium)
    assert rep.passed
    assert abs(cost_classical(gen) - gen.local_costs().sum()) < 1e-12


def test_multiflip_reproduces_single_flip():
    n = 6
    chain = ClassicalIsingChain.from_eta(n, 0.55)
    kp = KineticParamsKI(1.2, -0.35)
    single = build_ki1d(chain, kp)
    colls = [FlipCollection(frozenset([i])) for i in range(n)]
    multi = build_multiflip(n, ising_terms(n, chain.j), colls, ki_single_flip_rate(n, kp, chain), chain.beta)
    assert np.max(np.abs(multi.liouvillian.toarray() - single.liouvillian.toarray())) < 1e-13
    assert np.max(np.abs(multi.parent.toarray() - single.parent.toarray())) < 1e-13


def test_multiflip_infinite_temperature_symmetric():
    n = 5
    colls = [FlipCollection(frozenset([i, (i + 1) % n])) for i in range(n)]
    gen = build_multiflip(n, ising_terms(n), colls, lambda k, b, a: 0.7, 0.0)
    lmat = gen.liouvillian.toarray()
    assert np.allclose(lmat, lmat.T, atol=1e-13)


def test_multiflip_two_site_flips_satisfy_detailed_balance():
    n, beta = 6, 0.8
    colls = [FlipCollection(frozenset([i, (i + 1) % n])) for i in range(n)]
    terms = ising_terms(n) + [LocalTerm((0,), np.array([-0.3, 0.3]))]  # -0.3 s_0
    gen = build_multiflip(n, terms, colls, lambda k, b, a: 1.0, beta)
    lmat = gen.liouvillian.toarray()
    energy = oracles.ising_energies(n) - 0.3 * (1 - 2 * ((np.arange(2**n) >> (n - 1)) & 1))
    p = np.exp(-beta * (energy - energy.min()))
    p /= p.sum()
    assert np.max(np.abs(lmat @ p)) < 1e-12
    assert np.max(np.abs(lmat.sum(axis=0))) < 1e-12


def test_multiflip_rejects_asymmetric_strengths():
    n = 4
    colls = [FlipCollection(frozenset([0]))]

    def rate(k, before, after):
        # depends on the flipped site itself, so forward and backward strengths differ
        return np.where(before >> (n - 1) & 1, 1.0, 2.0)

    with pytest.raises(InfiniteTemperatureViolation):
        build_multiflip(n, ising_terms(n), colls, rate, 0.5)


def test_sqrt_equilibrium_vector_properties():
    chain = ClassicalIsingChain(6, 0.0)
    assert np.allclose(sqrt_equilibrium_vector(chain), 2 ** (-3) * np.ones(64))
    chain = ClassicalIsingChain(6, 0.7)
    v = sqrt_equilibrium_vector(chain)
    one_pair = int("000110", 2)  # two domain walls
    assert abs(v[0] / v[one_pair] - math.exp(2 * 0.7)) < 1e-12
    gen = build_ki1d(chain, KineticParamsKI(1.0, 0.2))
    assert np.max(np.abs(gen.parent @ v)) < 1e-10
    with pytest.raises(ValueError):
        sqrt_equilibrium_vector(ClassicalIsingChain(30, 0.1))


@pytest.mark.parametrize("n", [4, 6, 8, 10])
@pytest.mark.parametrize("delta", [-0.6, 0.0, 0.7])
def test_rayleigh_identities(n, delta):
    chain = ClassicalIsingChain.from_eta(n, 0.45)
    gen = build_ki1d(chain, KineticParamsKI(1.3, delta))
    q3 = rayleigh_quotient(gen.parent, variational_state(chain, 3))
    assert abs(q3 - n * 1.3 * (1 + delta) * (1 - chain.gamma_eq)) < 1e-10
    q4 = rayleigh_quotient(gen.parent, variational_state(chain, 4))
    assert abs(q4 - 4 * 1.3 * (1 - delta)) < 1e-10


def test_alternating_bond_state_is_eigenvector():
    chain = ClassicalIsingChain.from_eta(8, 0.6)
    gen = build_ki1d(chain, KineticParamsKI(1.0, -0.4))
    v = variational_state(chain, 4)
    assert np.max(np.abs(gen.parent @ v - 4 * 1.4 * v)) < 1e-10


def test_two_domain_wall_state_low_temperature():
    n = 10
    chain = ClassicalIsingChain.from_epsilon(n, 0.0)
    gen = build_ki1d(chain, KineticParamsKI(1.0, -0.99))
    q5 = rayleigh_quotient(gen.parent, variational_state(chain, 5))
    target = 4 * 0.01 / (n - 1)
    assert abs(q5 - target) < 0.1 * target


def test_variational_state_errors():
    chain = ClassicalIsingChain.from_eta(5, 0.3)
    with pytest.raises(ValueError):
        variational_state(chain, 4)
    with pytest.raises(ValueError):
        variational_state(chain, 9)


def test_translation_average_makes_rates_uniform():
    n = 6
    chain = ClassicalIsingChain.from_eta(n, 0.4)
    rng = np.random.default_rng(3)
    rates = [(rng.uniform(0.5, 2.0), rng.uniform(-0.9, 0.9)) for _ in range(n)]
    gen = build_ki1d(chain, KineticParamsKI(), site_rates=rates)
    group = SymmetryGroup.generated_by([translation_operator(n)])
    assert len(group) == n
    sym = symmetrize(gen, group)
    t = translation_operator(n)
    lm = sym.liouvillian
    assert abs(t @ lm - lm @ t).max() < 1e-12
    assert np.max(np.abs(sym.liouvillian.toarray().sum(axis=0))) < 1e-12
    assert abs(sym.liouvillian @ equilibrium_distribution(chain)).max() < 1e-12
    again = symmetrize(sym, group)
    assert abs(again.liouvillian - sym.liouvillian).max() < 1e-12
    assert frustration_free_check(sym.local_terms, sym.sqrt_equilibrium).passed
