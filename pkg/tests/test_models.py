import math

import numpy as np
import pytest

from thermogap import bounds as kb
from thermogap.models import (
    LMGModel,
    LMGParams,
    SweepSpec,
    fig2_sweep,
    fig3_sweep,
    fig4_sweep,
    ki_chain,
    ki_gap,
    ki_ground_sector_gap,
    lmg_assembly,
    lmg_hamiltonian,
    run_sweep,
)
from thermogap.classical import KineticParamsKI, build_ki1d
from thermogap.quantum import detailed_balance_residual


def test_lmg_params_validation():
    assert LMGParams(2.5).dim == 6
    assert LMGParams(4, beta_tilde=6.0).beta == 1.5
    with pytest.raises(ValueError):
        LMGParams(0.3)
    with pytest.raises(ValueError):
        LMGParams(1, beta_tilde=-1.0)
    with pytest.raises(ValueError):
        LMGParams(1, gamma=0.0)


def test_lmg_hamiltonian_spin_half():
    h = lmg_hamiltonian(LMGParams(0.5, h_z=1.0, j_x=1.0, j_y=0.0))
    # S_x^2 = 1/4 for spin one-half, so H = -S_z - 1/4
    assert np.allclose(h, np.diag([-0.75, 0.25]))


@pytest.mark.parametrize("s", [0.5, 1, 3, 7.5, 20])
def test_cost_normalization_at_every_size(s):
    p = LMGParams(s, beta_tilde=5.0)
    model = LMGModel(p)
    g = model.normalize(np.diag([1.0, 2.0, 0.5]))
    assert abs(model.family.cost(g) - p.cost_target) < 1e-10 * p.cost_target


@pytest.mark.parametrize("s", [1, 4, 10])
def test_infinite_temperature_canonical_gap(s):
    model = LMGModel(LMGParams(s, beta_tilde=0.0, j_y=-1.0))
    assert abs(model.gap(np.eye(3)) - 1.0) < 1e-10


def test_assembly_is_detailed_balanced():
    asm = lmg_assembly(LMGParams(3, beta_tilde=5.0, j_y=-1.0), np.eye(3))
    assert detailed_balance_residual(asm) < 1e-10


def test_lmg_gap_methods_agree():
    model = LMGModel(LMGParams(3, beta_tilde=5.0))
    g = np.diag([0.3, 1.0, 0.2])
    dense = model.gap(g, method="dense")
    assert abs(model.gap(g, method="sectors") - dense) < 1e-10
    assert abs(model.sector_gap(g) - dense) < 1e-10


def test_lmg_canonical_gap_converges():
    for jy in (0.0, -1.0):
        rows = fig2_sweep([5, 10, 15, 20], j_y_values=(jy,), residuals=False)
        steps = np.abs(np.diff([r["canonical_gap"] for r in rows]))
        assert np.all(np.diff(steps) < 0)


def test_fig2_rows_carry_residuals_and_cost():
    rows = fig2_sweep([1, 2], j_y_values=(0.0, -1.0))
    assert [(r["J_y"], r["s"]) for r in rows] == [(0.0, 1.0), (0.0, 2.0), (-1.0, 1.0), (-1.0, 2.0)]
    for r in rows:
        assert r["error"] == ""
        assert r["db_residual"] < 1e-10
        assert abs(r["cost"] - r["s"] * (r["s"] + 1)) < 1e-10


def test_fig2_along_field():
    rows = fig2_sweep([2], h_z_values=[0.5, 1.0, 1.5], j_y_values=(-1.0,), residuals=False)
    assert [r["h_z"] for r in rows] == [0.5, 1.0, 1.5]


def test_fig3_recipe_bounds_dominate():
    rows = fig3_sweep(8, epsilon_values=[0.5], delta_values=np.linspace(-0.9, 0.9, 7))
    for r in rows:
        assert r["ed_gap"] <= r["full_min"] * 1.05


def test_fig3_records_point_failures():
    rows = fig3_sweep(6, epsilon_values=[0.5], delta_values=[-1.0, 0.0])
    assert rows[0]["error"].startswith("NonUniqueSteadyState")
    assert rows[1]["error"] == "" and rows[1]["ed_gap"] > 0


def test_fig4_recipe_matches_low_temperature_estimate():
    rows = fig4_sweep(range(4, 13))
    assert [r["N"] for r in rows] == list(range(4, 13))
    for r in rows:
        if r["N"] >= 8:
            assert abs(r["ground_sector_gap"] - r["Delta5_approx"]) < 0.1 * r["Delta5_approx"]


def test_unique_zero_mode_below_low_temperature():
    for n in (6, 9, 12):
        for eta in (0.2, 0.6, 0.9):
            gen = build_ki1d(ki_chain(n, eta=eta), KineticParamsKI(1.0, 0.3))
            assert ki_gap(gen, n).gap > 0
            assert ki_ground_sector_gap(gen, n).zero_modes == 1


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("lmg", "s", [1, 3, 2])
    with pytest.raises(ValueError):
        SweepSpec("lmg", "s", [1, float("nan")])
    with pytest.raises(ValueError):
        SweepSpec("other", "s", [1])
    with pytest.raises(ValueError):
        SweepSpec("lmg", "temperature", [1])
    with pytest.raises(ValueError):
        SweepSpec("lmg", "s", [1], axis2="delta", grid2=[0.0])


def test_empty_grid_gives_empty_table():
    assert run_sweep(SweepSpec("ki", "delta", [])) == []
    assert run_sweep(SweepSpec("ki", "eta", [0.3], axis2="y", grid2=[])) == []


def test_sweep_rows_keep_grid_order_with_threads():
    spec = SweepSpec("ki", "delta", [0.5, 0.0, -0.5], fixed={"N": 6, "epsilon": 0.5})
    serial = run_sweep(spec, threads=1)
    threaded = run_sweep(spec, threads=3)
    assert [r["delta"] for r in threaded] == [0.5, 0.0, -0.5]
    assert serial == threaded


def test_surface_sweep_over_eta_and_y():
    spec = SweepSpec("ki", "eta", [0.2, 0.5], axis2="y", grid2=[0.5, 1.0], fixed={"N": 6, "ed": False})
    rows = run_sweep(spec)
    assert len(rows) == 4
    for r in rows:
        assert abs(r["eta"] - (0.2 if r is rows[0] or r is rows[1] else 0.5)) < 1e-12
        assert r["full_min"] == min(r["Delta12"], r["Delta3"], r["Delta4"])
        assert "ed_gap" not in r


def test_ki_chain_parametrization():
    c = ki_chain(6, eta=1 / math.sqrt(3))
    assert abs(c.gamma_eq - kb.gamma_from_eta(1 / math.sqrt(3))) < 1e-14
    with pytest.raises(ValueError):
        ki_chain(6)
