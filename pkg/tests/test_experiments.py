import numpy as np
import pytest

from orlicz_frac.experiments import (ConfigurationError, RateFit, cell_mean, cube_oscillation,
                                     homogenization_sweep, max_principle_suite, parallel_map,
                                     verify_poincare, weight_continuity, weight_monotonicity)
from orlicz_frac.mesh import Grid, GridFunction, Weight, modular_G, modular_sG
from orlicz_frac.operator import FormContext
from orlicz_frac.young import make_family

from conftest import family_zoo

ZOO = family_zoo()
P2 = make_family("power", [2])
SINE = lambda y: 1 + 0.5 * np.sin(2 * np.pi * y)


def ctx_for(F, s=0.5, N=64):
    return FormContext(F, s, Grid.uniform(-1, 1, N))


def test_zero_function_poincare_equalities():
    g = Grid.uniform(-1, 1, 32)
    z = GridFunction(g, np.zeros(32))
    assert modular_G(z, P2) == 0.0 == modular_sG(z, P2, 0.5)
    lhs, pair = cube_oscillation(z.values, g.h, P2, 0.5, 3, 11)
    assert lhs == 0.0 == pair


def test_poincare_power_two_all_pass():
    rep = verify_poincare(ctx_for(P2), 100, seed=0)
    assert rep["modular_pass"] == rep["norm_pass"] == rep["cube_pass"] == 100
    assert rep["all_pass"]


@pytest.mark.parametrize("name", ["power3", "powerlog", "spliced", "sum"])
def test_poincare_families(name):
    rep = verify_poincare(ctx_for(ZOO[name], 0.4, 48), 30, seed=1)
    assert rep["all_pass"]
    assert 0 < rep["norm_ratio_max"] < 1
    assert len(rep["cube_ratio_sp_plus"]) == 30


def test_poincare_trials_validated():
    with pytest.raises(ValueError):
        verify_poincare(ctx_for(P2), 0)


def test_max_principle_cases():
    ctx = ctx_for(ZOO["power3"], 0.5, 64)
    spike = np.zeros(64)
    spike[5] = 1.0
    rep = max_principle_suite(ctx, [np.zeros(64), spike, np.ones(64)])
    assert rep["all_pass"]
    assert rep["cases"][0]["min_u"] == 0.0 == rep["cases"][0]["max_u"]
    assert rep["cases"][1]["min_u"] > 0
    with pytest.raises(ValueError):
        max_principle_suite(ctx, [-np.ones(64)])


@pytest.mark.parametrize("name", ["power2", "powerlog", "spliced"])
def test_max_principle_constant_rhs(name):
    assert max_principle_suite(ctx_for(ZOO[name]), [np.ones(64)])["all_pass"]


def test_weight_continuity_constant_sequence():
    ctx = ctx_for(ZOO["powerlog"])
    w = Weight.constant(ctx.grid, 1.3)
    rep = weight_continuity(ctx, 1.0, [w, w, w], w)
    assert all(g <= 2e-7 * rep["alpha_limit"] for g in rep["gaps"])


def test_weight_continuity_mollified_step():
    g = Grid.uniform(-1, 1, 128)
    x = g.nodes
    ctx = FormContext(ZOO["powerlog"], 0.5, g)
    seq = [Weight.from_values(g, 1 + 0.25 * (1 + np.tanh(x / w))) for w in 2.0 ** -np.arange(1, 8)]
    lim = Weight.from_values(g, np.where(x > 0, 1.5, 1.0))
    rep = weight_continuity(ctx, 1.0, seq, lim, tol=1e-3)
    assert rep["decreasing"] and rep["gaps"][-1] < 1e-3
    assert rep["eventually_below_tol_from"] is not None


def test_weight_monotonicity_random_pairs():
    rng = np.random.default_rng(21)
    ctx = ctx_for(ZOO["spliced"], 0.5, 48)
    for _ in range(3):
        a = 1 + rng.uniform(0, 1, 48)
        b = a + rng.uniform(0, 1, 48)
        rep = weight_monotonicity(ctx, 1.0, Weight.from_values(ctx.grid, a), Weight.from_values(ctx.grid, b))
        assert rep["holds"]


def test_cell_mean_of_sine_profile():
    assert cell_mean(SINE) == pytest.approx(1.0, abs=1e-14)


def test_homogenization_rate_power_two():
    ctx = ctx_for(P2, 0.5, 256)
    fit = homogenization_sweep(ctx, 1.0, SINE, [1 / 4, 1 / 8, 1 / 16, 1 / 32])
    assert fit.rho_bar == pytest.approx(1.0)
    assert fit.fitted_slope >= 0.8
    assert np.isfinite(fit.fitted_C)
    for e, gap in zip(fit.epsilons, fit.gaps):
        assert gap <= fit.fitted_C * e ** 1.0 * fit.alpha_bar ** 2 * (1 + 1e-12)
    assert max(fit.lemma_ratios) <= 1.5 * fit.lemma_ratios[0]


def test_homogenization_commensurability():
    ctx = ctx_for(P2, 0.5, 64)
    with pytest.raises(ConfigurationError, match="whole number"):
        homogenization_sweep(ctx, 1.0, SINE, [0.25, 0.1])


def test_ratefit_validation():
    with pytest.raises(ValueError):
        RateFit([0.1, 0.2], [1.0, 0.5], 1.0, 1.0)
    with pytest.raises(ValueError):
        RateFit([0.2, 0.1], [1.0, -0.5], 1.0, 1.0)


def test_parallel_map_independent_of_workers():
    ctx = ctx_for(ZOO["powerlog"], 0.5, 64)
    eps = [1 / 4, 1 / 8, 1 / 16]
    a = homogenization_sweep(ctx, 1.0, SINE, eps, workers=1)
    b = homogenization_sweep(ctx, 1.0, SINE, eps, workers=3)
    assert a.to_dict() == b.to_dict()
    assert parallel_map(lambda v: v * v, [1, 2, 3], 2) == [1, 4, 9]
