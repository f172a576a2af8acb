import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh

from orlicz_frac.mesh import Grid, GridFunction, MeshError, Weight, modular_G, modular_sG
from orlicz_frac.operator import (FormContext, dirichlet_solve, energy_F, energy_G, grad_F,
                                  grad_G, residual)
from orlicz_frac.optim import NonConvergence, SolverConfig
from orlicz_frac.young import make_family

from conftest import family_zoo
from helpers import (assemble_p2_matrix, central_difference_gradient, fd_relative_error,
                     smooth_random)

ZOO = family_zoo()
P2 = make_family("power", [2])
GRID64 = Grid.uniform(-1, 1, 64)


def ctx_for(F, s=0.5, N=64, weight=None):
    g = Grid.uniform(-1, 1, N)
    return FormContext(F, s, g, weight)


def test_zero_function():
    ctx = ctx_for(P2)
    z = np.zeros(64)
    assert energy_F(ctx, z) == 0.0 and energy_G(ctx, z) == 0.0
    assert not np.any(grad_F(ctx, z).values) and not np.any(grad_G(ctx, z).values)
    assert residual(ctx, z, 3.0) == 0.0


def test_energy_F_is_modular_sG():
    rng = np.random.default_rng(0)
    for name in ("power3", "powerlog", "product"):
        ctx = ctx_for(ZOO[name], 0.4)
        for _ in range(10):
            u = GridFunction(ctx.grid, rng.normal(size=64))
            assert energy_F(ctx, u) == modular_sG(u, ctx.young, 0.4)


def test_energy_F_hat_positive_finite():
    ctx = ctx_for(P2)
    u = np.maximum(0, 1 - np.abs(ctx.grid.nodes))
    assert 0 < energy_F(ctx, u) < np.inf


def test_energy_G_weighted():
    g = GRID64
    w = Weight.from_values(g, 1 + 0.5 * np.sin(g.nodes))
    ctx = FormContext(ZOO["powerlog"], 0.5, g, w)
    u = GridFunction(g, np.random.default_rng(1).normal(size=64))
    assert energy_G(ctx, u) == pytest.approx(modular_G(u, ctx.young, w), rel=1e-14)


def test_grad_G_power_two_is_hu():
    ctx = ctx_for(P2)
    u = np.random.default_rng(2).normal(size=64)
    np.testing.assert_array_equal(grad_G(ctx, u).values, ctx.grid.h * u)


@pytest.mark.parametrize("name", sorted(ZOO))
@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_grad_F_finite_differences(name, s):
    ctx = ctx_for(ZOO[name], s)
    rng = np.random.default_rng(zlib.crc32(f"{name}-{s}".encode()))
    for _ in range(3):
        u = smooth_random(ctx.grid, rng)
        step = 1e-6 * np.abs(u).max()
        fd = central_difference_gradient(lambda v: energy_F(ctx, v), u, step)
        assert fd_relative_error(grad_F(ctx, u).values, fd) <= 1e-5


@pytest.mark.parametrize("name", sorted(ZOO))
def test_grad_G_finite_differences(name):
    w = Weight.from_values(GRID64, 1 + 0.3 * np.cos(3 * GRID64.nodes))
    ctx = FormContext(ZOO[name], 0.5, GRID64, w)
    rng = np.random.default_rng(5)
    for _ in range(3):
        u = smooth_random(ctx.grid, rng)
        fd = central_difference_gradient(lambda v: energy_G(ctx, v), u, 1e-6 * np.abs(u).max())
        assert fd_relative_error(grad_G(ctx, u).values, fd) <= 1e-6


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5])
def test_euler_homogeneity(p):
    ctx = ctx_for(make_family("power", [p]), 0.6)
    u = np.random.default_rng(6).normal(size=64)
    assert grad_F(ctx, u).values @ u == pytest.approx(p * energy_F(ctx, u), rel=1e-9)
    assert grad_G(ctx, u).values @ u == pytest.approx(p * energy_G(ctx, u), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(name=st.sampled_from(sorted(ZOO)), seed=st.integers(0, 10 ** 6), s=st.floats(0.1, 0.9))
def test_form_bounds(name, seed, s):
    F = ZOO[name]
    ctx = FormContext(F, s, Grid.uniform(-1, 1, 16))
    u = np.random.default_rng(seed).normal(size=16) * 10 ** np.random.default_rng(seed).uniform(-2, 2)
    E, pair = energy_F(ctx, u), grad_F(ctx, u).values @ u
    assert F.p_minus * E * (1 - 1e-9) <= pair <= F.p_plus * E * (1 + 1e-9)


def test_quadratic_matrix_matches_written_out_rule():
    for s in (0.2, 0.5, 0.8):
        ctx = ctx_for(P2, s, 24)
        A = assemble_p2_matrix(ctx.grid, s)
        np.testing.assert_allclose(ctx.quadratic_matrix(), A, rtol=1e-13, atol=1e-13 * np.abs(A).max())
        cols = np.column_stack([grad_F(ctx, e).values for e in np.eye(24)])
        np.testing.assert_allclose(cols, A, rtol=1e-12, atol=1e-12 * np.abs(A).max())


def test_residual_at_linear_eigenvector():
    ctx = ctx_for(P2, 0.5, 64)
    A = assemble_p2_matrix(ctx.grid, 0.5)
    vals, vecs = eigh(A, ctx.grid.h * np.eye(64))
    assert residual(ctx, vecs[:, 0], vals[0]) <= 1e-10
    assert residual(ctx, vecs[:, 1], vals[1]) <= 1e-10


def test_residual_lambda_zero():
    ctx = ctx_for(ZOO["powerlog"])
    u = np.random.default_rng(8).normal(size=64)
    assert residual(ctx, u, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_context_checks():
    with pytest.raises(MeshError):
        FormContext(P2, 1.2, GRID64)
    with pytest.raises(MeshError):
        FormContext(P2, 0.5, GRID64, Weight.constant(Grid.uniform(-1, 1, 32)))


# -- Dirichlet problem ----------------------------------------------------------

def test_dirichlet_zero_rhs():
    u = dirichlet_solve(ctx_for(ZOO["powerlog"]), np.zeros(64))
    assert not np.any(u.values)


def test_dirichlet_power_two_matches_linear_solve():
    ctx = ctx_for(P2, 0.5, 128)
    f = np.ones(128)
    u = dirichlet_solve(ctx, f).values
    ref = np.linalg.solve(assemble_p2_matrix(ctx.grid, 0.5), f * ctx.grid.h)
    np.testing.assert_allclose(u, ref, rtol=1e-8, atol=1e-10)


def test_dirichlet_symmetry_and_fine_reference():
    ctx = ctx_for(P2, 0.5, 128)
    u = dirichlet_solve(ctx, np.ones(128)).values
    assert np.max(np.abs(u - u[::-1])) <= 1e-8
    fine = dirichlet_solve(ctx_for(P2, 0.5, 512), np.ones(512)).values
    center = 0.5 * (u[63] + u[64])
    assert center == pytest.approx(0.5 * (fine[255] + fine[256]), rel=1e-3)


@pytest.mark.parametrize("name", ["power2", "power3", "powerlog", "spliced", "product"])
def test_dirichlet_gradient_tolerance_and_sign(name):
    ctx = ctx_for(ZOO[name])
    rng = np.random.default_rng(9)
    f = rng.uniform(0, 2, 64)
    cfg = SolverConfig()
    u = dirichlet_solve(ctx, f, cfg).values
    g = grad_F(ctx, u).values - f * ctx.grid.h
    assert np.linalg.norm(g) <= cfg.dirichlet_rtol * np.linalg.norm(f * ctx.grid.h)
    assert u.min() > 0
    v = dirichlet_solve(ctx, -f, cfg).values
    np.testing.assert_allclose(v, -u, rtol=1e-12, atol=1e-14)


def test_dirichlet_nonconvergence_carries_iterate():
    ctx = ctx_for(ZOO["power3"])
    with pytest.raises(NonConvergence) as err:
        dirichlet_solve(ctx, np.ones(64), SolverConfig(max_iter=1))
    assert err.value.iterate is not None and err.value.grad_norm > 0


def test_dirichlet_rejects_bad_rhs():
    with pytest.raises(MeshError):
        dirichlet_solve(ctx_for(P2), np.full(64, np.inf))
