"""Discrete energies F, G, their exact gradients, residuals and the Dirichlet solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .mesh import (Grid, GridFunction, MeshError, Weight, modular_sG_and_grad,
                   stencil)
from .optim import NonConvergence, SolverConfig, lbfgs
from .young import YoungFunction

ArrayLike = Union[GridFunction, np.ndarray]


@dataclass
class FormContext:
    young: YoungFunction
    s: float
    grid: Grid
    weight: Optional[Weight] = None
    _chol: Optional[tuple] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        stencil(self.grid, self.s)  # validates s
        if self.weight is not None and self.weight.grid != self.grid:
            raise MeshError("form context: weight lives on a different grid")

    @property
    def rho(self) -> np.ndarray:
        return np.ones(self.grid.N) if self.weight is None else self.weight.values

    def with_weight(self, weight: Optional[Weight]) -> "FormContext":
        return FormContext(self.young, self.s, self.grid, weight)

    def quadratic_matrix(self) -> np.ndarray:
        """Hessian of the discrete energy for G(t) = t^2/2 on the same stencil."""
        st = stencil(self.grid, self.s)
        n = self.grid.N
        A = np.zeros((n, n))
        w = st.far_coef * st.far_scale ** 2
        A[st.I, st.J] -= w
        A[st.J, st.I] -= w
        d = np.bincount(st.I, w, n) + np.bincount(st.J, w, n)
        # H(t) = t^2 / 4 for the quadratic G
        wb = 0.5 * st.band_coef * st.band_scale ** 2
        idx = np.arange(n - 1)
        A[idx, idx + 1] -= wb
        A[idx + 1, idx] -= wb
        d[:-1] += wb
        d[1:] += wb
        d += np.bincount(st.ext_idx, 0.5 * st.ext_coef * st.ext_scale ** 2, n)
        A[np.arange(n), np.arange(n)] += d
        return A

    def precond(self, v: np.ndarray) -> np.ndarray:
        if self._chol is None:
            self._chol = cho_factor(self.quadratic_matrix())
        return cho_solve(self._chol, v)


def _vals(u: ArrayLike) -> np.ndarray:
    return np.asarray(u, dtype=float)


def energy_F(ctx: FormContext, u: ArrayLike) -> float:
    return modular_sG_and_grad(_vals(u), ctx.young, ctx.grid, ctx.s, want_grad=False)[0]


def grad_F(ctx: FormContext, u: ArrayLike) -> GridFunction:
    return GridFunction(ctx.grid, modular_sG_and_grad(_vals(u), ctx.young, ctx.grid, ctx.s)[1])


def energy_G(ctx: FormContext, u: ArrayLike) -> float:
    v = np.abs(_vals(u))
    return float(np.sum(ctx.young.G(v) * ctx.rho) * ctx.grid.h)


def grad_G(ctx: FormContext, u: ArrayLike) -> GridFunction:
    v = _vals(u)
    return GridFunction(ctx.grid, ctx.rho * ctx.young.g(np.abs(v)) * np.sign(v) * ctx.grid.h)


def residual(ctx: FormContext, u: ArrayLike, lam: float) -> float:
    gf = grad_F(ctx, u).values
    gg = grad_G(ctx, u).values
    return float(np.linalg.norm(gf - lam * gg) / max(np.linalg.norm(gf), 1e-30))


def dirichlet_solve(ctx: FormContext, f: ArrayLike, config: Optional[SolverConfig] = None,
                    init: Optional[ArrayLike] = None) -> GridFunction:
    """Minimiser of F(u) - sum f_i u_i h, i.e. the discrete (-Delta_g)^s u = f."""
    config = config or SolverConfig()
    fv = _vals(f)
    if fv.shape != (ctx.grid.N,) or not np.all(np.isfinite(fv)):
        raise MeshError("dirichlet_solve: f must be finite with one value per cell")
    load = fv * ctx.grid.h
    scale = np.linalg.norm(load)
    if scale == 0:
        return GridFunction(ctx.grid, np.zeros(ctx.grid.N))
    F, grid, s = ctx.young, ctx.grid, ctx.s

    def objective(u):
        val, g = modular_sG_and_grad(u, F, grid, s)
        g = g - load
        return val - float(load @ u), g, float(np.linalg.norm(g)) / scale

    u0 = np.zeros(grid.N) if init is None else _vals(init)
    pre = ctx.precond if config.precondition else (lambda v: v)
    res = lbfgs(u0, objective, pre, config, config.dirichlet_rtol)
    if not res.converged:
        raise NonConvergence(
            f"dirichlet_solve: gradient norm {res.stat * scale:.3e} after {res.iterations} iterations",
            iterate=GridFunction(grid, res.x), grad_norm=res.stat * scale)
    return GridFunction(grid, res.x)
