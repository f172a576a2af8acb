"""Verification harnesses: Poincare inequalities, maximum principles, weight
continuity and the periodic homogenization rate."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .eigensolver import EigenpairResult, minimize_alpha, poincare_constant
from .mesh import GridFunction, Weight, luxemburg_norm, modular_G, modular_sG
from .operator import FormContext, dirichlet_solve
from .optim import NonConvergence, SolverConfig


class ConfigurationError(ValueError):
    pass


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; results do not depend on the worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- Poincare -----------------------------------------------------------------

def random_grid_function(grid, rng: np.random.Generator) -> np.ndarray:
    """Random mixture of smooth modes and cell noise over several orders of magnitude."""
    x = (grid.nodes - grid.domain.a) / grid.domain.diam
    k = np.arange(1, 9)
    smooth = rng.normal(size=k.size) / k @ np.sin(np.pi * np.outer(k, x))
    noise = rng.normal(size=grid.N) * rng.uniform(0, 0.5)
    return 10.0 ** rng.uniform(-2, 2) * (smooth + noise * np.abs(smooth).max())


def cube_oscillation(u: np.ndarray, h: float, F, s: float, start: int, stop: int):
    """(lhs, pair modular) on cells start..stop-1: sum h G(|u - mean|) and the
    off-diagonal midpoint sum of h^2 G(|u_i - u_j| / r^s) / r."""
    v = u[start:stop]
    lhs = float(np.sum(F.G(np.abs(v - v.mean()))) * h)
    i, j = np.triu_indices(v.size, k=1)
    r = (j - i) * h
    pair = float(2 * np.sum(h * h * F.G(np.abs(v[i] - v[j]) / r ** s) / r))
    return lhs, pair


def verify_poincare(ctx: FormContext, trials: int, seed: int = 0) -> dict:
    if trials < 1:
        raise ValueError("verify_poincare: trials must be >= 1")
    F, s, grid = ctx.young, ctx.s, ctx.grid
    rng = np.random.default_rng(seed)
    d = grid.domain.diam
    K = poincare_constant(F, s) * d ** s
    out = {"C_p": poincare_constant(F, s), "d": d, "trials": trials,
           "modular_pass": 0, "norm_pass": 0, "cube_pass": 0,
           "modular_worst_margin": np.inf, "norm_worst_margin": np.inf,
           "cube_worst_margin": np.inf, "norm_ratios": [], "cube_ratio_sp_plus": [],
           "cube_constant": 1.0, "cube_exponent": "s p_minus"}
    for _ in range(trials):
        u = GridFunction(grid, random_grid_function(grid, rng))
        lhs = modular_G(u, F)
        rhs = modular_sG(GridFunction(grid, K * u.values), F, s)
        out["modular_pass"] += lhs <= rhs
        out["modular_worst_margin"] = min(out["modular_worst_margin"], (rhs - lhs) / rhs)
        nG = luxemburg_norm(u, "G", F)
        nS = luxemburg_norm(u, "sG", F, s=s)
        out["norm_pass"] += nG <= K * nS * (1 + 1e-9)
        out["norm_worst_margin"] = min(out["norm_worst_margin"], (K * nS - nG) / (K * nS))
        out["norm_ratios"].append(nG / (K * nS))
        # sub-interval of m cells with side eps = m h <= 1
        m_max = min(grid.N, int(np.floor(1.0 / grid.h + 1e-9)))
        m = int(rng.integers(2, m_max + 1))
        start = int(rng.integers(0, grid.N - m + 1))
        eps = m * grid.h
        c_lhs, pair = cube_oscillation(u.values, grid.h, F, s, start, start + m)
        c_rhs = eps ** (s * F.p_minus) * pair
        out["cube_pass"] += c_lhs <= c_rhs * (1 + 1e-12)
        out["cube_worst_margin"] = min(out["cube_worst_margin"], (c_rhs - c_lhs) / c_rhs)
        out["cube_ratio_sp_plus"].append(c_lhs / (eps ** (s * F.p_plus) * pair))
    out["norm_ratio_max"] = float(max(out["norm_ratios"]))
    out["cube_ratio_sp_plus_max"] = float(max(out["cube_ratio_sp_plus"]))
    out["all_pass"] = bool(out["modular_pass"] == out["norm_pass"] == out["cube_pass"] == trials)
    for k in ("modular_pass", "norm_pass", "cube_pass"):
        out[k] = int(out[k])
    for k in ("modular_worst_margin", "norm_worst_margin", "cube_worst_margin"):
        out[k] = float(out[k])
    return out


# -- maximum principles -------------------------------------------------------

def max_principle_suite(ctx: FormContext, cases: Sequence, config: Optional[SolverConfig] = None) -> dict:
    config = config or SolverConfig()
    rows = []
    for k, f in enumerate(cases):
        fv = np.asarray(f, dtype=float)
        if np.any(fv < 0):
            raise ValueError(f"max_principle_suite: case {k} has negative values")
        try:
            u = dirichlet_solve(ctx, fv, config).values
            converged = True
        except NonConvergence as e:
            u, converged = e.iterate.values, False
        weak = bool(u.min() >= -1e-8)
        strong = bool(np.all(u == 0)) if not np.any(fv) else bool(u.min() > 0)
        rows.append({"case": k, "min_u": float(u.min()), "max_u": float(u.max()),
                     "weak": weak, "strong": strong, "converged": converged})
    return {"cases": rows, "all_pass": bool(all(r["weak"] and r["strong"] and r["converged"] for r in rows))}


# -- weights ------------------------------------------------------------------

def weight_continuity(ctx: FormContext, mu: float, rho_sequence: Sequence[Weight],
                      rho_limit: Weight, config: Optional[SolverConfig] = None,
                      tol: float = 1e-3, workers: int = 1) -> dict:
    config = config or SolverConfig()
    solve = lambda w: minimize_alpha(ctx.with_weight(w), mu, config)
    results = parallel_map(solve, list(rho_sequence) + [rho_limit], workers)
    lim = results[-1]
    gaps = [abs(r.alpha - lim.alpha) for r in results[:-1]]
    tail = next((k for k in range(len(gaps)) if all(g <= tol for g in gaps[k:])), None)
    return {"mu": mu, "alpha_limit": lim.alpha, "alphas": [r.alpha for r in results[:-1]],
            "gaps": gaps, "tol": tol, "eventually_below_tol_from": tail,
            "decreasing": bool(all(b <= a for a, b in zip(gaps, gaps[1:]))),
            "converged": bool(all(r.converged for r in results))}


def weight_monotonicity(ctx: FormContext, mu: float, rho_a: Weight, rho_b: Weight,
                        config: Optional[SolverConfig] = None) -> dict:
    """rho_a <= rho_b pointwise should give alpha(rho_a) >= alpha(rho_b)."""
    if np.any(rho_a.values > rho_b.values):
        raise ValueError("weight_monotonicity: need rho_a <= rho_b")
    ra = minimize_alpha(ctx.with_weight(rho_a), mu, config)
    rb = minimize_alpha(ctx.with_weight(rho_b), mu, config)
    return {"alpha_a": ra.alpha, "alpha_b": rb.alpha, "holds": bool(ra.alpha >= rb.alpha * (1 - 1e-9))}


# -- homogenization -----------------------------------------------------------

@dataclass
class RateFit:
    epsilons: List[float]
    gaps: List[float]
    fitted_slope: float
    fitted_C: float
    alphas: List[float] = field(default_factory=list)
    alpha_bar: float = float("nan")
    lemma_ratios: List[float] = field(default_factory=list)
    rho_bar: float = float("nan")
    converged: bool = True

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("RateFit: epsilons must be strictly decreasing")
        if any(g < 0 for g in self.gaps):
            raise ValueError("RateFit: gaps must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def cell_mean(profile: Callable) -> float:
    return float(quad(lambda y: float(profile(np.array([y]))[0]), 0.0, 1.0, limit=200)[0])


def homogenization_sweep(ctx: FormContext, mu: float, rho_cell: Callable,
                         eps_list: Sequence[float], config: Optional[SolverConfig] = None,
                         workers: int = 1) -> RateFit:
    """alpha(rho(x/eps)) against alpha(mean rho) for shrinking eps, with a log-log fit."""
    config = config or SolverConfig()
    grid, F, s = ctx.grid, ctx.young, ctx.s
    eps = [float(e) for e in eps_list]
    if len(eps) < 2:
        raise ConfigurationError("need at least two values")
    for e in eps:
        m = e / grid.h
        if not e > 0 or abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
            raise ConfigurationError(f"eps = {e} is not a whole number of cells (h = {grid.h})")
    rho_bar = cell_mean(rho_cell)
    bar = minimize_alpha(ctx.with_weight(Weight.constant(grid, rho_bar)), mu, config)
    weights = [Weight.periodic(grid, rho_cell, e) for e in eps]
    results: List[EigenpairResult] = parallel_map(
        lambda w: minimize_alpha(ctx.with_weight(w), mu, config), weights, workers)
    gaps = [abs(r.alpha - bar.alpha) for r in results]
    rate = s * F.p_plus
    le, lg = np.log(eps), np.log(np.maximum(gaps, 1e-300))
    slope = float(np.polyfit(le, lg, 1)[0])
    C = max(g / (e ** rate * bar.alpha ** 2) for g, e in zip(gaps, eps))
    # mean-zero lemma on the computed minimisers
    ratios = []
    for w, e, r in zip(weights, eps, results):
        worst = 0.0
        for v in (r.u, bar.u):
            num = abs(np.sum((w.values - rho_bar) * F.G(np.abs(v.values))) * grid.h)
            worst = max(worst, num / (e ** rate * modular_sG(v, F, s)))
        ratios.append(float(worst))
    return RateFit(eps, gaps, slope, float(C), [r.alpha for r in results], bar.alpha,
                   ratios, rho_bar, bool(bar.converged and all(r.converged for r in results)))
