"""Preconditioned L-BFGS with Armijo backtracking, optionally on a manifold.

The preconditioner is the Hessian of the quadratic (p = 2) surrogate of the
energy, which makes the iteration count essentially independent of N.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class SolverConfig:
    tol: float = 1e-7             # Euler-Lagrange residual target
    dirichlet_rtol: float = 1e-8  # gradient norm target relative to ||f h||
    max_iter: int = 3000
    restarts: int = 3
    seed: int = 0
    memory: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    precondition: bool = True

    def __post_init__(self):
        if not self.tol > 0 or not self.dirichlet_rtol > 0:
            raise ValueError("solver: tolerances must be positive")
        if self.max_iter < 1 or self.restarts < 1 or self.memory < 1:
            raise ValueError("solver: max_iter, restarts and memory must be >= 1")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 0.5:
            raise ValueError("solver: need 0 < backtrack < 1 and 0 < armijo < 0.5")

    def to_dict(self) -> dict:
        return asdict(self)


class NonConvergence(RuntimeError):
    def __init__(self, message, iterate=None, grad_norm=None):
        super().__init__(message)
        self.iterate = iterate
        self.grad_norm = grad_norm


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    stat: float
    iterations: int
    converged: bool


def lbfgs(x0: np.ndarray,
          objective: Callable[[np.ndarray], tuple],
          precond: Callable[[np.ndarray], np.ndarray],
          config: SolverConfig,
          tol: float,
          retract: Optional[Callable[[np.ndarray], np.ndarray]] = None,
          project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> OptResult:
    """Minimise ``objective`` (returning value, gradient, stopping statistic).

    Stops once the statistic is <= tol.  ``retract`` maps trial points back to
    the constraint manifold; ``project`` restricts directions to a subspace.
    """
    retract = retract or (lambda x: x)
    project = project or (lambda v: v)
    x = retract(np.array(x0, dtype=float))
    f, g, stat = objective(x)
    S, Y = [], []
    gamma = None
    it = 0
    for it in range(config.max_iter):
        if stat <= tol:
            return OptResult(x, f, g, stat, it, True)
        if gamma is None:
            gamma = _probe_scale(x, g, objective, precond, retract, project)
        d = -project(_two_loop(g, S, Y, precond, gamma))
        gd = float(g @ d)
        if not gd < 0:
            S.clear(), Y.clear()
            d = -project(gamma * precond(g))
            gd = float(g @ d)
            if not gd < 0:
                break
        t = 1.0
        noise = 1e-13 * abs(f) + 1e-300
        accepted = False
        for _ in range(config.max_backtracks):
            xn = retract(x + t * d)
            fn, gn, statn = objective(xn)
            if np.isfinite(fn) and fn <= f + config.armijo * t * gd + noise:
                accepted = True
                break
            t *= config.backtrack
        if not accepted:
            if S:
                S.clear(), Y.clear()
                gamma = None
                continue
            break
        s_vec, y_vec = xn - x, gn - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            S.append(s_vec), Y.append(y_vec)
            if len(S) > config.memory:
                S.pop(0), Y.pop(0)
            gamma = sy / float(y_vec @ precond(y_vec))
        x, f, g, stat = xn, fn, gn, statn
    else:
        it = config.max_iter
    return OptResult(x, f, g, stat, it, stat <= tol)


def _two_loop(g, S, Y, precond, gamma):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((a, rho))
        q -= a * y
    r = gamma * precond(q)
    for (s, y), (a, rho) in zip(zip(S, Y), reversed(alphas)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return r


def _probe_scale(x, g, objective, precond, retract, project):
    """Scale of the preconditioner from one secant pair along -P^{-1} g."""
    d = -project(precond(g))
    nd = np.linalg.norm(d)
    if nd == 0:
        return 1.0
    eps = 1e-4 * max(np.linalg.norm(x), 1e-300) / nd
    xp = retract(x + eps * d)
    _, gp, _ = objective(xp)
    s, y = xp - x, gp - g
    sy = float(s @ y)
    yPy = float(y @ precond(y))
    if sy > 0 and yPy > 0:
        return sy / yPy
    return 1.0
