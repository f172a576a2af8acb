"""Uniform 1-D grids, zero-extended grid functions, weights and modulars.

Functions are piecewise constant on N cells of Omega = (a, b) and vanish
outside Omega.  The nonlocal modular

    Phi_{s,G}(u) = int int G(|u(x) - u(y)| / |x - y|^s) dx dy / |x - y|

is split into three pieces:

* far cell pairs (|i - j| >= 2): midpoint rule in both variables;
* the near-diagonal band |x - y| < 3h/2: u is treated as linear with the
  neighbour slope m, and int_0^l G(m r^(1-s)) dr / r = H(m l^(1-s)) / (1-s)
  is taken exactly through the radial primitive H;
* the exterior tail: int_d^inf G(|u_i| r^-s) dr / r = H(|u_i| d^-s) / s for
  each side of every cell.

Every piece is a sum of terms c * Psi(k * |difference|) with Psi in {G, H},
so the gradient of the discrete modular is exact term by term.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .young import YoungFunction


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise MeshError(f"domain: need a < b, got ({self.a}, {self.b})")

    @property
    def diam(self) -> float:
        return self.b - self.a

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True)
class Grid:
    domain: Domain
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise MeshError(f"grid: N must be an integer >= 4, got {self.N}")

    @classmethod
    def uniform(cls, a: float, b: float, N: int) -> "Grid":
        return cls(Domain(float(a), float(b)), int(N))

    @property
    def h(self) -> float:
        return self.domain.diam / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.domain.a + (np.arange(self.N) + 0.5) * self.h

    def subgrid(self, start: int, stop: int) -> "Grid":
        """Grid made of cells start..stop-1 of this one (same h)."""
        if not 0 <= start < stop <= self.N:
            raise MeshError(f"subgrid: invalid cell range [{start}, {stop})")
        a = self.domain.a
        return Grid(Domain(a + start * self.h, a + stop * self.h), stop - start)


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise MeshError(f"grid function: expected {self.grid.N} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise MeshError("grid function: values must be finite")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @classmethod
    def from_callable(cls, grid: Grid, f) -> "GridFunction":
        return cls(grid, f(grid.nodes))

    def reflect(self) -> "GridFunction":
        """Mirror image about the domain midpoint."""
        return GridFunction(self.grid, self.values[::-1].copy())

    def to_json(self) -> dict:
        d = self.grid.domain
        return {"domain": [d.a, d.b], "N": self.grid.N, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GridFunction":
        a, b = obj["domain"]
        return cls(Grid.uniform(a, b, obj["N"]), obj["values"])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for x, v in zip(self.grid.nodes, self.values):
                w.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        rows = list(csv.DictReader(Path(path).open()))
        x = np.array([float(r["x"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        if x.size < 4:
            raise MeshError("grid function csv: need at least 4 rows")
        h = (x[-1] - x[0]) / (x.size - 1)
        return cls(Grid.uniform(x[0] - h / 2, x[-1] + h / 2, x.size), v)


@dataclass
class Weight:
    """Strictly positive bounded weight rho with recorded bounds rho_- and rho_+."""

    grid: Grid
    values: np.ndarray
    rho_minus: float
    rho_plus: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise MeshError(f"weight: expected {self.grid.N} values, got shape {self.values.shape}")
        if not self.rho_minus > 0:
            raise MeshError(f"weight: rho_minus must be positive, got {self.rho_minus}")
        if np.any(self.values < self.rho_minus) or np.any(self.values > self.rho_plus):
            raise MeshError(f"weight: values leave [{self.rho_minus}, {self.rho_plus}]")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @classmethod
    def from_values(cls, grid: Grid, values) -> "Weight":
        values = np.asarray(values, dtype=float)
        return cls(grid, values, float(values.min()), float(values.max()))

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0) -> "Weight":
        return cls(grid, np.full(grid.N, float(c)), float(c), float(c))

    @classmethod
    def periodic(cls, grid: Grid, profile, eps: float) -> "Weight":
        """rho_eps(x) = profile(x / eps) sampled at the cell midpoints."""
        return cls.from_values(grid, profile(grid.nodes / eps))

    def scaled(self, c: float) -> "Weight":
        return Weight(self.grid, c * self.values, c * self.rho_minus, c * self.rho_plus)


# -- quadrature stencil -------------------------------------------------------

@dataclass(frozen=True)
class Stencil:
    """Index and coefficient arrays for the three pieces of the discrete modular."""

    I: np.ndarray        # far pairs, i < j, j - i >= 2
    J: np.ndarray
    far_scale: np.ndarray  # 1 / r^s
    far_coef: np.ndarray   # 2 h^2 / r (both orderings)
    band_scale: float      # difference -> H argument
    band_coef: float
    ext_idx: np.ndarray    # exterior tails and the outward half-cell bands
    ext_scale: np.ndarray
    ext_coef: np.ndarray


@lru_cache(maxsize=64)
def _stencil(a: float, b: float, N: int, s: float) -> Stencil:
    grid = Grid.uniform(a, b, N)
    h = grid.h
    I, J = np.triu_indices(N, k=2)
    r = (J - I) * h
    x = grid.nodes
    idx = np.arange(N)
    left, right = x - a, b - x
    # near-diagonal band reaches 3h/2; the outward half of each boundary cell
    # uses slope |u| / (h/2) over length h/2
    ext_idx = np.concatenate([idx, idx, [0, N - 1]])
    ext_scale = np.concatenate([left ** -s, right ** -s, [(h / 2) ** -s] * 2])
    ext_coef = np.concatenate([np.full(2 * N, 2 * h / s), [h / (1 - s)] * 2])
    for arr in (I, J, ext_idx):
        arr.setflags(write=False)
    return Stencil(I=I, J=J, far_scale=r ** -s, far_coef=2 * h * h / r,
                   band_scale=(1.5 * h) ** (1 - s) / h, band_coef=2 * h / (1 - s),
                   ext_idx=ext_idx, ext_scale=ext_scale, ext_coef=ext_coef)


def stencil(grid: Grid, s: float) -> Stencil:
    if not 0 < s < 1:
        raise MeshError(f"fractional order s must lie in (0, 1), got {s}")
    d = grid.domain
    return _stencil(d.a, d.b, grid.N, float(s))


def _G_over_t(F: YoungFunction, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0, F.G(t) / t, 0.0)


def modular_sG_and_grad(u, F: YoungFunction, grid: Grid, s: float, want_grad: bool = True):
    u = np.asarray(u, dtype=float)
    st = stencil(grid, s)
    du_far = u[st.I] - u[st.J]
    t_far = np.abs(du_far) * st.far_scale
    du_adj = u[:-1] - u[1:]
    t_adj = np.abs(du_adj) * st.band_scale
    u_ext = u[st.ext_idx]
    t_ext = np.abs(u_ext) * st.ext_scale
    value = (np.sum(st.far_coef * F.G(t_far))
             + st.band_coef * np.sum(F.H(t_adj))
             + np.sum(st.ext_coef * F.H(t_ext)))
    if not want_grad:
        return float(value), None
    n = grid.N
    c_far = st.far_coef * F.g(t_far) * st.far_scale * np.sign(du_far)
    c_adj = st.band_coef * _G_over_t(F, t_adj) * st.band_scale * np.sign(du_adj)
    c_ext = st.ext_coef * _G_over_t(F, t_ext) * st.ext_scale * np.sign(u_ext)
    grad = (np.bincount(st.I, c_far, n) - np.bincount(st.J, c_far, n)
            + np.bincount(st.ext_idx, c_ext, n))
    grad[:-1] += c_adj
    grad[1:] -= c_adj
    return float(value), grad


# -- public operations --------------------------------------------------------

def holder_quotient(u: GridFunction, i: int, j: int, s: float) -> float:
    """(u_i - u_j) / |x_i - x_j|^s."""
    if i == j:
        raise MeshError("holder_quotient: undefined on the diagonal i == j")
    if not 0 < s < 1:
        raise MeshError(f"fractional order s must lie in (0, 1), got {s}")
    v = np.asarray(u)
    x = u.grid.nodes
    return float((v[i] - v[j]) / abs(x[i] - x[j]) ** s)


def modular_G(u: GridFunction, F: YoungFunction, rho: Optional[Weight] = None) -> float:
    """Midpoint rule for int_Omega rho G(|u|) dx."""
    v = np.abs(np.asarray(u, dtype=float))
    w = 1.0 if rho is None else np.asarray(rho)
    return float(np.sum(F.G(v) * w) * u.grid.h)


def modular_sG(u: GridFunction, F: YoungFunction, s: float) -> float:
    return modular_sG_and_grad(u, F, u.grid, s, want_grad=False)[0]


def luxemburg_norm(u: GridFunction, modular: str, F: YoungFunction,
                   s: Optional[float] = None, rho: Optional[Weight] = None,
                   tol: float = 1e-10) -> float:
    """inf{lam > 0 : Phi(u / lam) <= 1} for Phi = Phi_G ("G") or Phi_{s,G} ("sG")."""
    if modular == "G":
        phi = lambda v: modular_G(v, F, rho)
    elif modular == "sG":
        if s is None:
            raise MeshError("luxemburg_norm: modular 'sG' needs s")
        phi = lambda v: modular_sG(v, F, s)
    else:
        raise MeshError(f"luxemburg_norm: modular must be 'G' or 'sG', got {modular!r}")
    vals = np.asarray(u, dtype=float)
    if not np.any(vals):
        return 0.0
    scaled = lambda lam: phi(GridFunction(u.grid, vals / lam)) - 1.0
    p0 = phi(u)
    # (G1): Phi(u / lam) = 1 has its root between p0^(1/p+) and p0^(1/p-)
    roots = p0 ** (1 / F.p_minus), p0 ** (1 / F.p_plus)
    lo, hi = 0.5 * min(roots), 2.0 * max(roots)
    while scaled(lo) < 0:
        lo /= 2
    while scaled(hi) > 0:
        hi *= 2
    f = lambda ll: scaled(float(np.exp(ll)))
    ll = brentq(f, np.log(lo), np.log(hi), xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=300)
    return float(np.exp(ll))


