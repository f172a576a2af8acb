"""Command-line entry point: ``orlicz-frac <subcommand> --config run.json --out DIR``.

CSV columns per subcommand:
  check-young   property, passed, worst
  solve         x, u
  sweep-mu      mu, alpha, lambda, residual, iterations, converged
  sweep-s       s, alpha, scaled_alpha, lambda, residual, converged
  dirichlet     x, f, u
  nodal         domain, start, stop, measure, lambda_sub, margin, inequality_holds, measure_bound, measure_bound_holds
  homogenize    eps, alpha, gap, lemma_ratio
  weight-limit  width, alpha, gap
  gamma-limit   s, alpha, scaled_alpha, gap, rel_gap, converged

Exit status: 0 success, 1 configuration error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import platform
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional, Tuple

import numpy as np

from . import __version__
from .eigensolver import (alpha_lower_bound, gamma_sweep, minimize_alpha, nodal_check,
                          odd_minimizer, sweep_mu)
from .experiments import ConfigurationError, homogenization_sweep, weight_continuity
from .mesh import Grid, MeshError, Weight
from .operator import FormContext, dirichlet_solve
from .optim import NonConvergence, SolverConfig
from .young import YoungError, check_h_monotone, from_spec, verify_properties

SUBCOMMANDS = ("check-young", "solve", "sweep-mu", "sweep-s", "dirichlet", "nodal",
               "homogenize", "weight-limit", "gamma-limit")

COLUMNS = {
    "check-young": ["property", "passed", "worst"],
    "solve": ["x", "u"],
    "sweep-mu": ["mu", "alpha", "lambda", "residual", "iterations", "converged"],
    "sweep-s": ["s", "alpha", "scaled_alpha", "lambda", "residual", "converged"],
    "dirichlet": ["x", "f", "u"],
    "nodal": ["domain", "start", "stop", "measure", "lambda_sub", "margin",
              "inequality_holds", "measure_bound", "measure_bound_holds"],
    "homogenize": ["eps", "alpha", "gap", "lemma_ratio"],
    "weight-limit": ["width", "alpha", "gap"],
    "gamma-limit": ["s", "alpha", "scaled_alpha", "gap", "rel_gap", "converged"],
}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"field '{field}': {message}")
        self.field = field


# -- config parsing -----------------------------------------------------------

def _get(cfg: dict, key: str, kind: Callable, default: Any = ..., check=None, why: str = ""):
    if key not in cfg:
        if default is ...:
            raise ConfigError(key, "missing")
        return default
    try:
        val = kind(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {cfg[key]!r}") from None
    if check is not None and not check(val):
        raise ConfigError(key, why or f"invalid value {cfg[key]!r}")
    return val


def _floats(v) -> List[float]:
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError
    return [float(x) for x in v]


def _int(v) -> int:
    if isinstance(v, bool) or float(v) != int(v):
        raise ValueError
    return int(v)


def _young(cfg: dict):
    if "young" not in cfg:
        raise ConfigError("young", "missing")
    try:
        return from_spec(cfg["young"])
    except (YoungError, KeyError, TypeError) as e:
        raise ConfigError("young", str(e)) from None


def _grid(cfg: dict) -> Grid:
    dom = _get(cfg, "domain", _floats, [-1.0, 1.0],
               lambda d: len(d) == 2 and d[0] < d[1], "need [a, b] with a < b")
    N = _get(cfg, "N", _int, check=lambda n: n >= 4, why="must be an integer >= 4")
    return Grid.uniform(dom[0], dom[1], N)


def _s(cfg: dict) -> float:
    return _get(cfg, "s", float, check=lambda s: 0 < s < 1, why="must lie in (0, 1)")


def _solver(cfg: dict) -> SolverConfig:
    sc = cfg.get("solver", {})
    if not isinstance(sc, dict):
        raise ConfigError("solver", "must be an object")
    fields = SolverConfig().to_dict()
    unknown = set(sc) - set(fields)
    if unknown:
        raise ConfigError(f"solver.{sorted(unknown)[0]}", "unknown option")
    kw = dict(sc)
    if "seed" in cfg:
        kw.setdefault("seed", _get(cfg, "seed", _int))
    try:
        return SolverConfig(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError("solver", str(e)) from None


def _profile(spec: dict, field: str) -> Callable:
    if not isinstance(spec, dict):
        raise ConfigError(field, "must be an object")
    kind = spec.get("profile", "sin")
    mean = _get(spec, "mean", float, 1.0)
    amp = _get(spec, "amplitude", float, 0.5)
    if not abs(amp) < mean:
        raise ConfigError(f"{field}.amplitude", "|amplitude| must be below mean (weight must stay positive)")
    if kind == "sin":
        return lambda y: mean + amp * np.sin(2 * np.pi * y)
    if kind == "cos":
        return lambda y: mean + amp * np.cos(2 * np.pi * y)
    raise ConfigError(f"{field}.profile", f"unknown profile {kind!r}; expected 'sin' or 'cos'")


def _weight(cfg: dict, grid: Grid) -> Optional[Weight]:
    spec = cfg.get("weight")
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError("weight", "must be an object")
    kind = spec.get("type", "constant")
    if kind == "constant":
        return Weight.constant(grid, _get(spec, "value", float, 1.0, lambda v: v > 0, "must be positive"))
    if kind == "periodic":
        eps = _get(spec, "eps", float, check=lambda e: e > 0, why="must be positive")
        return Weight.periodic(grid, _profile(spec, "weight"), eps)
    raise ConfigError("weight.type", f"unknown weight type {kind!r}")


def _rhs(cfg: dict, grid: Grid) -> np.ndarray:
    spec = cfg.get("rhs")
    if spec is None:
        raise ConfigError("rhs", "missing")
    if isinstance(spec, list):
        vals = np.asarray(spec, dtype=float)
        if vals.shape != (grid.N,):
            raise ConfigError("rhs", f"expected {grid.N} values, got {vals.size}")
        return vals
    kind = spec.get("type", "constant")
    value = _get(spec, "value", float, 1.0)
    if kind == "constant":
        return np.full(grid.N, value)
    if kind == "spike":
        cell = _get(spec, "cell", _int, grid.N // 2, lambda c: 0 <= c < grid.N, f"must lie in [0, {grid.N})")
        f = np.zeros(grid.N)
        f[cell] = value
        return f
    raise ConfigError("rhs.type", f"unknown rhs type {kind!r}")


# -- subcommands --------------------------------------------------------------

Rows = List[List[Any]]


def _pair_summary(ctx: FormContext, r) -> dict:
    F = ctx.young
    return {**r.to_dict(with_u=False),
            "constraint_error": abs(float(np.sum(F.G(np.abs(r.u.values)) * ctx.rho) * ctx.grid.h) - r.mu) / r.mu,
            "alpha_lower_bound": alpha_lower_bound(F, ctx.s, ctx.grid.domain.diam),
            "comparability": bool(F.p_minus / F.p_plus * r.alpha <= r.lam * (1 + 1e-9)
                                  and r.lam <= F.p_plus / F.p_minus * r.alpha * (1 + 1e-9))}


def cmd_check_young(cfg, workers) -> Tuple[dict, Rows, bool]:
    F = _young(cfg)
    rep = verify_properties(F, seed=_get(cfg, "seed", _int, 0))
    d = rep.to_dict()
    cs = cfg.get("h_monotone_c", [0.5, 1.0, 2.0])
    d["h_monotone"] = {repr(float(c)): check_h_monotone(F, float(c)) for c in cs}
    names = {"cond_L": "L", "cond_L_prime": "L_prime", "G1": "G1", "G2": "G2",
             "young_inequality": "young", "lipschitz": "lipschitz", "duality": "duality"}
    rows = [[k, d[k], d["violations"].get(v, "")] for k, v in names.items() if d[k] is not None]
    rows += [[f"h_monotone[{c}]", ok, ""] for c, ok in d["h_monotone"].items()]
    return d, rows, True  # property failures are data, not solver failures


def cmd_solve(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid, _weight(cfg, grid))
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    r = minimize_alpha(ctx, mu, _solver(cfg))
    out = _pair_summary(ctx, r)
    out["u"] = r.u.values.tolist()
    rows = [[x, v] for x, v in zip(grid.nodes, r.u.values)]
    return out, rows, r.converged


def cmd_sweep_mu(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid, _weight(cfg, grid))
    mus = _get(cfg, "mu_list", _floats, check=lambda m: all(v > 0 for v in m), why="must be positive")
    res = sweep_mu(ctx, mus, _solver(cfg))
    rows = [[mu, r.alpha, r.lam, r.residual, r.iterations, r.converged] for mu, r in res.points]
    return res.to_dict(), rows, res.converged


def cmd_sweep_s(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    s_list = _get(cfg, "s_list", _floats, check=lambda v: all(0 < s < 1 for s in v), why="values must lie in (0, 1)")
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    config = _solver(cfg)
    weight = _weight(cfg, grid)
    pts, rows = [], []
    for s in s_list:
        r = minimize_alpha(FormContext(F, s, grid, weight), mu, config)
        pts.append({"s": s, **r.to_dict(with_u=False), "scaled_alpha": (1 - s) * r.alpha})
        rows.append([s, r.alpha, (1 - s) * r.alpha, r.lam, r.residual, r.converged])
    return {"points": pts}, rows, all(p["converged"] for p in pts)


def cmd_dirichlet(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid, _weight(cfg, grid))
    f = _rhs(cfg, grid)
    try:
        u, ok = dirichlet_solve(ctx, f, _solver(cfg)).values, True
    except NonConvergence as e:
        u, ok = e.iterate.values, False
    out = {"u": u.tolist(), "min_u": float(u.min()), "max_u": float(u.max()), "converged": ok}
    if np.all(f >= 0):
        out["weak_max_principle"] = bool(u.min() >= -1e-8)
        out["strong_max_principle"] = bool(u.min() > 0) if np.any(f) else bool(np.all(u == 0))
    rows = [[x, fi, ui] for x, fi, ui in zip(grid.nodes, f, u)]
    return out, rows, ok


def cmd_nodal(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid, _weight(cfg, grid))
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    config = _solver(cfg)
    pair = odd_minimizer(ctx, mu, config)
    rep = nodal_check(ctx, pair, config)
    rep["pair"] = pair.to_dict(with_u=False)
    rows = [[name, *d["cells"], d["measure"], d["lambda_sub"], d["margin"], d["inequality_holds"],
             d["measure_bound"], d["measure_bound_holds"]] for name, d in rep["domains"].items()]
    ok = pair.converged and all(d["converged"] for d in rep["domains"].values())
    return rep, rows, ok


def cmd_homogenize(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid)
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    spec = cfg.get("weight", {})
    profile = _profile(spec, "weight")
    eps = _get(spec, "eps_list", _floats, check=lambda e: all(a > b for a, b in zip(e, e[1:])),
               why="must be strictly decreasing") if isinstance(spec, dict) and "eps_list" in spec else None
    if eps is None:
        raise ConfigError("weight.eps_list", "missing")
    try:
        fit = homogenization_sweep(ctx, mu, profile, eps, _solver(cfg), workers)
    except ConfigurationError as e:
        raise ConfigError("weight.eps_list", str(e)) from None
    rows = [[e, a, g, q] for e, a, g, q in zip(fit.epsilons, fit.alphas, fit.gaps, fit.lemma_ratios)]
    out = fit.to_dict()
    out["rate"] = ctx.s * F.p_plus
    return out, rows, fit.converged


def cmd_weight_limit(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    ctx = FormContext(F, _s(cfg), grid)
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    spec = cfg.get("weight_sequence")
    if not isinstance(spec, dict):
        raise ConfigError("weight_sequence", "missing")
    low = _get(spec, "low", float, 1.0, lambda v: v > 0, "must be positive")
    high = _get(spec, "high", float, 1.5, lambda v: v > 0, "must be positive")
    widths = _get(spec, "widths", _floats, check=lambda w: all(v > 0 for v in w), why="must be positive")
    x = grid.nodes - grid.domain.center
    step = lambda w: low + (high - low) * 0.5 * (1 + np.tanh(x / w))
    seq = [Weight.from_values(grid, step(w)) for w in widths]
    limit = Weight.from_values(grid, np.where(x > 0, high, np.where(x < 0, low, 0.5 * (low + high))))
    rep = weight_continuity(ctx, mu, seq, limit, _solver(cfg),
                            tol=_get(spec, "tol", float, 1e-3), workers=workers)
    rep["widths"] = widths
    rows = [[w, a, g] for w, a, g in zip(widths, rep["alphas"], rep["gaps"])]
    return rep, rows, rep["converged"]


def cmd_gamma_limit(cfg, workers):
    F, grid = _young(cfg), _grid(cfg)
    s_list = _get(cfg, "s_list", _floats, check=lambda v: all(0 < s < 1 for s in v)
                  and all(a < b for a, b in zip(v, v[1:])), why="must be increasing inside (0, 1)")
    mu = _get(cfg, "mu", float, 1.0, lambda m: m > 0, "must be positive")
    rep = gamma_sweep(F, mu, s_list, grid, _solver(cfg))
    rows = [[p["s"], p["alpha"], p["scaled_alpha"], p["gap"], p["rel_gap"], p["converged"]] for p in rep["points"]]
    return rep, rows, rep["converged"]


COMMANDS = {"check-young": cmd_check_young, "solve": cmd_solve, "sweep-mu": cmd_sweep_mu,
            "sweep-s": cmd_sweep_s, "dirichlet": cmd_dirichlet, "nodal": cmd_nodal,
            "homogenize": cmd_homogenize, "weight-limit": cmd_weight_limit,
            "gamma-limit": cmd_gamma_limit}


# -- output -------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(out_dir: Path, sub: str, cfg: dict, result: dict, rows: Rows, threads: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {"subcommand": sub, "config": cfg, "result": result}
    (out_dir / "result.json").write_text(
        json.dumps(_clean(record), sort_keys=True, indent=2, allow_nan=False) + "\n")
    meta = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "threads": threads}
    (out_dir / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    with open(out_dir / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS[sub])
        for row in rows:
            w.writerow([_cell(v) for v in row])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orlicz-frac", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--quiet", action="store_true", help="no summary on stdout")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap for sweeps (fallback: ORLICZ_FRAC_THREADS, else 1)")
    return p


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("ORLICZ_FRAC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("ORLICZ_FRAC_THREADS", f"not an integer: {env!r}") from None
    return 1


def run(sub: str, config_path: str, out: str = "out", quiet: bool = False,
        threads: Optional[int] = None) -> int:
    try:
        if sub not in COMMANDS:
            raise ConfigError("subcommand", f"unknown {sub!r}")
        try:
            cfg = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", f"cannot read {config_path}: {e}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config", "top level must be an object")
        workers = _threads(threads)
        result, rows, ok = COMMANDS[sub](cfg, workers)
        resolved = {"solver": _solver(cfg).to_dict(), "young": _young(cfg).to_spec()}
    except ConfigError as e:
        print(f"orlicz-frac: config error: {e}", file=sys.stderr)
        return 1
    except (YoungError, MeshError, ConfigurationError) as e:
        print(f"orlicz-frac: config error: {e}", file=sys.stderr)
        return 1
    write_outputs(Path(out), sub, {**cfg, "resolved": resolved}, result, rows, workers)
    if not quiet:
        print(f"{sub}: wrote {Path(out) / 'result.json'} ({'ok' if ok else 'solver did not converge'})")
    return 0 if ok else 2


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.quiet, args.threads)
