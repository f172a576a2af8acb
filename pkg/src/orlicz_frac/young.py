"""Young functions: construction, combination, duality and the s -> 1 limit.

A Young function is stored through its density ``g``.  ``G`` is the primitive
of ``g`` and ``H(t) = int_0^t G(r)/r dr`` is the radial primitive used by the
exterior tail and near-diagonal band of the nonlocal modular.  Families with
known primitives carry closed forms; everything else falls back to panel
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import hyp2f1, spence
from scipy.integrate import quad

from . import _quad

Array = np.ndarray
FAMILIES = ("power", "power-log", "spliced-power")
MODES = ("sum", "product", "composition")


class YoungError(ValueError):
    """Invalid Young function parameters."""


def _arr(t) -> Array:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class YoungFunction:
    family: str
    params: tuple
    p_minus: float
    p_plus: float
    _g: Callable[[Array], Array] = field(repr=False)
    _G: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    _H: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    _gprime: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    _ginv: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    components: tuple = ()

    def g(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._g(t)
        return np.where(t > 0, out, 0.0)

    def G(self, t):
        t = _arr(t)
        if self._G is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = self._G(t)
            return np.where(t > 0, out, 0.0)
        p_mid = 0.5 * (self.p_minus + self.p_plus)
        body = t * _quad.unit_integral(self.g, t)
        tail = _quad.DELTA * t * self.g(_quad.DELTA * t) / p_mid
        return body + tail

    def H(self, t):
        """Radial primitive ``int_0^t G(r) dr / r``; its derivative is G(t)/t."""
        t = _arr(t)
        if self._H is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = self._H(t)
            return np.where(t > 0, out, 0.0)
        return t * _quad.unit_integral(self.g, t, _quad.LOG_WEIGHTS)

    @property
    def has_gprime(self) -> bool:
        return self._gprime is not None

    def gprime(self, t):
        if self._gprime is None:
            raise YoungError(f"{self.family}: no derivative of g available")
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._gprime(t)

    def growth_ratio(self, t):
        """t g(t) / G(t), the quantity bounded by condition (L)."""
        t = _arr(t)
        return t * self.g(t) / self.G(t)

    def to_spec(self) -> dict:
        if self.family == "limit":
            return {"limit": self.components[0].to_spec()}
        if self.components:
            spec = {"combine": self.family, "args": [c.to_spec() for c in self.components]}
            if self.family == "sum":
                spec["coeffs"] = list(self.params)
            return spec
        return {"family": self.family, "params": list(self.params)}


# -- families ---------------------------------------------------------------

def _power(p: float) -> YoungFunction:
    if not p > 1:
        raise YoungError(f"power: exponent p must be > 1, got {p}")
    return YoungFunction(
        "power", (p,), p, p,
        _g=lambda t: t ** (p - 1),
        _G=lambda t: t ** p / p,
        _H=lambda t: t ** p / p ** 2,
        _gprime=lambda t: (p - 1) * t ** (p - 2),
        _ginv=lambda y: y ** (1.0 / (p - 1)),
    )


def _series(x, start: int, denom) -> Array:
    out = np.zeros_like(x)
    xm = x ** start
    for m in range(start, 40):
        out += (-1) ** (m - 1) * xm / denom(m)
        xm = xm * x
    return out


def _power_log(a: float, b: float, c: float) -> YoungFunction:
    if not (a > 0 and c > 0):
        raise YoungError(f"power-log: a and c must be positive, got a={a}, c={c}")
    if not b >= 1:
        raise YoungError(f"power-log: b must be >= 1 so that g(t) > 0 for t > 0, got b={b}")
    logb = math.log(b)
    k = b * b / (c * c)

    def g(t):
        return t ** a * np.log(b + c * t)

    def gprime(t):
        return a * t ** (a - 1) * np.log(b + c * t) + c * t ** a / (b + c * t)

    if a == 1:
        # x = ct/b; the series branches avoid cancellation for small x.
        def G(t):
            x = c * t / b
            lg = np.log1p(x)
            closed = x * x * lg / 2 - x * x / 4 + (x - lg) / 2
            small = _series(np.minimum(x, 0.1), 3, lambda m: m * (m - 2))
            return t * t * logb / 2 + k * np.where(x < 0.1, small, closed)

        def H(t):
            x = c * t / b
            lg = np.log1p(x)
            closed = (x * x * lg / 2 - x * x / 4 + (x - lg) / 2) / 2 - x * x / 8 + x / 2 + spence(1 + x) / 2
            small = _series(np.minimum(x, 0.1), 3, lambda m: m * m * (m - 2))
            return t * t * logb / 4 + k * np.where(x < 0.1, small, closed)
    else:
        H = None

        def G(t):
            return t ** (1 + a) / (1 + a) ** 2 * (
                hyp2f1(1 + a, 1, 2 + a, -c * t / b) + (1 + a) * np.log(b + c * t) - 1)

    return YoungFunction("power-log", (a, b, c), 1 + a, 2 + a,
                         _g=g, _G=G, _H=H, _gprime=gprime)


def _spliced(a1: float, a2: float, s: float, c1: float = 1.0) -> YoungFunction:
    if not (a1 > 0 and a2 > 0):
        raise YoungError(f"spliced-power: exponents a1, a2 must be positive, got {a1}, {a2}")
    if not s > 0:
        raise YoungError(f"spliced-power: splice point s must be positive, got {s}")
    if not c1 > 0:
        raise YoungError(f"spliced-power: coefficient c1 must be positive, got {c1}")
    # C^1 matching at t = s
    c2 = c1 * a1 * s ** (a1 - a2) / a2
    d = c1 * s ** a1 - c2 * s ** a2
    gs = c1 * s ** a1
    Gs = c1 * s ** (a1 + 1) / (a1 + 1)
    Hs = Gs / (a1 + 1)
    k0 = Gs - c2 * s ** (a2 + 1) / (a2 + 1) - d * s

    def g(t):
        return np.where(t <= s, c1 * t ** a1, c2 * t ** a2 + d)

    def G(t):
        return np.where(t <= s, c1 * t ** (a1 + 1) / (a1 + 1),
                        Gs + c2 * (t ** (a2 + 1) - s ** (a2 + 1)) / (a2 + 1) + d * (t - s))

    def H(t):
        return np.where(t <= s, c1 * t ** (a1 + 1) / (a1 + 1) ** 2,
                        Hs + k0 * np.log(t / s) + c2 * (t ** (a2 + 1) - s ** (a2 + 1)) / (a2 + 1) ** 2
                        + d * (t - s))

    def gprime(t):
        return np.where(t < s, c1 * a1 * t ** (a1 - 1), c2 * a2 * t ** (a2 - 1))

    def ginv(y):
        return np.where(y <= gs, (y / c1) ** (1 / a1), (np.maximum(y - d, 0) / c2) ** (1 / a2))

    return YoungFunction("spliced-power", (a1, a2, s, c1),
                         1 + min(a1, a2), 1 + max(a1, a2),
                         _g=g, _G=G, _H=H, _gprime=gprime, _ginv=ginv)


def make_family(tag: str, params: Sequence[float]) -> YoungFunction:
    """Build a named family.

    ``power``: [p]; ``power-log``: [a, b, c] with g(t) = t^a log(b + ct);
    ``spliced-power``: [a1, a2, s] or [a1, a2, s, c1], g = c1 t^a1 below the
    splice point s and c2 t^a2 + d above it, with c2, d fixed by C^1 matching.
    """
    params = [float(v) for v in params]
    expected = {"power": (1,), "power-log": (3,), "spliced-power": (3, 4)}
    if tag not in expected:
        raise YoungError(f"unknown family {tag!r}; expected one of {FAMILIES}")
    if len(params) not in expected[tag]:
        raise YoungError(f"{tag}: expected {' or '.join(map(str, expected[tag]))} parameters, got {len(params)}")
    if tag == "power":
        return _power(*params)
    if tag == "power-log":
        return _power_log(*params)
    return _spliced(*params)


def combine(mode: str, f1: YoungFunction, f2: YoungFunction,
            coeffs: Sequence[float] = (1.0, 1.0)) -> YoungFunction:
    """Sum (a1 g1 + a2 g2), product (g1 g2) or composition (g1 o g2) of densities."""
    if mode == "sum":
        a1, a2 = (float(c) for c in coeffs)
        if a1 < 0 or a2 < 0:
            raise YoungError(f"sum: coefficients must be nonnegative, got {a1}, {a2}")
        if a1 == 0 and a2 == 0:
            raise YoungError("sum: coefficients must not both be zero")
        active = [f for f, a in ((f1, a1), (f2, a2)) if a > 0]
        gprime = None
        if f1.has_gprime and f2.has_gprime:
            gprime = lambda t: a1 * f1.gprime(t) + a2 * f2.gprime(t)
        return YoungFunction(
            "sum", (a1, a2),
            min(f.p_minus for f in active), max(f.p_plus for f in active),
            _g=lambda t: a1 * f1.g(t) + a2 * f2.g(t),
            _G=lambda t: a1 * f1.G(t) + a2 * f2.G(t),
            _H=lambda t: a1 * f1.H(t) + a2 * f2.H(t),
            _gprime=gprime, components=(f1, f2))
    if mode == "product":
        gprime = None
        if f1.has_gprime and f2.has_gprime:
            gprime = lambda t: f1.gprime(t) * f2.g(t) + f1.g(t) * f2.gprime(t)
        return YoungFunction(
            "product", (),
            f1.p_minus + f2.p_minus - 1, f1.p_plus + f2.p_plus - 1,
            _g=lambda t: f1.g(t) * f2.g(t), _gprime=gprime, components=(f1, f2))
    if mode == "composition":
        gprime = ginv = None
        if f1.has_gprime and f2.has_gprime:
            gprime = lambda t: f1.gprime(f2.g(t)) * f2.gprime(t)
        if f1._ginv is not None and f2._ginv is not None:
            ginv = lambda y: f2._ginv(f1._ginv(y))
        return YoungFunction(
            "composition", (),
            1 + (f1.p_minus - 1) * (f2.p_minus - 1), 1 + (f1.p_plus - 1) * (f2.p_plus - 1),
            _g=lambda t: f1.g(f2.g(t)), _gprime=gprime, _ginv=ginv, components=(f1, f2))
    raise YoungError(f"unknown combination mode {mode!r}; expected one of {MODES}")


def from_spec(spec: dict) -> YoungFunction:
    """Build from a config tree: {"family", "params"} or {"combine", "args", "coeffs"}."""
    if "combine" in spec:
        args = spec.get("args")
        if not isinstance(args, list) or len(args) != 2:
            raise YoungError("young.args: a combination needs exactly two sub-functions")
        return combine(spec["combine"], from_spec(args[0]), from_spec(args[1]),
                       spec.get("coeffs", (1.0, 1.0)))
    if "family" not in spec:
        raise YoungError("young.family: missing family tag")
    return make_family(spec["family"], spec.get("params", []))


# -- inverse and complementary function ------------------------------------

def g_inverse(F: YoungFunction, y):
    """Smallest t with g(t) >= y (right-continuous inverse), elementwise."""
    y = _arr(y)
    if np.any(y < 0):
        raise YoungError("g_inverse: y must be nonnegative")
    if F._ginv is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0, F._ginv(y), 0.0)
    pos = y > 0
    yy = np.where(pos, y, 1.0)
    hi = np.ones_like(yy)
    for _ in range(2100):
        low = F.g(hi) < yy
        if not low.any():
            break
        hi = np.where(low, hi * 2, hi)
    lo = hi / 2
    for _ in range(2100):
        high = F.g(lo) >= yy
        if not high.any():
            break
        hi = np.where(high, lo, hi)
        lo = np.where(high, lo / 2, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        up = F.g(mid) >= yy
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)
    return np.where(pos, hi, 0.0)


def eval_Gstar(F: YoungFunction, t, method: str = "parts"):
    """Complementary function G*(t) = int_0^t g^{-1}.

    ``parts`` integrates by parts, G*(t) = t T - G(T) with T = g^{-1}(t), which
    is exact for continuous g and costs one inversion.  ``quadrature``
    integrates g^{-1} adaptively (Gauss-Kronrod) and is kept as an independent route.
    """
    t = _arr(t)
    if np.any(t < 0):
        raise YoungError("eval_Gstar: t must be nonnegative")
    if method == "parts":
        T = g_inverse(F, t)
        return np.maximum(t * T - F.G(T), 0.0)
    if method != "quadrature":
        raise YoungError(f"eval_Gstar: unknown method {method!r}")
    ginv = lambda x: float(g_inverse(F, x))
    flat = [quad(ginv, 0.0, float(v), epsabs=1e-14, epsrel=1e-10, limit=400)[0] if v > 0 else 0.0
            for v in t.ravel()]
    return np.asarray(flat).reshape(t.shape)


# -- property verification --------------------------------------------------

@dataclass
class YoungReport:
    family: str
    p_minus: float
    p_plus: float
    n_samples: int
    observed_inf: float
    observed_sup: float
    cond_L: bool
    cond_L_prime: Optional[bool]
    G1: bool
    G2: bool
    young_inequality: bool
    lipschitz: bool
    duality: bool
    violations: dict

    @property
    def all_pass(self) -> bool:
        flags = [self.cond_L, self.G1, self.G2, self.young_inequality, self.lipschitz, self.duality]
        if self.cond_L_prime is not None:
            flags.append(self.cond_L_prime)
        return all(flags)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["all_pass"] = self.all_pass
        return out


def default_sample(n: int = 10_000) -> Array:
    return np.logspace(-4, 4, n)


def _worst(x) -> float:
    return float(np.max(x)) if np.size(x) else 0.0


def verify_properties(F: YoungFunction, sample=None, seed: int = 0,
                      ratio_tol: float = 1e-6, rtol: float = 1e-8) -> YoungReport:
    """Check (L), (L'), (G1)-(G3), Young's inequality and G*(g) <= p+ G on samples.

    Pointwise checks run on ``sample``; two-point checks pair the sample with a
    seeded permutation of itself.  Violations are relative and reported as the
    worst signed margin, negative meaning strictly satisfied.
    """
    t = default_sample() if sample is None else np.asarray(sample, dtype=float)
    if t.size == 0 or np.any(t <= 0):
        raise YoungError("verify_properties: sample must be nonempty and positive")
    pm, pp = F.p_minus, F.p_plus
    Gt, gt = F.G(t), F.g(t)
    ratio = t * gt / Gt
    v = {}
    v["L"] = max(pm - ratio.min(), ratio.max() - pp)
    lprime = None
    if F.has_gprime:
        lr = t * F.gprime(t) / gt
        v["L_prime"] = _worst(np.maximum((pm - 1) - lr, lr - (pp - 1)))
        lprime = v["L_prime"] <= ratio_tol

    rng = np.random.default_rng(seed)
    s = t[rng.permutation(t.size)]
    Gs = F.G(s)
    Gst = F.G(s * t)
    lower = np.minimum(s ** pm, s ** pp) * Gt
    upper = np.maximum(s ** pm, s ** pp) * Gt
    v["G1"] = _worst(np.maximum(lower - Gst, Gst - upper) / Gst)
    v["G2"] = _worst((F.G(s + t) - 2.0 ** pp * (Gs + Gt)) / F.G(s + t))
    gstar_t = eval_Gstar(F, t)
    v["young"] = _worst((s * t - Gs - gstar_t) / (s * t))
    lip = np.abs(Gs - Gt) - F.g(np.maximum(s, t)) * np.abs(s - t)
    v["lipschitz"] = _worst(lip / np.maximum(Gs, Gt))
    gstar_g = eval_Gstar(F, gt)
    v["duality"] = _worst((gstar_g - pp * Gt) / Gt)
    v["young_equality_gap"] = _worst(np.abs(t * gt - Gt - gstar_g) / (t * gt))
    v = {k: float(x) for k, x in v.items()}
    return YoungReport(
        family=F.family, p_minus=pm, p_plus=pp, n_samples=int(t.size),
        observed_inf=float(ratio.min()), observed_sup=float(ratio.max()),
        cond_L=v["L"] <= ratio_tol, cond_L_prime=lprime,
        G1=v["G1"] <= rtol, G2=v["G2"] <= rtol,
        young_inequality=v["young"] <= rtol,
        lipschitz=v["lipschitz"] <= rtol, duality=v["duality"] <= rtol,
        violations=v)


def check_h_monotone(F: YoungFunction, c: float, sample=None, tol: float = 1e-10) -> bool:
    """Whether t -> g(t/c)/t is nondecreasing along the (sorted) sample."""
    if not c > 0:
        raise YoungError(f"check_h_monotone: c must be positive, got {c}")
    t = np.sort(default_sample() if sample is None else np.asarray(sample, dtype=float))
    h = F.g(t / c) / t
    return bool(np.all(np.diff(h) >= -tol * np.abs(h[:-1])))


# -- limit as s -> 1 --------------------------------------------------------

def limit_young(F: YoungFunction, dim: int = 1) -> YoungFunction:
    """The local limit function, 2 int_0^1 G(t tau) dtau / tau in one dimension.

    Computed by quadrature from G alone (not from the closed-form ``H``), so it
    serves as an independent route to 2H.
    """
    if dim != 1:
        raise YoungError(f"limit_young: only dim = 1 is supported, got {dim}")
    p_mid = 0.5 * (F.p_minus + F.p_plus)
    w = _quad.FINE_WEIGHTS / _quad.FINE_SIGMA

    def Gt(t):
        return 2.0 * (_quad.unit_integral(F.G, t, w, _quad.FINE_SIGMA) + F.G(_quad.DELTA * t) / p_mid)

    def gt(t):
        return 2.0 * F.G(t) / t

    gprime = None
    if F.has_gprime:
        gprime = lambda t: 2.0 * (F.g(t) / t - F.G(t) / (t * t))
    return YoungFunction("limit", (F.family,) + tuple(F.params), F.p_minus, F.p_plus,
                         _g=gt, _G=Gt, _gprime=gprime, components=(F,))
