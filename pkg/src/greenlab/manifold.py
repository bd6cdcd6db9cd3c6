"""Warped-product manifolds dr^2 + f(r)^2 g_N and the built-in catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import numerics
from .errors import (
    BadDimension,
    DivergentTail,
    GreenlabError,
    InvalidManifold,
    NonPositiveSlope,
    NotSublinear,
    ParabolicRange,
)

R_MIN = 1e-6
R_MAX = 1e6

CATALOG_IDS = ("euclidean", "cone", "perturbed_cone", "sublinear", "custom")


def sphere_volume(n: int) -> float:
    """|S^{n-1}|, the area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    return np.geomspace(lo, hi, num)


@dataclass(frozen=True)
class WarpingFunction:
    """f with two derivatives, plus the growth metadata used for tails.

    The evaluators must accept numpy arrays. ``alpha`` is the asymptotic
    growth exponent (f ~ r**alpha up to bounded factors) and ``tail_c0`` the
    constant bounding those factors. ``eval_f3`` is optional; curvature falls
    back to numerical differentiation of ``eval_f2`` without it.
    """

    eval_f: Callable
    eval_f1: Callable
    eval_f2: Callable
    alpha: float
    origin_smooth: bool
    tail_c0: float = 1.0
    eval_f3: Callable | None = None


@dataclass(frozen=True)
class ManifoldSpec:
    n: int
    warping: WarpingFunction
    cross_volume: float
    label: str
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise BadDimension(f"dimension must be an integer >= 3, got {self.n}")

    @property
    def sphere_area(self) -> float:
        return sphere_volume(self.n)

    def describe(self) -> dict:
        return {"type": self.kind, "n": self.n, **self.params}


@dataclass
class ValidationReport:
    origin_ok: bool
    positivity_ok: bool
    derivative_consistency_ok: bool
    nonparabolic: bool
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.origin_ok and self.positivity_ok and self.derivative_consistency_ok and self.nonparabolic


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise BadDimension(f"dimension must be an integer >= 3, got {n}")
    return int(n)


def make_euclidean(n: int) -> ManifoldSpec:
    n = _check_n(n)
    w = WarpingFunction(
        eval_f=lambda r: np.asarray(r, dtype=float) * 1.0,
        eval_f1=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        eval_f2=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        eval_f3=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        alpha=1.0,
        origin_smooth=True,
    )
    return ManifoldSpec(n, w, sphere_volume(n), f"euclidean(n={n})", "euclidean", {})


def make_cone(n: int, a: float) -> ManifoldSpec:
    """Cone with warping f(r) = a r (slope a; the metric is dr^2 + a^2 r^2 g_N)."""
    n = _check_n(n)
    a = float(a)
    if not a > 0:
        raise NonPositiveSlope(f"cone slope must be positive, got {a}")
    w = WarpingFunction(
        eval_f=lambda r: a * np.asarray(r, dtype=float),
        eval_f1=lambda r: np.full_like(np.asarray(r, dtype=float), a),
        eval_f2=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        eval_f3=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        alpha=1.0,
        origin_smooth=(a == 1.0),
        tail_c0=max(a, 1.0 / a),
    )
    return ManifoldSpec(n, w, sphere_volume(n), f"cone(n={n},a={a!r})", "cone", {"a": a})


def make_sublinear(n: int, alpha: float) -> ManifoldSpec:
    """f(r) = r (1 + r^2)^((alpha-1)/2): smooth at the pole, f ~ r^alpha at infinity."""
    n = _check_n(n)
    alpha = float(alpha)
    if alpha * (n - 1) <= 1:
        raise ParabolicRange(f"alpha={alpha} <= 1/(n-1): the manifold is parabolic")
    if alpha >= 1:
        raise NotSublinear(f"alpha={alpha} >= 1 is not sublinear")
    m = (alpha - 1.0) / 2.0

    def f(r):
        r = np.asarray(r, dtype=float)
        return r * np.hypot(1.0, r) ** (alpha - 1.0)

    def f1(r):
        r = np.asarray(r, dtype=float)
        return np.hypot(1.0, r) ** (2 * m - 2) * (1 + alpha * r * r)

    def f2(r):
        r = np.asarray(r, dtype=float)
        return (alpha - 1) * r * (3 + alpha * r * r) * np.hypot(1.0, r) ** (2 * m - 4)

    def f3(r):
        r = np.asarray(r, dtype=float)
        r2 = r * r
        poly = 3 + (6 * alpha - 12) * r2 + (alpha * alpha - 2 * alpha) * r2 * r2
        return (alpha - 1) * poly * np.hypot(1.0, r) ** (2 * m - 6)

    w = WarpingFunction(f, f1, f2, alpha=alpha, origin_smooth=True, tail_c0=2.0, eval_f3=f3)
    return ManifoldSpec(n, w, sphere_volume(n), f"sublinear(n={n},alpha={alpha!r})", "sublinear", {"alpha": alpha})


# bump psi(s) = exp(-1/((s-1)(2-s))) on (1, 2); sup|psi''| over (1, 2), so that
# phi = psi / _BUMP_NORM has sup|phi|, sup|phi'|, sup|phi''| <= 1
_BUMP_NORM = 0.5907573342841369


def bump(s, order: int = 0):
    """Smooth bump supported in [1, 2] and its first three derivatives."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    q = (s - 1.0) * (2.0 - s)
    live = q > 1e-3  # exp(-1000) underflows anyway
    if live.any():
        ql = q[live]
        dq = 3.0 - 2.0 * s[live]
        psi = np.exp(-1.0 / ql)
        if order == 0:
            val = psi
        elif order == 1:
            val = psi * dq / ql**2
        elif order == 2:
            val = psi * (dq**2 / ql**4 - 2.0 / ql**2 - 2.0 * dq**2 / ql**3)
        elif order == 3:
            # psi = exp(L) with L = -1/q
            l1 = dq / ql**2
            l2 = -2.0 / ql**2 - 2.0 * dq**2 / ql**3
            l3 = 12.0 * dq / ql**3 + 6.0 * dq**3 / ql**4
            val = psi * (l1**3 + 3.0 * l1 * l2 + l3)
        else:
            raise ValueError("bump derivatives are available up to order 3")
        out[live] = val / _BUMP_NORM
    return out


def make_perturbed_cone(n: int, a: float, eps: float, r0: float) -> ManifoldSpec:
    """f(r) = a r (1 + eps phi(r / r0)) with the bump phi supported in [1, 2]."""
    n = _check_n(n)
    a, eps, r0 = float(a), float(eps), float(r0)
    if not a > 0:
        raise NonPositiveSlope(f"cone slope must be positive, got {a}")
    if not 0 <= eps < 1:
        raise NonPositiveSlope(f"perturbation size must lie in [0, 1), got {eps}")
    if not r0 > 0:
        raise ValueError(f"bump location must be positive, got {r0}")

    def f(r):
        r = np.asarray(r, dtype=float)
        return a * r * (1.0 + eps * bump(r / r0))

    def f1(r):
        r = np.asarray(r, dtype=float)
        s = r / r0
        return a * (1.0 + eps * bump(s)) + a * r * eps * bump(s, 1) / r0

    def f2(r):
        r = np.asarray(r, dtype=float)
        s = r / r0
        return 2.0 * a * eps * bump(s, 1) / r0 + a * r * eps * bump(s, 2) / r0**2

    def f3(r):
        r = np.asarray(r, dtype=float)
        s = r / r0
        return 3.0 * a * eps * bump(s, 2) / r0**2 + a * r * eps * bump(s, 3) / r0**3

    w = WarpingFunction(
        f, f1, f2, alpha=1.0, origin_smooth=(a == 1.0), tail_c0=max(a, 1.0 / a) * (1 + eps), eval_f3=f3
    )
    label = f"perturbed_cone(n={n},a={a!r},eps={eps!r},r0={r0!r})"
    return ManifoldSpec(n, w, sphere_volume(n), label, "perturbed_cone", {"a": a, "eps": eps, "r0": r0})


def make_custom(
    n: int,
    f: Callable,
    f1: Callable,
    f2: Callable,
    alpha: float,
    *,
    origin_smooth: bool = False,
    tail_c0: float = 1.0,
    cross_volume: float | None = None,
    label: str = "custom",
    f3: Callable | None = None,
) -> ManifoldSpec:
    """Wrap user evaluators; scalar-only callables are vectorized."""
    n = _check_n(n)

    def vec(fn):
        if fn is None:
            return None
        try:
            probe = np.asarray(fn(np.array([1.0, 2.0])), dtype=float)
            if probe.shape == (2,):
                return fn
        except Exception:
            pass
        return np.vectorize(lambda r: float(fn(float(r))), otypes=[float])

    w = WarpingFunction(vec(f), vec(f1), vec(f2), float(alpha), origin_smooth, tail_c0, vec(f3))
    cv = sphere_volume(n) if cross_volume is None else float(cross_volume)
    return ManifoldSpec(n, w, cv, label, "custom", {"alpha": float(alpha)})


def from_config(cfg: dict[str, Any]) -> ManifoldSpec:
    """Build a catalog entry from ``{"type": id, "n": ..., <params>}``."""
    kind = cfg.get("type")
    n = cfg.get("n")
    if kind == "euclidean":
        return make_euclidean(n)
    if kind == "cone":
        return make_cone(n, cfg["a"])
    if kind == "sublinear":
        return make_sublinear(n, cfg["alpha"])
    if kind == "perturbed_cone":
        return make_perturbed_cone(n, cfg.get("a", 1.0), cfg.get("eps", 0.01), cfg.get("r0", 1.0))
    if kind == "custom":
        # custom warpings arrive as numpy expressions in r, e.g. "r*(1+r**2)**-0.25"
        env = {"np": np, "__builtins__": {}}
        fns = [eval(f"lambda r: {cfg[key]}", env) for key in ("f", "f1", "f2")]
        spec = make_custom(
            n,
            *fns,
            alpha=cfg["alpha"],
            origin_smooth=bool(cfg.get("origin_smooth", False)),
            cross_volume=cfg.get("cross_volume"),
            label=cfg.get("label", "custom"),
        )
        params = {k: cfg[k] for k in ("f", "f1", "f2", "alpha") if k in cfg}
        return ManifoldSpec(spec.n, spec.warping, spec.cross_volume, spec.label, "custom", params)
    raise InvalidManifold(f"unknown manifold type {kind!r}; expected one of {CATALOG_IDS}")


def catalog() -> list[dict]:
    """Catalog entries with their parameters and admissible ranges."""
    return [
        {"type": "euclidean", "params": {"n": "int >= 3"}, "warping": "f(r) = r"},
        {"type": "cone", "params": {"n": "int >= 3", "a": "> 0"}, "warping": "f(r) = a r"},
        {
            "type": "perturbed_cone",
            "params": {"n": "int >= 3", "a": "> 0", "eps": "[0, 1)", "r0": "> 0"},
            "warping": "f(r) = a r (1 + eps phi(r/r0)), phi a bump on [1, 2]",
        },
        {
            "type": "sublinear",
            "params": {"n": "int >= 3", "alpha": "(1/(n-1), 1)"},
            "warping": "f(r) = r (1 + r^2)^((alpha-1)/2)",
        },
        {
            "type": "custom",
            "params": {"n": "int >= 3", "f": "expr", "f1": "expr", "f2": "expr", "alpha": "real"},
            "warping": "user supplied",
        },
    ]


def _consistency(fn, dfn, radii, order) -> tuple[float, float]:
    """Worst relative gap between derive(fn) and dfn, scaled by f/r**order."""
    worst, where = 0.0, float("nan")
    scalar = lambda x: float(fn(np.array([x]))[0])
    for r in radii:
        d = numerics.derive(scalar, float(r), 0.05 * r)
        exact = float(dfn(np.array([r]))[0])
        scale = abs(exact) + abs(scalar(r)) / r**order
        gap = abs(d - exact) / scale if scale > 0 else abs(d - exact)
        if gap > worst:
            worst, where = gap, float(r)
    return worst, where


def validate(spec: ManifoldSpec) -> ValidationReport:
    """Audit a spec; failures are recorded in the report, never raised."""
    notes = []
    w = spec.warping
    n = spec.n

    grid = log_grid(R_MIN, R_MAX, 121)
    with np.errstate(all="ignore"):
        fv = np.asarray(w.eval_f(grid), dtype=float)
    positivity_ok = bool(np.all(np.isfinite(fv)) and np.all(fv > 0))
    if not positivity_ok:
        notes.append("warping is not finite and positive on [1e-6, 1e6]")
    if not spec.cross_volume > 0:
        positivity_ok = False
        notes.append(f"cross_volume must be positive, got {spec.cross_volume}")

    origin_ok = True
    if w.origin_smooth:
        r = np.array([1e-6])
        ratio = float(w.eval_f(r)[0] / r[0])
        slope = float(w.eval_f1(r)[0])
        if abs(ratio - 1) > 1e-6 or abs(slope - 1) > 1e-6:
            origin_ok = False
            notes.append(f"declared smooth at the pole but f(r)/r={ratio}, f'(0+)={slope}")

    audit = log_grid(1e-2, 1e2, 50)
    derivative_ok = True
    try:
        for name, fn, dfn, order in (("f'", w.eval_f, w.eval_f1, 1), ("f''", w.eval_f1, w.eval_f2, 2)):
            gap, where = _consistency(fn, dfn, audit, order)
            if gap > 1e-6:
                derivative_ok = False
                notes.append(f"{name} disagrees with numerical derivative by {gap:.3g} at r={where}")
    except GreenlabError as exc:
        derivative_ok = False
        notes.append(f"derivative audit failed: {exc}")

    tail_exp = w.alpha * (n - 1)
    nonparabolic = tail_exp > 1
    if nonparabolic and positivity_ok:
        try:
            numerics.integrate_tail(lambda s: w.eval_f(s) ** (1 - n), R_MAX, tail_exp, vectorized=True)
        except DivergentTail as exc:
            nonparabolic = False
            notes.append(str(exc))
        except GreenlabError as exc:
            notes.append(f"tail integral of f^(1-n) could not be evaluated: {exc}")
    elif not nonparabolic:
        notes.append(f"alpha (n-1) = {tail_exp} <= 1: integral of f^(1-n) diverges (parabolic)")
    return ValidationReport(origin_ok, positivity_ok, derivative_ok, nonparabolic, notes)
