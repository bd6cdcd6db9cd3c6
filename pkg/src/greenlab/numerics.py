"""Deterministic scalar numerics: quadrature, differentiation, ODEs, roots.

Every routine here is a pure function of its arguments. Node sets are
fixed, subdivision order is fixed, and ties in the adaptive queue are
broken by insertion order, so repeated calls are bit-reproducible.

Integrands may be supplied either as scalar callables (the default) or as
numpy-vectorized callables (``vectorized=True``), which is much faster for
the profile evaluators in :mod:`greenlab.green`.
"""

from __future__ import annotations

import functools
import heapq
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DivergentTail,
    NoSignChange,
    NonConvergence,
    NonFinite,
    StepUnderflow,
)

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-10
    abs: float = 1e-12

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError(f"tolerances must be positive, got {self}")


QUAD_TOL = Tolerance(rel=1e-10, abs=1e-12)
ODE_TOL = Tolerance(rel=1e-9, abs=1e-12)
ROOT_TOL = Tolerance(rel=4 * EPS, abs=1e-300)


class QuadratureResult(NamedTuple):
    value: float
    error_estimate: float
    evaluations: int


@functools.lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]; cached, read-only."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


_X10, _W10 = gauss_legendre(10)


def _wrap(fn, vectorized: bool) -> Callable[[np.ndarray], np.ndarray]:
    if vectorized:
        def call(x):
            y = np.asarray(fn(x), dtype=float)
            if y.shape != x.shape:
                y = np.broadcast_to(y, x.shape).astype(float)
            return y
    else:
        def call(x):
            return np.array([fn(float(v)) for v in x], dtype=float)

    def checked(x):
        y = call(x)
        bad = ~np.isfinite(y)
        if bad.any():
            raise NonFinite(f"integrand is not finite at x={x[bad][0]!r}")
        return y

    return checked


def _power_substitution(call, a: float, width: float, k: int):
    """x = a + width * u**k, u in (0, 1]; removes an x**s singularity at a."""

    def sub(u):
        uk = u**k
        x = a + width * uk
        jac = k * width * u ** (k - 1)
        out = np.zeros_like(u)
        live = (jac > 0) & (x > a)
        if live.any():
            out[live] = call(x[live]) * jac[live]
        return out

    return sub


def singularity_power(exponent: float) -> int:
    """Substitution power k for an integrand ~ (x - a)**exponent, exponent > -1."""
    if exponent <= -1:
        raise ValueError(f"non-integrable endpoint singularity exponent {exponent}")
    if exponent >= 0:
        return 1
    return math.ceil(2.0 / (1.0 + exponent))


def _adaptive(call, a: float, b: float, tol: Tolerance, max_intervals: int) -> QuadratureResult:
    evals = 0

    def gl(lo, hi):
        nonlocal evals
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        evals += _X10.size
        return h * float(np.dot(_W10, call(c + h * _X10)))

    seq = 0
    heap = []

    def push(lo, hi, coarse):
        nonlocal seq
        mid = 0.5 * (lo + hi)
        left = gl(lo, mid)
        right = gl(mid, hi)
        err = abs(coarse - (left + right))
        heapq.heappush(heap, (-err, seq, lo, mid, hi, left, right))
        seq += 1

    push(a, b, gl(a, b))
    while True:
        total = math.fsum(e[5] + e[6] for e in heap)
        err = math.fsum(-e[0] for e in heap)
        if err <= max(tol.abs, tol.rel * abs(total)):
            return QuadratureResult(total, err, evals)
        if len(heap) >= max_intervals:
            raise NonConvergence(
                f"no convergence after {len(heap)} subintervals (error {err:.3g}, value {total:.6g})"
            )
        _, _, lo, mid, hi, left, right = heapq.heappop(heap)
        if hi - lo <= 64 * EPS * max(abs(lo), abs(hi), 1e-300):
            raise NonConvergence(f"subinterval near x={mid!r} can no longer be split")
        push(lo, mid, left)
        push(mid, hi, right)


def integrate(
    fn: Callable,
    a: float,
    b: float,
    tol: Tolerance = QUAD_TOL,
    *,
    singularity: float | None = None,
    vectorized: bool = False,
    max_intervals: int = 4000,
) -> QuadratureResult:
    """Adaptive Gauss-Legendre quadrature of ``fn`` over [a, b].

    ``singularity`` declares an integrable power-type singularity
    ``(x - a)**singularity`` at the left endpoint; it is removed with the
    substitution ``x = a + (b - a) u**k``. The rule is open, so ``fn`` is
    never evaluated at either endpoint.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    call = _wrap(fn, vectorized)
    if singularity is not None:
        k = singularity_power(singularity)
        if k > 1:
            return _adaptive(_power_substitution(call, a, b - a, k), 0.0, 1.0, tol, max_intervals)
    return _adaptive(call, a, b, tol, max_intervals)


_TAIL_HUGE = 1e100


def integrate_tail(
    fn: Callable,
    a: float,
    decay_exponent: float,
    tol: Tolerance = QUAD_TOL,
    *,
    vectorized: bool = False,
) -> QuadratureResult:
    """Integral of ``fn`` over [a, inf) for ``fn(s) ~ s**-decay_exponent``.

    Uses s = a/u; the transformed integrand behaves like u**(p - 2) at
    u = 0, which is handled as a declared endpoint singularity. The declared
    exponent only has to be a lower bound for the true decay rate.
    """
    if decay_exponent <= 1:
        raise DivergentTail(f"decay exponent {decay_exponent} <= 1: integral diverges")
    a = float(a)
    if not a > 0:
        raise ValueError(f"tail start must be positive, got {a}")

    if vectorized:
        raw = lambda s: np.broadcast_to(np.asarray(fn(s), dtype=float), s.shape)
    else:
        raw = lambda s: np.array([fn(float(v)) for v in s], dtype=float)

    def g(u):
        out = np.zeros_like(u)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            s = a / u
            live = np.isfinite(s) & (s < _TAIL_HUGE)
            if live.any():
                sl = s[live]
                vals = raw(sl) * (sl / u[live])
                bad = ~np.isfinite(vals)
                if bad.any():
                    raise NonFinite(f"tail integrand is not finite at s={sl[bad][0]!r}")
                out[live] = vals
        return out

    sing = decay_exponent - 2.0 if decay_exponent < 2.0 else None
    return integrate(g, 0.0, 1.0, tol, singularity=sing, vectorized=True)


def integrate_pieces(
    fn: Callable,
    knots: Sequence[float],
    tol: Tolerance = QUAD_TOL,
) -> np.ndarray:
    """Integrals of a vectorized ``fn`` over consecutive knot intervals.

    All pieces are first done in one batched call with a 10-point rule and
    its two-halves refinement; pieces whose disagreement exceeds
    ``tol.rel * |piece| + tol.abs * width / total_width`` are redone
    adaptively. Returns one value per interval.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2:
        return np.zeros(0)
    lo, hi = knots[:-1], knots[1:]
    if np.any(hi < lo):
        raise ValueError("knots must be nondecreasing")
    call = _wrap(fn, True)
    width = hi - lo
    mid = 0.5 * (lo + hi)
    live = width > 0
    values = np.zeros(lo.size)
    if not live.any():
        return values
    # three 10-point rules per piece: whole, left half, right half
    lo_l, mid_l, hi_l = lo[live], mid[live], hi[live]
    centers = np.concatenate([0.5 * (lo_l + hi_l), 0.5 * (lo_l + mid_l), 0.5 * (mid_l + hi_l)])
    halfw = np.concatenate([0.5 * (hi_l - lo_l), 0.5 * (mid_l - lo_l), 0.5 * (hi_l - mid_l)])
    nodes = centers[:, None] + halfw[:, None] * _X10[None, :]
    sums = halfw * (call(nodes.ravel()).reshape(nodes.shape) @ _W10)
    m = lo_l.size
    whole, fine = sums[:m], sums[m : 2 * m] + sums[2 * m :]
    total_width = float(knots[-1] - knots[0])
    budget = tol.rel * np.abs(fine) + tol.abs * (hi_l - lo_l) / total_width
    out = fine.copy()
    for j in np.nonzero(np.abs(whole - fine) > budget)[0]:
        piece_tol = Tolerance(rel=tol.rel, abs=max(float(budget[j]), 1e-300))
        out[j] = integrate(fn, lo_l[j], hi_l[j], piece_tol, vectorized=True).value
    values[live] = out
    return values


def derivative_points(x: float, h0: float, levels: int = 5) -> list[float]:
    """Abscissae at which :func:`derive` evaluates ``fn``, in call order."""
    pts = []
    h = float(h0)
    for _ in range(levels):
        pts.append(x + h)
        pts.append(x - h)
        h *= 0.5
    return pts


def derive(fn: Callable[[float], float], x: float, h0: float, *, levels: int = 5, full_output: bool = False):
    """Central-difference derivative with Richardson extrapolation.

    Steps are h0, h0/2, ..., h0/2**(levels-1). The returned estimate is the
    tableau entry whose disagreement with its neighbours is smallest, and
    that disagreement is the error estimate (returned when
    ``full_output`` is set).
    """
    if levels < 2:
        raise ValueError("need at least two Richardson levels")
    if h0 == 0:
        raise ValueError("h0 must be nonzero")
    pts = derivative_points(x, h0, levels)
    vals = [fn(p) for p in pts]
    if not all(math.isfinite(v) for v in vals):
        raise NonFinite(f"function is not finite near x={x!r}")
    table = [[0.0] * levels for _ in range(levels)]
    best, err = None, math.inf
    for i in range(levels):
        xp, xm = pts[2 * i], pts[2 * i + 1]
        table[i][0] = (vals[2 * i] - vals[2 * i + 1]) / (xp - xm)
        fac = 4.0
        for j in range(1, i + 1):
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (fac - 1.0)
            fac *= 4.0
            errt = max(abs(table[i][j] - table[i][j - 1]), abs(table[i][j] - table[i - 1][j - 1]))
            if errt <= err:
                best, err = table[i][j], errt
    if full_output:
        return best, err
    return best


# Dormand-Prince 5(4)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = _DP_A[6] + (0.0,)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_DP_E = tuple(p - q for p, q in zip(_DP_B5, _DP_B4))


def solve_ode(
    rhs: Callable[[float, float], float],
    y0: float,
    t_grid: Sequence[float],
    tol: Tolerance = ODE_TOL,
    *,
    max_steps: int = 200_000,
) -> np.ndarray:
    """Integrate the scalar IVP y' = rhs(t, y), y(t_grid[0]) = y0.

    Dormand-Prince 5(4) with local error control
    ``|err| <= tol.abs + tol.rel * |y|``; steps are clipped to land exactly
    on every grid point. Returns y sampled on ``t_grid``.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    def f(t, y):
        v = float(rhs(t, y))
        if not math.isfinite(v):
            raise NonFinite(f"rhs is not finite at t={t!r}, y={y!r}")
        return v

    out = np.empty(ts.size)
    t = float(ts[0])
    y = float(y0)
    out[0] = y
    if ts.size == 1:
        return out
    k1 = f(t, y)
    span = float(ts[-1] - ts[0])
    scale = tol.abs + tol.rel * abs(y)
    h = min(span, 0.01 * span if k1 == 0 else max(1e-6 * span, (scale / abs(k1)) ** 0.2 * 0.1))
    steps = 0
    for i in range(1, ts.size):
        target = float(ts[i])
        while t < target:
            step = min(h, target - t)
            clipped = step < h
            k = [k1]
            for s in range(1, 7):
                ys = y + step * sum(a * kk for a, kk in zip(_DP_A[s], k))
                k.append(f(t + _DP_C[s] * step, ys))
            y5 = ys  # stage 7 is evaluated at the 5th-order solution (FSAL)
            err = abs(step * sum(e * kk for e, kk in zip(_DP_E, k)))
            sc = tol.abs + tol.rel * max(abs(y), abs(y5))
            ratio = err / sc
            steps += 1
            if steps > max_steps:
                raise StepUnderflow(f"exceeded {max_steps} steps before t={target!r}")
            if ratio <= 1.0:
                t = target if clipped or t + step >= target else t + step
                y = y5
                k1 = k[6]
                grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio**-0.2)
                if not clipped:
                    h = step * grow
                elif grow < 1.0:
                    h = min(h, step * grow)
            else:
                h = step * max(0.2, 0.9 * ratio**-0.2)
                if h <= 16 * EPS * max(abs(t), 1.0):
                    raise StepUnderflow(f"step size underflow at t={t!r}")
        out[i] = y
    return out


def find_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance = ROOT_TOL,
    *,
    max_iter: int = 300,
) -> float:
    """Brent's bracketing method (bisection with secant / inverse quadratic steps).

    Stops when ``|fn(root)| <= tol.abs`` or the bracket half-width drops
    below ``2 eps |root| + tol.rel |root| / 2``.
    """
    a, b = float(lo), float(hi)
    fa, fb = fn(a), fn(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise NoSignChange(f"fn has the same sign at {a!r} and {b!r}")
    c, fc = b, fb
    d = e = b - a
    for _ in range(max_iter):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2 * EPS * abs(b) + 0.5 * tol.rel * abs(b) + 1e-300
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or abs(fb) <= tol.abs:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2 * xm * s
                q = 1 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2 * xm * q * (q - r) - (b - a) * (r - 1))
                q = (q - 1) * (r - 1) * (s - 1)
            if p > 0:
                q = -q
            p = abs(p)
            if 2 * p < min(3 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = fn(b)
        if fb == 0:
            return b
    raise NonConvergence(f"root not bracketed to tolerance after {max_iter} iterations")


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-10) -> tuple[float, float]:
    """Golden-section search for a maximum of a unimodal ``fn`` on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > xtol * max(1.0, abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)
