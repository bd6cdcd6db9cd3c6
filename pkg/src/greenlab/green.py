"""Green function, b = G^(1/(2-n)) and the Hessian of b^2 on a warped product.

For a radial function u on dr^2 + f^2 g_N,

    Hess u = u'' dr (x) dr + (u' f'/f) (g - dr (x) dr),

so Hess b^2 has a radial eigenvalue (b^2)'' and a tangential one
(b^2)' f'/f of multiplicity n - 1. The Green function solves
G'' + (n-1)(f'/f) G' = 0, i.e. G' = -c f^(1-n).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import numerics
from .errors import DegenerateF, DivergentAtPole, InvalidManifold, NotSublinear, Parabolic
from .manifold import R_MAX, R_MIN, ManifoldSpec, log_grid, validate
from .numerics import Tolerance
from .results import CheckReport, Table, report_from_residuals

log = logging.getLogger(__name__)

UNBOUNDED = math.inf
AUDIT_GRID = (1e-3, 1e3, 50)
ASSUMPTION_GRID = (1e-4, 1e4, 161)
DECAY_WINDOW = (10.0, 1e3, 60)

_PANEL_ORDER = 20
_BUILD_TOL = Tolerance(rel=1e-14, abs=1e-300)


def _scalar_or_array(x, arr):
    return float(arr) if np.ndim(x) == 0 else arr


class _State(NamedTuple):
    r: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    integral: np.ndarray  # G / c_N
    b: np.ndarray
    b1: np.ndarray
    ratio: np.ndarray  # b / f


class GreenProfile:
    """Normalized Green function data for one manifold.

    G(r) = c_N * int_r^inf f^(1-n) with c_N = (n-2)|S^{n-1}|/cross_volume,
    so that the flux of grad G matches the Euclidean normalization and
    G = r^(2-n) on R^n.

    The integral is tabulated eagerly on log-spaced panels over
    [r_min, r_max]; evaluation adds a 20-point Gauss-Legendre partial panel.
    Below r_min and above r_max the warping is replaced by its local power
    law, which is exact for cones and accurate to O(r^2) at a smooth pole.
    Instances are immutable and safe to share between threads.
    """

    def __init__(self, spec: ManifoldSpec, *, r_min=R_MIN, r_max=R_MAX, panels_per_decade=16):
        self.spec = spec
        n = spec.n
        self.n = n
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        w = spec.warping
        self._f, self._f1, self._f2 = w.eval_f, w.eval_f1, w.eval_f2
        self.sphere_area = spec.sphere_area
        self.norm_const = (n - 2) * self.sphere_area / spec.cross_volume
        self._grad_const = self.sphere_area / spec.cross_volume  # c_N / (n - 2)

        decades = math.log10(self.r_max / self.r_min)
        panels = max(1, int(round(decades * panels_per_decade)))
        self._knots = np.geomspace(self.r_min, self.r_max, panels + 1)
        self._log_knots = np.log(self._knots)
        pieces = numerics.integrate_pieces(self._log_integrand, self._log_knots, _BUILD_TOL)
        tail = numerics.integrate_tail(
            lambda s: self._f(s) ** (1 - n), self.r_max, w.alpha * (n - 1), _BUILD_TOL, vectorized=True
        ).value
        suffix = np.empty(panels + 1)
        suffix[-1] = tail
        suffix[:-1] = tail + np.cumsum(pieces[::-1])[::-1]
        self._suffix = suffix
        self._suffix.setflags(write=False)
        self._tail = tail

        def local_power(r):
            r = np.array([r])
            return float(r[0] * self._f1(r)[0] / self._f(r)[0]), float(self._f(r)[0])

        self._p_lo, self._f_lo = local_power(self.r_min)
        self._p_hi, _ = local_power(self.r_max)
        self._e_lo = 1.0 - self._p_lo * (n - 1)
        self._e_hi = 1.0 - self._p_hi * (n - 1)
        self._gl_x, self._gl_w = numerics.gauss_legendre(_PANEL_ORDER)

    def _log_integrand(self, u):
        s = np.exp(u)
        return self._f(s) ** (1 - self.n) * s

    def _integral(self, r: np.ndarray) -> np.ndarray:
        """int_r^inf f^(1-n) ds, vectorized."""
        out = np.empty_like(r)
        n = self.n
        low = r < self.r_min
        high = r >= self.r_max
        mid = ~(low | high)
        if mid.any():
            rm = r[mid]
            k = np.clip(np.searchsorted(self._knots, rm, side="right") - 1, 0, self._knots.size - 2)
            lo = np.log(rm)
            hi = self._log_knots[k + 1]
            half = 0.5 * (hi - lo)
            nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * self._gl_x[None, :]
            partial = half * (self._log_integrand(nodes) @ self._gl_w)
            out[mid] = partial + self._suffix[k + 1]
        if low.any():
            x = r[low] / self.r_min
            e = self._e_lo
            if abs(e) < 1e-12:
                part = -np.log(x)
            else:
                part = -np.expm1(e * np.log(x)) / e
            out[low] = self._f_lo ** (1 - n) * self.r_min * part + self._suffix[0]
        if high.any():
            out[high] = self._tail * (r[high] / self.r_max) ** self._e_hi
        return out

    def _state(self, r) -> _State:
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        if np.any(flat <= 0):
            raise ValueError("profile evaluators need r > 0")
        f = self._f(flat)
        f1 = self._f1(flat)
        integral = self._integral(flat)
        G = self.norm_const * integral
        b = G ** (1.0 / (2 - self.n))
        ratio = b / f
        b1 = self._grad_const * ratio ** (self.n - 1)
        return _State(flat, f, f1, integral, b, b1, ratio)

    def sample(self, r) -> _State:
        """Flattened (r, f, f', G / c_N, b, b', b / f) columns at r."""
        return self._state(r)

    # evaluators: accept float or array, return the same shape
    def G(self, r):
        s = self._state(r)
        return _scalar_or_array(r, (self.norm_const * s.integral).reshape(np.shape(r)))

    def G1(self, r):
        rr = np.asarray(r, dtype=float)
        return _scalar_or_array(r, -self.norm_const * self._f(rr) ** (1 - self.n))

    def b(self, r):
        return _scalar_or_array(r, self._state(r).b.reshape(np.shape(r)))

    def b1(self, r):
        return _scalar_or_array(r, self._state(r).b1.reshape(np.shape(r)))

    grad_b = b1

    def b2_prime(self, r):
        """(b^2)' = 2 b b', the radial speed of the gradient flow of b^2."""
        s = self._state(r)
        return _scalar_or_array(r, (2 * s.b * s.b1).reshape(np.shape(r)))

    def eigenvalues(self, r):
        """(lam_rad, lam_tan) of Hess b^2.

        lam_rad = 2 b'^2 + 2 b b'' with b'' = (n-1) b' (b'/b - f'/f), from
        differentiating b' = (c_N/(n-2)) b^(n-1) f^(1-n) in closed form.
        """
        s = self._state(r)
        n = self.n
        lam_tan = 2.0 * s.ratio * s.b1 * s.f1
        lam_rad = 2.0 * s.b1**2 + 2.0 * (n - 1) * s.b1 * (s.b1 - s.ratio * s.f1)
        shape = np.shape(r)
        return _scalar_or_array(r, lam_rad.reshape(shape)), _scalar_or_array(r, lam_tan.reshape(shape))

    def lam_rad(self, r):
        return self.eigenvalues(r)[0]

    def lam_tan(self, r):
        return self.eigenvalues(r)[1]

    def H(self, r):
        """max(lam_rad, lam_tan, 0): the smallest admissible Hessian bound at r."""
        lr, lt = self.eigenvalues(r)
        return np.maximum(np.maximum(lr, lt), 0.0) if np.ndim(r) else max(lr, lt, 0.0)

    def table(self, r_grid) -> Table:
        r = np.asarray(r_grid, dtype=float)
        s = self._state(r)
        lr, lt = self.eigenvalues(r)
        return Table.from_columns(
            r=r,
            G=self.norm_const * s.integral,
            b=s.b,
            grad_b=s.b1,
            lam_rad=lr,
            lam_tan=lt,
            H=np.maximum(np.maximum(lr, lt), 0.0),
        )


def build_profile(spec: ManifoldSpec, **kwargs) -> GreenProfile:
    report = validate(spec)
    if not report.nonparabolic:
        raise Parabolic(f"{spec.label} is parabolic: " + "; ".join(report.notes))
    if not report.positivity_ok:
        raise InvalidManifold(f"{spec.label} failed validation: " + "; ".join(report.notes))
    return GreenProfile(spec, **kwargs)


@dataclass
class AssumptionVerdict:
    holds: bool
    constant_c: float  # UNBOUNDED when no finite constant is certified
    witness_r: float
    profile: tuple[np.ndarray, np.ndarray]
    notes: list[str] = field(default_factory=list)


def assumption_constant(profile: GreenProfile, r_grid=None) -> AssumptionVerdict:
    """Smallest C with Hess b^2 <= C g on the grid (refined near the argmax)."""
    r = log_grid(*ASSUMPTION_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    lr, lt = profile.eigenvalues(r)
    top = np.maximum(lr, lt)
    k = int(np.argmax(top))
    c, witness = float(top[k]), float(r[k])
    notes = []
    if 0 < k < r.size - 1:
        def top_at(u):
            a, b = profile.eigenvalues(math.exp(u))
            return max(a, b)

        u_best, c_best = numerics.golden_max(top_at, math.log(r[k - 1]), math.log(r[k + 1]), 1e-10)
        if c_best > c:
            c, witness = c_best, math.exp(u_best)
    w = profile.spec.warping
    if w.origin_smooth and c < 2.0:
        # Euclidean asymptotics at the pole: both eigenvalues tend to 2
        c = 2.0
        notes.append("supremum is the pole limit 2 (smooth pole)")
    increasing = k == r.size - 1 and top[-1] > top[-2] * (1 + 1e-9) + 1e-12
    if increasing and not w.alpha < 1:
        notes.append("max eigenvalue still increasing at r_max and alpha >= 1: no cap from asymptotics")
        return AssumptionVerdict(False, UNBOUNDED, witness, (r, top), notes)
    if increasing:
        notes.append("max eigenvalue increasing at r_max but sublinear growth forces decay")
    return AssumptionVerdict(True, max(c, 0.0), witness, (r, top), notes)


@dataclass
class HOracleSample:
    r: float
    F: float
    h: float
    hdot: float
    hdotdot: float
    lam_rad: float  # Hess b^2 rebuilt from h, hdot, hdotdot
    lam_tan: float


def h_oracle(profile: GreenProfile, r: float) -> HOracleSample:
    """Hess b^2 rebuilt through b^2 = h(F), F = f^2.

    Harmonicity of G = h^((2-n)/2) gives
        hdotdot = [n hdot / (2h) - (n-1) / (2F) - F'' / F'^2] hdot,
    and then lam_rad = hdotdot F'^2 + hdot F'', lam_tan = 2 hdot f'^2.
    """
    s = profile._state(r)
    n = profile.n
    f, f1 = float(s.f[0]), float(s.f1[0])
    f2 = float(profile._f2(np.array([r]))[0])
    F = f * f
    F1 = 2 * f * f1
    F2 = 2 * (f1 * f1 + f * f2)
    if F1 == 0 or not math.isfinite(F1):
        raise DegenerateF(f"F' vanishes at r={r!r}")
    b, b1 = float(s.b[0]), float(s.b1[0])
    h = b * b
    hdot = 2 * b * b1 / F1
    hdd = (n * hdot / (2 * h) - (n - 1) / (2 * F) - F2 / F1**2) * hdot
    return HOracleSample(float(r), F, h, hdot, hdd, hdd * F1**2 + hdot * F2, 2 * hdot * f1 * f1)


def h_oracle_check(profile: GreenProfile, r_grid=None, tol=1e-8) -> CheckReport:
    r = log_grid(*AUDIT_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    lr, lt = profile.eigenvalues(r)
    rows, res, notes = [], [], []
    for ri, a, b in zip(r, lr, lt):
        try:
            s = h_oracle(profile, float(ri))
        except DegenerateF as exc:
            notes.append(str(exc))
            continue
        scale = abs(a) + abs(b) + 1e-300
        res.append(max(abs(s.lam_rad - a), abs(s.lam_tan - b)) / scale)
        rows.append([ri, s.F, s.h, s.hdot, s.hdotdot, s.lam_rad, a, s.lam_tan, b])
    table = Table(["r", "F", "h", "hdot", "hdotdot", "lam_rad_h", "lam_rad", "lam_tan_h", "lam_tan"], rows)
    kept = [row[0] for row in rows]
    return report_from_residuals("h_oracle", kept, res, tol, notes, table)


@dataclass
class DecayReport:
    r: np.ndarray
    H: np.ndarray
    c0: float
    c5: float  # log H ~ c0 - c5 r^(1-alpha)
    residual: float  # sup-norm residual of that fit
    is_exponential_type: bool
    power_exponent: float  # log H ~ a + power_exponent log r, for comparison
    power_residual: float


def hess_decay_profile(profile: GreenProfile, r_grid=None) -> DecayReport:
    alpha = profile.spec.warping.alpha
    if not alpha < 1:
        raise NotSublinear(f"decay profile needs a sublinear warping, alpha={alpha}")
    r = log_grid(*DECAY_WINDOW) if r_grid is None else np.asarray(r_grid, dtype=float)
    H = np.asarray(profile.H(r))
    keep = H > 0
    if keep.sum() < 3:
        return DecayReport(r, H, math.nan, math.nan, math.inf, False, math.nan, math.inf)
    logH = np.log(H[keep])

    def fit(x):
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, logH, rcond=None)
        return coef, float(np.max(np.abs(A @ coef - logH)))

    (c0, slope), resid = fit(r[keep] ** (1 - alpha))
    (_, p), presid = fit(np.log(r[keep]))
    return DecayReport(r, H, float(c0), float(-slope), resid, bool(slope < 0 and resid < 0.1), float(p), presid)


def critical_growth_exponents(profile: GreenProfile, r_grid=None) -> dict[str, float]:
    """Log-log growth rates of hdot and |hdotdot| for linear-growth warpings (logged only)."""
    r = log_grid(*DECAY_WINDOW) if r_grid is None else np.asarray(r_grid, dtype=float)
    samples = [h_oracle(profile, float(x)) for x in r]
    out = {}
    for name, vals in (("hdot", [s.hdot for s in samples]), ("hdotdot", [abs(s.hdotdot) for s in samples])):
        vals = np.asarray(vals)
        ok = vals > 0
        out[name] = float(np.polyfit(np.log(r[ok]), np.log(vals[ok]), 1)[0]) if ok.sum() > 2 else math.nan
    log.info("growth exponents on %s: %s", profile.spec.label, out)
    return out


def trace_identity_check(profile: GreenProfile, r_grid=None, tol=1e-8) -> CheckReport:
    """lam_rad + (n-1) lam_tan = 2n |grad b|^2, i.e. Lap b^2 = 2n |grad b|^2."""
    r = log_grid(*AUDIT_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    n = profile.n
    lr, lt = profile.eigenvalues(r)
    g2 = np.asarray(profile.grad_b(r)) ** 2
    res = np.abs(lr + (n - 1) * lt - 2 * n * g2) / (1 + 2 * n * g2)
    table = Table.from_columns(r=r, trace=lr + (n - 1) * lt, two_n_grad2=2 * n * g2, residual=res)
    return report_from_residuals("trace_identity", r, res, tol, table=table)


def lemma22_check(profile: GreenProfile, r_grid=None, tol=1e-7) -> CheckReport:
    """<grad |grad b|^2, grad b^2> = 2 Hess b^2(grad b, grad b) - 4 |grad b|^4.

    The left side uses a Richardson derivative of |grad b|^2 in log r,
    independent of the closed-form eigenvalues on the right.
    """
    r = log_grid(*AUDIT_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    lr, _ = profile.eigenvalues(r)
    g2 = np.asarray(profile.grad_b(r)) ** 2
    speed = np.asarray(profile.b2_prime(r))
    lhs = np.empty_like(r)
    for i, ri in enumerate(r):
        d = numerics.derive(lambda u: profile.b1(math.exp(u)) ** 2, math.log(ri), 0.05)
        lhs[i] = d / ri * speed[i]
    rhs = 2 * lr * g2 - 4 * g2**2
    scale = np.abs(2 * lr * g2) + 4 * g2**2 + 1e-300
    res = np.abs(lhs - rhs) / scale
    table = Table.from_columns(r=r, lhs=lhs, rhs=rhs, residual=res)
    return report_from_residuals("lemma22", r, res, tol, table=table)


RADIAL_TOL = Tolerance(rel=1e-12, abs=1e-300)


def _pole_piece(fn, s0: float, pole_exponent, tol) -> float:
    """int_0^s0 fn; with a declared exponent p the power-law model fn(s0) (s/s0)^p is used.

    Below r_min the profile itself runs on power-law models, so the model is
    accurate to O(s0^2) and avoids overflow of b^-alpha as p approaches -1.
    """
    if pole_exponent is None:
        return numerics.integrate(fn, 0.0, s0, tol, vectorized=True).value
    p = float(pole_exponent)
    if not p > -1:
        raise DivergentAtPole(f"integrand ~ s^{p:g} is not integrable at the pole")
    return float(np.asarray(fn(np.array([s0])))[0]) * s0 / (p + 1)


def radial_integral(profile: GreenProfile, fn, lo: float, hi: float, *, pole_exponent=None, tol=RADIAL_TOL) -> float:
    """int_lo^hi fn(s) ds for a vectorized radial integrand.

    Pieces are log-spaced (16 per decade) and integrated in u = log s.
    With lo = 0 the piece next to the pole is integrated in s, with
    ``pole_exponent`` declaring fn ~ s**pole_exponent there.
    """
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        return 0.0
    total = 0.0
    if lo <= 0.0:
        s0 = min(hi, profile.r_min)
        total += _pole_piece(fn, s0, pole_exponent, tol)
        lo = s0
        if lo >= hi:
            return total
    pieces = max(4, int(math.ceil(16 * math.log10(hi / lo))))
    knots = np.linspace(math.log(lo), math.log(hi), pieces + 1)

    def in_log(u):
        s = np.exp(u)
        return fn(s) * s

    return total + math.fsum(numerics.integrate_pieces(in_log, knots, tol))


def cumulative_radial_integral(profile: GreenProfile, fn, points, *, from_zero=True, pole_exponent=None, tol=RADIAL_TOL):
    """Integrals of ``fn`` from 0 (or from min(points)) up to each point.

    One pass over the sorted points with extra knots so that no log-piece
    is wider than 1/16 decade; returns values in the order of ``points``.
    """
    pts = np.asarray(points, dtype=float)
    order = np.sort(np.unique(pts))
    if order.size == 0:
        return np.zeros(0)
    if order[0] <= 0:
        raise ValueError("points must be positive")
    start = 0.0
    first = order[0]
    if from_zero:
        s0 = min(first, profile.r_min)
        start = _pole_piece(fn, s0, pole_exponent, tol)
        lo = s0
    else:
        lo = first
    logs = np.log(order)
    knots = [math.log(lo)]
    marks = []  # knot index of each sorted point
    step = math.log(10.0) / 16
    for v in logs:
        gap = v - knots[-1]
        if gap > 0:
            m = int(math.ceil(gap / step))
            knots.extend(np.linspace(knots[-1], v, m + 1)[1:])
        marks.append(len(knots) - 1)

    def in_log(u):
        s = np.exp(u)
        return fn(s) * s

    pieces = numerics.integrate_pieces(in_log, np.array(knots), tol)
    cum = np.concatenate([[start], start + np.cumsum(pieces)])
    values = cum[np.array(marks)]
    return values[np.searchsorted(order, pts)]
