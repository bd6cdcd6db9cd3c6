"""Gradient flow of b^2 and the weighted integrals it transports.

The flow is radial: a point at geodesic radius r moves with speed
(b^2)'(r) = 2 b b'. For a radial domain B = {b_lo <= b <= b_hi} the image
Phi_t(B) is the shell between the flowed boundary radii, and

    V_beta(t) = w(t) cross_volume int_{rho_lo(t)}^{rho_hi(t)} b^-alpha |b'|^beta f^(n-1) dr.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numerics
from .errors import AssumptionFails, DivergentAtPole, InadmissibleParams, WeightRatioViolated
from .green import GreenProfile, assumption_constant, cumulative_radial_integral, trace_identity_check
from .level import level_radius
from .numerics import Tolerance
from .results import CheckReport, MonotoneSeries, Table, report_from_residuals

FLOW_TOL = Tolerance(rel=1e-13, abs=1e-14)
T_GRID = (0.0, 2.0, 41)
MONO_TOL = 1e-6


def default_t_grid() -> np.ndarray:
    return np.linspace(*T_GRID)


def default_sweep(n: int) -> list[tuple[float, float]]:
    """Six admissible (alpha, beta) pairs; for n = 4 they are
    (0,4), (1,3), (2,2), (3,1), (2,3), (3.5,1)."""
    return [(0.0, n), (1.0, n - 1.0), (n / 2, n / 2), (n - 1.0, 1.0), (2.0, n - 1.0), (n - 0.5, 1.0)]


@dataclass(frozen=True)
class FlowDomain:
    b_lo: float
    b_hi: float

    def __post_init__(self):
        if not (self.b_lo >= 0 and self.b_hi > self.b_lo):
            raise ValueError(f"need 0 <= b_lo < b_hi, got [{self.b_lo}, {self.b_hi}]")

    @property
    def is_ball(self) -> bool:
        return self.b_lo == 0


def _exp_weight(rate: float):
    return lambda t: math.exp(rate * t)


@dataclass(frozen=True)
class FlowParams:
    """alpha, beta, weight w(t) and the Hessian constant C.

    ``weight_rate`` is w'/w when known in closed form; otherwise it is
    obtained by differentiating log w numerically.
    """

    alpha: float
    beta: float
    c_const: float
    weight: Callable[[float], float] = field(default=lambda t: 1.0, compare=False)
    weight_rate: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.beta < 0:
            raise InadmissibleParams(f"beta must be >= 0, got {self.beta}")

    @classmethod
    def exponential(cls, alpha, beta, c_const, rate) -> "FlowParams":
        """Weight w(t) = exp(rate t)."""
        return cls(alpha, beta, c_const, _exp_weight(rate), lambda t: rate)

    def rate(self, t: float) -> float:
        if self.weight_rate is not None:
            return float(self.weight_rate(t))
        return numerics.derive(lambda s: math.log(self.weight(s)), t, 1e-2)


def check_admissible(n: int, domain: FlowDomain, alpha: float, beta: float) -> list[str]:
    """Validate (alpha, beta) against the domain; returns notes."""
    if beta < 0:
        raise InadmissibleParams(f"beta must be >= 0, got {beta}")
    if alpha + beta < n:
        raise InadmissibleParams(f"alpha + beta = {alpha + beta} < n = {n}")
    if domain.is_ball and alpha >= n:
        raise DivergentAtPole(f"alpha = {alpha} >= n = {n}: b^-alpha is not integrable at the pole")
    if alpha > n:
        return [f"alpha = {alpha} > n: the monotonicity argument is written for alpha <= n; annulus evaluated anyway"]
    return []


# flow ---------------------------------------------------------------------


def _speed_log(profile: GreenProfile, sign: float):
    def rhs(_t, u):
        r = math.exp(u)
        return sign * profile.b2_prime(r) / r

    return rhs


def flow_radius(profile: GreenProfile, r0: float, t: float) -> float:
    """Phi_t applied to radius r0: solves dr/dt = (b^2)'(r) in u = log r."""
    if not r0 > 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    t = float(t)
    if t == 0:
        return float(r0)
    sign = 1.0 if t > 0 else -1.0
    u = numerics.solve_ode(_speed_log(profile, sign), math.log(r0), [0.0, abs(t)], FLOW_TOL)
    return math.exp(u[-1])


def flow_radii(profile: GreenProfile, r0: float, times) -> np.ndarray:
    """Phi_t(r0) for many t with one forward and one backward solve."""
    times = np.asarray(times, dtype=float)
    out = np.empty_like(times)
    zero = times == 0
    out[zero] = r0
    for sign in (1.0, -1.0):
        sel = sign * times > 0
        if not sel.any():
            continue
        ts = np.unique(sign * times[sel])
        u = numerics.solve_ode(_speed_log(profile, sign), math.log(r0), np.concatenate([[0.0], ts]), FLOW_TOL)
        lookup = dict(zip(ts, np.exp(u[1:])))
        out[sel] = [lookup[v] for v in sign * times[sel]]
    return out


@functools.lru_cache(maxsize=64)
def _boundary_radii(profile: GreenProfile, domain: FlowDomain, times: tuple) -> tuple[np.ndarray, np.ndarray]:
    hi0 = level_radius(profile, domain.b_hi).rho
    hi = flow_radii(profile, hi0, times)
    if domain.is_ball:
        lo = np.zeros_like(hi)
    else:
        lo = flow_radii(profile, level_radius(profile, domain.b_lo).rho, times)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def _shell_integrals(profile: GreenProfile, domain: FlowDomain, alpha: float, beta: float, times) -> np.ndarray:
    """cross_volume * int_{rho_lo(t)}^{rho_hi(t)} b^-alpha |b'|^beta f^(n-1) dr (no weight)."""
    times = tuple(float(t) for t in times)
    lo, hi = _boundary_radii(profile, domain, times)
    n = profile.n
    f = profile.spec.warping.eval_f

    def integrand(s):
        st = profile.sample(s)
        return st.b ** (-alpha) * st.b1**beta * f(s) ** (n - 1)

    if domain.is_ball:
        F_hi = cumulative_radial_integral(profile, integrand, hi, pole_exponent=n - 1 - alpha)
        vals = F_hi
    else:
        F = cumulative_radial_integral(profile, integrand, np.concatenate([lo, hi]), from_zero=False)
        vals = F[len(times) :] - F[: len(times)]
    return profile.spec.cross_volume * vals


def v_beta(profile: GreenProfile, domain: FlowDomain, params: FlowParams, t: float) -> float:
    if domain.is_ball and params.alpha >= profile.n:
        raise DivergentAtPole(f"alpha = {params.alpha} >= n = {profile.n} on a ball domain")
    return params.weight(t) * _shell_integrals(profile, domain, params.alpha, params.beta, [t])[0]


# series -------------------------------------------------------------------


class _Sampled:
    """Values of a time series on the grid and on Richardson stencils."""

    def __init__(self, t_grid, h0, levels=5):
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.h0 = h0
        self.levels = levels
        pts = list(self.t_grid)
        for t in self.t_grid:
            pts.extend(numerics.derivative_points(float(t), h0, levels))
        self.times = np.unique(np.array(pts))

    def attach(self, values) -> "_Sampled":
        self.lookup = dict(zip(self.times.tolist(), np.asarray(values, dtype=float).tolist()))
        return self

    def values(self) -> np.ndarray:
        return np.array([self.lookup[float(t)] for t in self.t_grid])

    def slopes(self) -> np.ndarray:
        return np.array([numerics.derive(self.lookup.__getitem__, float(t), self.h0, levels=self.levels) for t in self.t_grid])


def _grid_step(t_grid) -> float:
    t = np.asarray(t_grid, dtype=float)
    return 0.5 * float(np.min(np.diff(t))) if t.size > 1 else 0.025


def resolve_c(profile: GreenProfile) -> float:
    verdict = assumption_constant(profile)
    if not verdict.holds or not math.isfinite(verdict.constant_c):
        raise AssumptionFails(f"no finite Hessian bound on {profile.spec.label}")
    return verdict.constant_c


def _weighted_series(profile, domain, params: FlowParams, t_grid, notes) -> MonotoneSeries:
    samp = _Sampled(t_grid, _grid_step(t_grid))
    shell = _shell_integrals(profile, domain, params.alpha, params.beta, samp.times)
    weights = np.array([params.weight(float(t)) for t in samp.times])
    samp.attach(weights * shell)
    return MonotoneSeries.build(samp.t_grid, samp.values(), samp.slopes(), MONO_TOL, notes)


def thm_1_3_series(profile: GreenProfile, domain: FlowDomain, alpha: float, beta: float, t_grid=None, c_const=None) -> MonotoneSeries:
    """exp(-C beta t) times the flowed integral of b^-alpha |grad b|^beta."""
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    notes = check_admissible(profile.n, domain, alpha, beta)
    C = resolve_c(profile) if c_const is None else float(c_const)
    params = FlowParams.exponential(alpha, beta, C, -C * beta)
    return _weighted_series(profile, domain, params, t_grid, notes)


def check_weight_ratio(params: FlowParams, t_grid, tol=1e-12) -> None:
    bound = -params.c_const * params.beta
    for t in np.asarray(t_grid, dtype=float):
        rate = params.rate(float(t))
        if rate > bound + tol * (1 + abs(bound)):
            raise WeightRatioViolated(f"w'/w = {rate:.6g} > -C beta = {bound:.6g} at t = {t:.6g}", float(t))


def thm_1_4_series(profile: GreenProfile, domain: FlowDomain, params: FlowParams, t_grid=None) -> MonotoneSeries:
    """w(t) times the flowed integral, for weights with w'/w <= -C beta."""
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    notes = check_admissible(profile.n, domain, params.alpha, params.beta)
    check_weight_ratio(params, t_grid)
    return _weighted_series(profile, domain, params, t_grid, notes)


def proof_inequality_check(profile: GreenProfile, domain: FlowDomain, params: FlowParams, t_grid=None, tol=1e-6) -> CheckReport:
    """dV_beta/dt <= (beta C + w'/w) V_beta + 2 (n - alpha - beta) V_{beta+2} on the grid."""
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    n = profile.n
    notes = check_admissible(n, domain, params.alpha, params.beta)
    trace = trace_identity_check(profile)
    notes.append(f"trace identity Lap b^2 = 2n|grad b|^2: max residual {trace.max_violation:.3e}")
    samp = _Sampled(t_grid, _grid_step(t_grid))
    weights = np.array([params.weight(float(t)) for t in samp.times])
    v0 = weights * _shell_integrals(profile, domain, params.alpha, params.beta, samp.times)
    v2 = weights * _shell_integrals(profile, domain, params.alpha, params.beta + 2, samp.times)
    samp.attach(v0)
    slope = samp.slopes()
    V = samp.values()
    V2 = np.array([dict(zip(samp.times.tolist(), v2.tolist()))[float(t)] for t in samp.t_grid])
    rate = np.array([params.rate(float(t)) for t in samp.t_grid])
    coef = params.beta * params.c_const + rate
    bound = coef * V + 2 * (n - params.alpha - params.beta) * V2
    scale = 1 + np.abs(slope) + np.abs(coef * V) + np.abs(2 * (n - params.alpha - params.beta) * V2)
    violation = (slope - bound) / scale
    table = Table.from_columns(t=samp.t_grid, value=V, slope=slope, bound_rhs=bound, violation=violation)
    rep = report_from_residuals("proof_ineq", samp.t_grid, violation, tol, notes, table)
    if not trace.verdict:
        rep.verdict = False
        rep.notes.append("trace identity failed in the Green profile")
    rep.extras["max_abs_gap"] = float(np.max(np.abs(violation)))
    return rep
