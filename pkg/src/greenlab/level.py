"""Level and sublevel sets of b: A(r), V(r), the Dirichlet identity and friends.

Everything here is radial: {b = r} is the sphere of geodesic radius rho
with b(rho) = r, so level-set integrals reduce to the area
cross_volume * f(rho)^(n-1) times a constant integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .curvature import CurvatureProfile, check_thm_1_2_hypotheses
from .errors import AssumptionFails, HypothesisNotMet, OutOfRange, TailDivergence
from .green import GreenProfile, radial_integral
from .manifold import log_grid
from .numerics import Tolerance
from .results import CheckReport, MonotoneSeries, Table, report_from_residuals

THM11_GRID = (0.1, 10.0, 10)
THM15_GRID = (0.1, 10.0, 41)
DIRICHLET_GRID = (1e-2, 1e1, 31)
GRADIENT_GRID = (1e-3, 1e3, 121)
TAIL_SHARE = 0.01
# levels may sit past r_max on the profile's power-law extension; slowly
# growing b (sublinear warpings) needs this for moderate levels
LEVEL_REACH = 1e6


@dataclass(frozen=True)
class LevelGeometry:
    r_level: float
    rho: float
    area: float
    grad_at: float


def level_radius(profile: GreenProfile, r_level: float) -> LevelGeometry:
    """Solve b(rho) = r_level for rho in [r_min, LEVEL_REACH * r_max]."""
    r_level = float(r_level)
    r_top = LEVEL_REACH * profile.r_max
    lo_b, hi_b = profile.b(profile.r_min), profile.b(r_top)
    if not lo_b <= r_level <= hi_b:
        raise OutOfRange(f"level {r_level!r} outside b-range [{lo_b:.6g}, {hi_b:.6g}] of {profile.spec.label}")
    target = math.log(r_level)
    u = numerics.find_root(
        lambda x: math.log(profile.b(math.exp(x))) - target,
        math.log(profile.r_min),
        math.log(r_top),
    )
    rho = math.exp(u)
    f = float(profile.spec.warping.eval_f(np.array([rho]))[0])
    area = profile.spec.cross_volume * f ** (profile.n - 1)
    return LevelGeometry(r_level, rho, area, profile.grad_b(rho))


def a_of_r(profile: GreenProfile, r: float) -> float:
    """r^(1-n) times the integral of |grad b|^3 over {b = r}."""
    geo = level_radius(profile, r)
    return r ** (1 - profile.n) * geo.area * geo.grad_at**3


def _sublevel(profile: GreenProfile, r: float, power: int) -> float:
    geo = level_radius(profile, r)
    n = profile.n
    f = profile.spec.warping.eval_f

    def integrand(s):
        return np.asarray(profile.grad_b(s)) ** power * f(s) ** (n - 1)

    return profile.spec.cross_volume * radial_integral(profile, integrand, 0.0, geo.rho, pole_exponent=n - 1)


def v_of_r(profile: GreenProfile, r: float) -> float:
    """Integral of |grad b|^4 over {b <= r}."""
    return _sublevel(profile, r, 4)


def v_prime_of_r(profile: GreenProfile, r: float) -> float:
    """Coarea: V'(r) is the integral of |grad b|^3 over {b = r}."""
    geo = level_radius(profile, r)
    return geo.area * geo.grad_at**3


def dirichlet_energy(profile: GreenProfile, r: float) -> float:
    return _sublevel(profile, r, 2)


def _tail_exponent(profile: GreenProfile) -> float:
    """Decay rate of the A' integrand when f ~ r^alpha at infinity."""
    n, alpha = profile.n, profile.spec.warping.alpha
    gamma = (alpha * (n - 1) - 1) / (n - 2)
    return 3.0 + gamma * (n - 4)


def a_prime_rhs(profile: GreenProfile, r: float, curv: CurvatureProfile) -> float:
    """Closed-form side of the A' identity, reduced to one radial integral.

    Uses the traceless Hessian norm (lam_rad - T)^2 + (n-1)(lam_tan - T)^2
    and Ric(grad b^2, grad b^2) = ric_rad (b^2)'^2 since grad b^2 is radial.
    The tail past the split point is closed with the power law implied by alpha.
    """
    n = profile.n
    geo = level_radius(profile, r)
    f = profile.spec.warping.eval_f

    def parts(s):
        lr, lt = profile.eigenvalues(s)
        T = (lr + (n - 1) * lt) / n
        traceless = (lr - T) ** 2 + (n - 1) * (lt - T) ** 2
        speed2 = np.asarray(profile.b2_prime(s)) ** 2
        ric = np.asarray(curv.ric_rad(s))
        weight = np.asarray(profile.b(s)) ** (2 - 2 * n) * f(s) ** (n - 1)
        size = lr**2 + (n - 1) * lt**2 + np.abs(ric) * speed2
        return (traceless + ric * speed2) * weight, size * weight

    integrand = lambda s: parts(s)[0]
    # split three decades past the level at least; beyond r_max the profile
    # runs on its power-law extension
    R = max(profile.r_max, 1e3 * geo.rho)
    # the traceless part cancels to roundoff on flat and conical pieces, so
    # the absolute tolerance is pegged to the uncancelled magnitude
    scale = radial_integral(profile, lambda s: parts(s)[1], geo.rho, R, tol=Tolerance(rel=1e-6, abs=1e-300))
    tol = Tolerance(rel=1e-12, abs=max(1e-14 * scale, 1e-300))
    partial = radial_integral(profile, integrand, geo.rho, R, tol=tol)
    p = _tail_exponent(profile)
    if not p > 1:
        raise TailDivergence(f"tail exponent {p:.3g} <= 1 on {profile.spec.label}")
    remainder = abs(float(integrand(np.array([R]))[0])) * R / (p - 1)
    if remainder > TAIL_SHARE * abs(partial) + 1e-12 * scale:
        raise TailDivergence(f"tail remainder {remainder:.3e} exceeds {TAIL_SHARE:.0%} of the partial integral {partial:.3e}")
    return -(r ** (n - 3)) / 2 * profile.spec.cross_volume * (partial + remainder)


def a_prime_identity_check(profile: GreenProfile, r: float, curv: CurvatureProfile, tol=1e-4) -> CheckReport:
    lhs = numerics.derive(lambda x: a_of_r(profile, x), r, 0.05 * r)
    rhs = a_prime_rhs(profile, r, curv)
    gap = abs(lhs - rhs) / (1 + abs(rhs))
    return CheckReport(
        "thm11_identity",
        gap <= tol,
        gap,
        r,
        tol,
        ["Ric(grad b^2, grad b^2) evaluated as ric_rad * (b^2)'^2 (radial gradient)"],
        extras={"lhs": lhs, "rhs": rhs},
    )


def thm11_identity_check(profile: GreenProfile, curv: CurvatureProfile, r_grid=None, tol=1e-4) -> CheckReport:
    r = log_grid(*THM11_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    lhs, rhs, res = [], [], []
    for x in r:
        rep = a_prime_identity_check(profile, float(x), curv, tol)
        lhs.append(rep.extras["lhs"])
        rhs.append(rep.extras["rhs"])
        res.append(rep.max_violation)
    A = [a_of_r(profile, float(x)) for x in r]
    table = Table.from_columns(r=r, A=A, A_slope=lhs, A_rhs=rhs, residual=res)
    out = report_from_residuals("thm11_identity", r, res, tol, table=table)
    out.extras["max_abs_side"] = float(max(np.max(np.abs(lhs)), np.max(np.abs(rhs))))
    return out


def thm11_series(profile: GreenProfile, curv: CurvatureProfile | None = None, r_grid=None, tol=1e-6) -> MonotoneSeries:
    """A(r) with Richardson slopes; monotonicity is asserted only when Ric >= 0."""
    r = log_grid(*THM11_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    A = np.array([a_of_r(profile, float(x)) for x in r])
    slopes = np.array([numerics.derive(lambda x: a_of_r(profile, x), float(x), 0.05 * x) for x in r])
    curv = curv or CurvatureProfile(profile.spec)
    notes = []
    if not check_thm_1_2_hypotheses(curv).ricci_nonneg:
        notes.append("Ric >= 0 fails: monotonicity of A is not asserted for this entry")
    return MonotoneSeries.build(r, A, slopes, tol, notes)


def thm_1_5_series(profile: GreenProfile, c_const: float, r_grid=None, tol=1e-6) -> MonotoneSeries:
    """Q(r) = r^(2-n) V(r) - C |S^(n-1)| r^2 / (2n), plus the pointwise bound behind it."""
    if not math.isfinite(c_const):
        raise AssumptionFails(f"no finite Hessian bound on {profile.spec.label}")
    r = log_grid(*THM15_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    n, S = profile.n, profile.sphere_area

    def Q(x):
        return x ** (2 - n) * v_of_r(profile, x) - c_const * S * x * x / (2 * n)

    values = np.array([Q(float(x)) for x in r])
    slopes = np.array([numerics.derive(Q, float(x), 0.05 * x) for x in r])
    series = MonotoneSeries.build(r, values, slopes, tol)

    # r V' <= (C |S| / n) r^n + (n - 2) V
    V = np.array([v_of_r(profile, float(x)) for x in r])
    Vp = np.array([v_prime_of_r(profile, float(x)) for x in r])
    lhs = r * Vp
    rhs = c_const * S / n * r**n + (n - 2) * V
    res = (lhs - rhs) / (1 + np.abs(lhs) + np.abs(rhs))
    table = Table.from_columns(r=r, lhs=lhs, rhs=rhs, residual=res)
    series.checks["volume_slope_bound"] = report_from_residuals("volume_slope_bound", r, res, tol, table=table)
    return series


def coarea_check(profile: GreenProfile, r_grid=None, tol=1e-6) -> CheckReport:
    r = log_grid(*THM15_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    d = np.array([numerics.derive(lambda x: v_of_r(profile, x), float(x), 0.05 * x) for x in r])
    vp = np.array([v_prime_of_r(profile, float(x)) for x in r])
    res = np.abs(d - vp) / np.abs(vp)
    return report_from_residuals("coarea", r, res, tol, table=Table.from_columns(r=r, V_slope=d, V_prime=vp))


def dirichlet_identity_check(profile: GreenProfile, r_grid=None, tol=1e-6) -> CheckReport:
    """Integral of |grad b|^2 over {b <= r} against |S^(n-1)| r^n / n."""
    r = log_grid(*DIRICHLET_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    n, S = profile.n, profile.sphere_area
    energy = np.array([dirichlet_energy(profile, float(x)) for x in r])
    exact = S * r**n / n
    dev = np.abs(energy - exact) / exact
    table = Table.from_columns(r=r, energy=energy, exact=exact, dirichlet_dev=dev)
    return report_from_residuals("dirichlet", r, dev, tol, table=table)


def remark_3_1_check(profile: GreenProfile, c_const: float, r_grid=None, tol=1e-8) -> CheckReport:
    """V(r) <= C |S^(n-1)| r^n / (2n); extras record whether equality holds on the grid."""
    r = log_grid(*THM15_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    n, S = profile.n, profile.sphere_area
    V = np.array([v_of_r(profile, float(x)) for x in r])
    bound = c_const * S * r**n / (2 * n)
    res = (V - bound) / bound
    rep = report_from_residuals("remark31", r, res, tol, table=Table.from_columns(r=r, V=V, bound=bound, residual=res))
    gap = float(np.max(np.abs(res)))
    rep.extras["max_relative_gap"] = gap
    rep.extras["equality"] = bool(gap <= tol)
    return rep


def gradient_estimate_check(profile: GreenProfile, curv: CurvatureProfile, r_grid=None, tol=1e-9) -> CheckReport:
    """|grad b| <= 1; extras record whether the supremum 1 is attained to 1e-6."""
    hyp = check_thm_1_2_hypotheses(curv)
    if not hyp.ricci_nonneg:
        raise HypothesisNotMet(f"Ric >= 0 fails on {profile.spec.label}; gradient estimate not applicable")
    r = log_grid(*GRADIENT_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    grad = np.asarray(profile.grad_b(r))
    rep = report_from_residuals("gradient_estimate", r, grad - 1.0, tol, table=Table.from_columns(r=r, grad_b=grad))
    sup = float(np.max(grad))
    rep.extras["sup_grad_b"] = sup
    rep.extras["sup_attained"] = bool(abs(sup - 1.0) <= 1e-6)
    return rep
