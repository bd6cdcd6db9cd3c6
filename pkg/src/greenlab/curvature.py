"""Curvature of dr^2 + f^2 g_N with g_N of constant curvature kappa.

Closed forms:
    radial planes      k_rad = -f''/f
    tangential planes  k_tan = (kappa - f'^2) / f^2
    Ric(dr, dr)        rho_1 = (n-1) k_rad
    Ric on tangents    rho_2 = k_rad + (n-2) k_tan
    |grad Ric|^2       rho_1'^2 + (n-1) rho_2'^2 + 2(n-1)(rho_1 - rho_2)^2 (f'/f)^2

The last line comes from Gamma^r_ij = -f f' g_N and Gamma^i_rj = (f'/f) delta;
it is checked at build time against a coordinate computation in
hyperspherical charts with nested Richardson differences of the metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import CurvatureAuditError
from .manifold import ManifoldSpec, log_grid
from .results import Table

HYPOTHESIS_GRID = (1e-3, 1e3, 121)
TAIL_GRID = (10.0, 1e3, 41)
AUDIT_RADII = (0.05, 20.0, 10)
SLACK = 1e-9
AUDIT_RTOL = 1e-5


class CurvatureProfile:
    """Radial curvature curves; every evaluator is vectorized and pure."""

    def __init__(self, spec: ManifoldSpec, cross_curvature: float = 1.0):
        if not cross_curvature > 0:
            raise ValueError(f"cross-section curvature must be positive, got {cross_curvature}")
        self.spec = spec
        self.n = spec.n
        self.kappa = float(cross_curvature)
        w = spec.warping
        self._f, self._f1, self._f2 = w.eval_f, w.eval_f1, w.eval_f2
        self._f3 = w.eval_f3

    def _f3_at(self, r: np.ndarray) -> np.ndarray:
        if self._f3 is not None:
            return np.asarray(self._f3(r), dtype=float)
        f2 = lambda x: float(self._f2(np.array([x]))[0])
        return np.array([numerics.derive(f2, float(x), 0.01 * float(x)) for x in r])

    def _arr(self, r):
        return np.atleast_1d(np.asarray(r, dtype=float))

    def _ret(self, r, arr):
        return float(arr[0]) if np.ndim(r) == 0 else arr.reshape(np.shape(r))

    def k_rad(self, r):
        x = self._arr(r)
        return self._ret(r, -self._f2(x) / self._f(x))

    def k_tan(self, r):
        x = self._arr(r)
        f = self._f(x)
        return self._ret(r, (self.kappa - self._f1(x) ** 2) / f**2)

    def ric_rad(self, r):
        return (self.n - 1) * self.k_rad(r)

    def ric_tan(self, r):
        return self.k_rad(r) + (self.n - 2) * self.k_tan(r)

    def rm_norm(self, r):
        """|Rm| with the full-tensor convention sum R_ijkl^2."""
        n = self.n
        kr, kt = np.asarray(self.k_rad(r)), np.asarray(self.k_tan(r))
        val = np.sqrt(4.0 * ((n - 1) * kr**2 + 0.5 * (n - 1) * (n - 2) * kt**2))
        return float(val) if np.ndim(r) == 0 else val

    def ric_derivatives(self, r):
        """(rho_1', rho_2') in closed form from f, f', f'', f'''."""
        x = self._arr(r)
        n, kappa = self.n, self.kappa
        f, f1, f2, f3 = self._f(x), self._f1(x), self._f2(x), self._f3_at(x)
        dk_rad = -(f3 * f - f2 * f1) / f**2
        dk_tan = -2.0 * f1 * f2 / f**2 - 2.0 * (kappa - f1**2) * f1 / f**3
        return (n - 1) * dk_rad, dk_rad + (n - 2) * dk_tan

    def nabla_ric_norm(self, r):
        x = self._arr(r)
        n = self.n
        d1, d2 = self.ric_derivatives(x)
        rho1 = (n - 1) * (-self._f2(x) / self._f(x))
        rho2 = np.asarray(self.ric_tan(x))
        mean_curv = self._f1(x) / self._f(x)
        sq = d1**2 + (n - 1) * d2**2 + 2.0 * (n - 1) * (rho1 - rho2) ** 2 * mean_curv**2
        return self._ret(r, np.sqrt(sq))

    def table(self, r_grid) -> Table:
        r = np.asarray(r_grid, dtype=float)
        return Table.from_columns(
            r=r,
            k_rad=self.k_rad(r),
            k_tan=self.k_tan(r),
            ric_rad=self.ric_rad(r),
            ric_tan=self.ric_tan(r),
            nabla_ric_norm=self.nabla_ric_norm(r),
        )


# coordinate oracle ------------------------------------------------------


def _richardson(fn, x: np.ndarray, steps: np.ndarray, levels: int = 3) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at points ``x`` (shape (..., d)).

    ``steps`` has the shape of ``x``. Returns shape (..., d, *out) with the
    derivative direction inserted after the point axes.
    """
    d = x.shape[-1]
    eye = np.eye(d)
    # stack all shifted points so fn is called once
    shifts = []
    for lev in range(levels):
        h = steps / 2**lev
        for sign in (1.0, -1.0):
            shifts.append(x[..., None, :] + sign * h[..., None, :] * eye)
    vals = fn(np.stack(shifts, axis=0))  # (2*levels, ..., d, *out)
    extra = vals.ndim - 1 - x.ndim
    tab = []
    for lev in range(levels):
        h = steps / 2**lev
        h = h.reshape(h.shape + (1,) * extra)
        tab.append((vals[2 * lev] - vals[2 * lev + 1]) / (2.0 * h))
    for j in range(1, levels):
        fac = 4.0**j
        tab = [(fac * tab[i + 1] - tab[i]) / (fac - 1.0) for i in range(len(tab) - 1)]
    return tab[0]


class _CoordinateOracle:
    """Ricci and grad Ric of the warped metric in hyperspherical coordinates."""

    def __init__(self, prof: CurvatureProfile):
        self.n = prof.n
        self.kappa = prof.kappa
        self.f = prof._f

    def metric(self, x):
        r = x[..., 0]
        f2 = self.f(r) ** 2 / self.kappa
        comps = [np.ones_like(r)]
        sin_prod = np.ones_like(r)
        for i in range(1, self.n):
            comps.append(f2 * sin_prod)
            sin_prod = sin_prod * np.sin(x[..., i]) ** 2
        return np.stack(comps, axis=-1)

    def steps(self, x):
        h = np.full_like(x, 1e-2)
        h[..., 0] = 0.005 * x[..., 0]
        return h

    def christoffel(self, x):
        """Gamma[..., a, b, c] = Gamma^a_bc for a diagonal metric."""
        g = self.metric(x)
        dg = _richardson(self.metric, x, self.steps(x))  # [..., d, a] = d_d g_aa
        n = self.n
        eye = np.eye(n)
        inv = 0.5 / g
        # 1/2 g^aa (d_b g_ac + d_c g_ab - d_a g_bc)
        t1 = np.einsum("...ba,ac->...abc", dg, eye)
        t2 = np.einsum("...ca,ab->...abc", dg, eye)
        t3 = np.einsum("...ab,bc->...abc", dg, eye)
        return inv[..., :, None, None] * (t1 + t2 - t3)

    def ricci(self, x):
        gam = self.christoffel(x)
        dgam = _richardson(self.christoffel, x, self.steps(x))  # [..., e, a, b, c] = d_e Gamma^a_bc
        # R_bd = d_a Gamma^a_db - d_d Gamma^a_ab + Gamma^a_ae Gamma^e_db - Gamma^a_de Gamma^e_ab
        term1 = np.einsum("...aadb->...db", dgam)
        term2 = np.einsum("...daab->...db", dgam)
        term3 = np.einsum("...aae,...edb->...db", gam, gam)
        term4 = np.einsum("...ade,...eab->...db", gam, gam)
        return term1 - term2 + term3 - term4

    def nabla_ric_norm(self, x):
        ric = self.ricci(x)
        gam = self.christoffel(x)
        dric = _richardson(self.ricci, x, self.steps(x))  # [..., i, j, k]
        cov = (
            dric
            - np.einsum("...mij,...mk->...ijk", gam, ric)
            - np.einsum("...mik,...jm->...ijk", gam, ric)
        )
        ginv = 1.0 / self.metric(x)
        sq = np.einsum("...ijk,...i,...j,...k->...", cov**2, ginv, ginv, ginv)
        return np.sqrt(np.maximum(sq, 0.0)), ric, ginv


def audit_curvature(prof: CurvatureProfile, radii=None) -> float:
    """Largest scaled gap between closed forms and the coordinate oracle."""
    r = log_grid(*AUDIT_RADII) if radii is None else np.asarray(radii, dtype=float)
    n = prof.n
    x = np.empty((r.size, n))
    x[:, 0] = r
    x[:, 1:] = 1.0 + 0.1 * np.arange(1, n)
    oracle = _CoordinateOracle(prof)
    nab, ric, ginv = oracle.nabla_ric_norm(x)
    # coordinate Christoffel products are of size r^-2 and cancel in flat
    # directions, so gaps are measured against |Rm| + r^-2
    rm_scale = prof.rm_norm(r) + r**-2.0
    closed_nab = prof.nabla_ric_norm(r)
    gap = np.abs(nab - closed_nab) / (np.abs(closed_nab) + rm_scale / r)
    worst = float(np.max(gap))
    # mixed Ricci eigenvalues: R^r_r and R^i_i (i tangential)
    gap_rad = np.abs(ric[:, 0, 0] * ginv[:, 0] - prof.ric_rad(r)) / rm_scale
    gap_tan = np.abs(ric[:, 1, 1] * ginv[:, 1] - prof.ric_tan(r)) / rm_scale
    return max(worst, float(np.max(gap_rad)), float(np.max(gap_tan)))


def build_curvature(spec: ManifoldSpec, cross_curvature: float = 1.0, *, audit: bool = True) -> CurvatureProfile:
    prof = CurvatureProfile(spec, cross_curvature)
    if audit:
        gap = audit_curvature(prof)
        if not gap <= AUDIT_RTOL:
            raise CurvatureAuditError(f"closed-form curvature disagrees with the coordinate oracle: {gap:.3e}")
    return prof


@dataclass
class HypothesisReport:
    radial_curvature_nonneg: bool
    ricci_nonneg: bool
    parallel_ricci: bool
    rm_decay_K: float | None
    nabla_ric_decay_L: float | None
    notes: list[str] = field(default_factory=list)
    rm_tail_slope: float = math.nan  # log-log slope of r^2 |Rm| on the tail grid
    nabla_ric_tail_slope: float = math.nan

    @property
    def decay_verdict(self) -> bool:
        """Both decay constants finite and the scaled norms not growing on the tail."""
        return (
            self.rm_decay_K is not None
            and self.nabla_ric_decay_L is not None
            and self.rm_tail_slope <= 1e-3
            and self.nabla_ric_tail_slope <= 1e-3
        )


def _tail_slope(r, vals) -> float:
    vals = np.asarray(vals)
    if np.all(vals <= 1e-300):
        return 0.0
    ok = vals > 1e-300
    if ok.sum() < 3:
        return math.nan
    return float(np.polyfit(np.log(r[ok]), np.log(vals[ok]), 1)[0])


def check_thm_1_2_hypotheses(profile: CurvatureProfile, r_grid=None, tail_grid=None) -> HypothesisReport:
    """Grid certification of the hypotheses, with slack SLACK (1 + r^-2).

    The slack is measured in units of the curvature scale r^-2 so that
    roundoff in kappa - f'^2 near the pole does not flip a flag.
    """
    r = log_grid(*HYPOTHESIS_GRID) if r_grid is None else np.asarray(r_grid, dtype=float)
    rt = log_grid(*TAIL_GRID) if tail_grid is None else np.asarray(tail_grid, dtype=float)
    slack = SLACK * (1.0 + r**-2)
    kr = np.asarray(profile.k_rad(r))
    radial_ok = bool(np.all(kr >= -slack))
    ricci_ok = bool(np.all(profile.ric_rad(r) >= -slack) and np.all(profile.ric_tan(r) >= -slack))
    nab = np.asarray(profile.nabla_ric_norm(r))
    parallel = bool(np.all(nab <= SLACK * (1.0 + r**-3)))
    scaled_rm = rt**2 * np.asarray(profile.rm_norm(rt))
    scaled_nab = rt**3 * np.asarray(profile.nabla_ric_norm(rt))
    K = float(np.max(scaled_rm)) if np.all(np.isfinite(scaled_rm)) else None
    L = float(np.max(scaled_nab)) if np.all(np.isfinite(scaled_nab)) else None
    notes = []
    rm_slope = _tail_slope(rt, scaled_rm)
    nab_slope = _tail_slope(rt, scaled_nab)
    if rm_slope > 1e-3 or nab_slope > 1e-3:
        notes.append(
            f"r^2|Rm| and r^3|grad Ric| grow on the tail grid (slopes {rm_slope:.3g}, {nab_slope:.3g}); "
            "K and L are grid suprema only"
        )
    return HypothesisReport(radial_ok, ricci_ok, parallel, K, L, notes, rm_slope, nab_slope)


def ricci_nonneg(spec: ManifoldSpec, r_grid=None) -> bool:
    return check_thm_1_2_hypotheses(CurvatureProfile(spec), r_grid).ricci_nonneg
