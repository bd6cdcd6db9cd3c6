"""Config-driven runs: parse a JSON config, run checks, write CSV/JSON/gnuplot."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, curvature, flow, green, level
from .errors import AssumptionFails, BadGrid, ConfigError, GreenlabError, ParseError, UnknownCheck
from .manifold import CATALOG_IDS, from_config, validate
from .results import CheckReport, Table, report_from_residuals

log = logging.getLogger(__name__)

CHECK_IDS = (
    "validate",
    "assumption",
    "h_oracle",
    "hess_decay",
    "curvature_hypotheses",
    "thm11",
    "thm11_identity",
    "thm13",
    "thm14",
    "proof_ineq",
    "thm15",
    "dirichlet",
    "remark31",
    "gradient_estimate",
    "lemma22",
    "trace_identity",
)
FORMATS = ("csv", "json", "both")


@dataclass
class GridSpec:
    lo: float
    hi: float
    num: int
    spacing: str = "log"
    points: tuple | None = None

    def values(self) -> np.ndarray:
        if self.points is not None:
            return np.array(self.points, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.num)
        return np.linspace(self.lo, self.hi, self.num)

    def echo(self):
        if self.points is not None:
            return list(self.points)
        return {"lo": self.lo, "hi": self.hi, "num": self.num, "spacing": self.spacing}


@dataclass
class FlowConfig:
    b_lo: float = 0.0
    b_hi: float = 1.0
    pairs: list | None = None  # None: the default six-pair sweep
    extra_decay: float = 1.0  # thm14 weight exp(-(C beta + extra_decay) t)


@dataclass
class RunConfig:
    manifolds: list[dict]
    checks: list[str]
    r_grid: GridSpec | None = None
    t_grid: GridSpec | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    output_dir: str = "greenlab_out"
    format: str = "both"
    flow: FlowConfig = field(default_factory=FlowConfig)
    raw: dict = field(default_factory=dict)


def _grid(value, path: str, *, positive: bool) -> GridSpec:
    if isinstance(value, list):
        try:
            pts = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise BadGrid(f"{path}: grid points must be numbers") from None
        if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise BadGrid(f"{path}: grid must have at least two strictly increasing points")
        if positive and pts[0] <= 0:
            raise BadGrid(f"{path}: radii must be positive")
        return GridSpec(pts[0], pts[-1], len(pts), "list", pts)
    if not isinstance(value, dict):
        raise BadGrid(f"{path}: expected a list of points or {{lo, hi, num, spacing}}")
    try:
        lo, hi, num = float(value["lo"]), float(value["hi"]), int(value["num"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadGrid(f"{path}: {exc}") from None
    spacing = value.get("spacing", "log" if positive else "linear")
    if spacing not in ("log", "linear"):
        raise BadGrid(f"{path}.spacing: expected 'log' or 'linear', got {spacing!r}")
    if num < 2 or not hi > lo:
        raise BadGrid(f"{path}: need num >= 2 and hi > lo")
    if (positive or spacing == "log") and lo <= 0:
        raise BadGrid(f"{path}.lo: must be positive")
    return GridSpec(lo, hi, num, spacing)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}: expected a number, got {value!r}")
    return float(value)


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError("$: top level must be a JSON object")
    known = {"manifold", "manifolds", "checks", "grids", "tolerances", "output_dir", "format", "flow"}
    for key in raw:
        if key not in known:
            raise ParseError(f"$.{key}: unknown field")

    checks = raw.get("checks", ["validate", "assumption"])
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise ParseError("$.checks: expected a list of check ids")
    for i, c in enumerate(checks):
        if c not in CHECK_IDS:
            raise UnknownCheck(f"$.checks[{i}]: unknown check id {c!r}")
    if len(set(checks)) != len(checks):
        raise ParseError("$.checks: duplicate check id")

    if "manifold" in raw and "manifolds" in raw:
        raise ParseError("$: give either 'manifold' or 'manifolds', not both")
    if "manifolds" in raw:
        manifolds = raw["manifolds"]
        if not isinstance(manifolds, list) or not manifolds:
            raise ParseError("$.manifolds: expected a nonempty list")
        where = [f"$.manifolds[{i}]" for i in range(len(manifolds))]
    elif "manifold" in raw:
        manifolds, where = [raw["manifold"]], ["$.manifold"]
    else:
        raise ParseError("$.manifold: missing")
    for m, path in zip(manifolds, where):
        if not isinstance(m, dict):
            raise ParseError(f"{path}: expected an object")
        if m.get("type") not in CATALOG_IDS:
            raise ParseError(f"{path}.type: expected one of {list(CATALOG_IDS)}, got {m.get('type')!r}")
        if "n" not in m:
            raise ParseError(f"{path}.n: missing")

    grids = raw.get("grids", {})
    if not isinstance(grids, dict):
        raise ParseError("$.grids: expected an object")
    for key in grids:
        if key not in ("r_grid", "t_grid"):
            raise ParseError(f"$.grids.{key}: unknown grid")
    r_grid = _grid(grids["r_grid"], "$.grids.r_grid", positive=True) if "r_grid" in grids else None
    t_grid = _grid(grids["t_grid"], "$.grids.t_grid", positive=False) if "t_grid" in grids else None

    tolerances = raw.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ParseError("$.tolerances: expected an object")
    tol = {}
    for key, value in tolerances.items():
        if key not in CHECK_IDS:
            raise UnknownCheck(f"$.tolerances.{key}: unknown check id")
        tol[key] = _number(value, f"$.tolerances.{key}")
        if not tol[key] > 0:
            raise ParseError(f"$.tolerances.{key}: must be positive")

    fmt = raw.get("format", "both")
    if fmt not in FORMATS:
        raise ParseError(f"$.format: expected one of {list(FORMATS)}, got {fmt!r}")
    out = raw.get("output_dir", "greenlab_out")
    if not isinstance(out, str) or not out:
        raise ParseError("$.output_dir: expected a nonempty string")

    fl = raw.get("flow", {})
    if not isinstance(fl, dict):
        raise ParseError("$.flow: expected an object")
    fcfg = FlowConfig()
    for key, value in fl.items():
        if key in ("b_lo", "b_hi", "extra_decay"):
            setattr(fcfg, key, _number(value, f"$.flow.{key}"))
        elif key == "pairs":
            if not isinstance(value, list) or not all(isinstance(p, list) and len(p) == 2 for p in value):
                raise ParseError("$.flow.pairs: expected a list of [alpha, beta] pairs")
            fcfg.pairs = [[_number(a, "$.flow.pairs"), _number(b, "$.flow.pairs")] for a, b in value]
        else:
            raise ParseError(f"$.flow.{key}: unknown field")
    if not (fcfg.b_lo >= 0 and fcfg.b_hi > fcfg.b_lo):
        raise ParseError("$.flow: need 0 <= b_lo < b_hi")

    return RunConfig(manifolds, list(checks), r_grid, t_grid, tol, out, fmt, fcfg, raw)


# checks -------------------------------------------------------------------


class _Context:
    """Lazily built objects for one manifold; every check reads from here."""

    def __init__(self, mcfg: dict, cfg: RunConfig):
        self.mcfg = mcfg
        self.cfg = cfg
        self.spec = from_config(mcfg)
        self._profile = None
        self._curv = None
        self._assumption = None

    @property
    def profile(self):
        if self._profile is None:
            self._profile = green.build_profile(self.spec)
        return self._profile

    @property
    def curv(self):
        if self._curv is None:
            self._curv = curvature.build_curvature(self.spec)
        return self._curv

    @property
    def assumption(self):
        # C is a global property of the manifold, so the configured r-grid
        # does not apply here
        if self._assumption is None:
            self._assumption = green.assumption_constant(self.profile)
        return self._assumption

    @property
    def c_const(self) -> float:
        v = self.assumption
        if not v.holds or not math.isfinite(v.constant_c):
            raise AssumptionFails(f"no finite Hessian bound on {self.spec.label}")
        return v.constant_c

    def r(self):
        return None if self.cfg.r_grid is None else self.cfg.r_grid.values()

    def t(self):
        return None if self.cfg.t_grid is None else self.cfg.t_grid.values()

    def tol(self, check: str, default: float) -> float:
        return self.cfg.tolerances.get(check, default)

    def pairs(self):
        if self.cfg.flow.pairs is not None:
            return [tuple(p) for p in self.cfg.flow.pairs]
        return flow.default_sweep(self.spec.n)

    def domain(self):
        return flow.FlowDomain(self.cfg.flow.b_lo, self.cfg.flow.b_hi)


def _check_validate(ctx: _Context) -> CheckReport:
    rep = validate(ctx.spec)
    flags = {
        "origin_ok": rep.origin_ok,
        "positivity_ok": rep.positivity_ok,
        "derivative_consistency_ok": rep.derivative_consistency_ok,
        "nonparabolic": rep.nonparabolic,
    }
    failed = sum(not v for v in flags.values())
    return CheckReport("validate", rep.ok, float(failed), math.nan, 0.0, list(rep.notes), extras=flags)


def _check_assumption(ctx: _Context) -> CheckReport:
    v = ctx.assumption
    r, top = v.profile
    table = Table.from_columns(r=r, max_eigenvalue=top)
    return CheckReport(
        "assumption",
        v.holds,
        0.0 if v.holds else math.inf,
        v.witness_r,
        0.0,
        list(v.notes),
        table,
        extras={"constant_c": v.constant_c},
    )


def _check_h_oracle(ctx):
    return green.h_oracle_check(ctx.profile, ctx.r(), ctx.tol("h_oracle", 1e-8))


def _check_hess_decay(ctx):
    tol = ctx.tol("hess_decay", 0.1)
    if ctx.spec.warping.alpha == 1.0:
        growth = green.critical_growth_exponents(ctx.profile)
        return CheckReport(
            "hess_decay", True, 0.0, math.nan, tol,
            ["linear growth: growth exponents logged only, no verdict"], extras=growth,
        )
    d = green.hess_decay_profile(ctx.profile, ctx.r())
    table = Table.from_columns(r=d.r, H=d.H)
    extras = {"c0": d.c0, "c5": d.c5, "power_exponent": d.power_exponent, "power_residual": d.power_residual}
    notes = [f"log H against log r: slope {d.power_exponent:.6g}, sup residual {d.power_residual:.3g}"]
    verdict = d.c5 > 0 and d.residual < tol
    return CheckReport("hess_decay", verdict, d.residual, math.nan, tol, notes, table, extras)


def _check_curvature(ctx):
    h = curvature.check_thm_1_2_hypotheses(ctx.curv, ctx.r())
    r = ctx.r() if ctx.r() is not None else np.geomspace(*curvature.HYPOTHESIS_GRID)
    extras = {
        "radial_curvature_nonneg": h.radial_curvature_nonneg,
        "ricci_nonneg": h.ricci_nonneg,
        "parallel_ricci": h.parallel_ricci,
        "rm_decay_K": h.rm_decay_K,
        "nabla_ric_decay_L": h.nabla_ric_decay_L,
        "rm_tail_slope": h.rm_tail_slope,
        "nabla_ric_tail_slope": h.nabla_ric_tail_slope,
        "decay_variant": h.decay_verdict,
    }
    # Ric >= 0 is the ambient assumption; then either parallel Ricci or the decay variant
    verdict = h.ricci_nonneg and h.radial_curvature_nonneg and (h.parallel_ricci or h.decay_verdict)
    return CheckReport(
        "curvature_hypotheses", verdict, 0.0 if verdict else 1.0, math.nan, curvature.SLACK,
        list(h.notes), ctx.curv.table(r), extras,
    )


def _check_thm11(ctx):
    s = level.thm11_series(ctx.profile, ctx.curv, ctx.r(), ctx.tol("thm11", 1e-6))
    rep = s.as_report("thm11")
    rep.table = Table.from_columns(r=s.grid, A=s.values, A_slope=s.slopes)
    return rep


def _check_thm11_identity(ctx):
    return level.thm11_identity_check(ctx.profile, ctx.curv, ctx.r(), ctx.tol("thm11_identity", 1e-4))


def _sweep(ctx, name, run_one) -> CheckReport:
    rows, cols, seen = [], [], {}
    worst, witness, ok = -math.inf, math.nan, True
    pairs = ctx.pairs()
    for alpha, beta in pairs:
        tag = f"(alpha={alpha:g}, beta={beta:g})"
        try:
            rep = run_one(alpha, beta)
        except GreenlabError as exc:
            ok = False
            seen.setdefault(f"{type(exc).__name__}: {exc}", []).append(tag)
            continue
        ok = ok and rep.verdict
        if rep.max_violation > worst:
            worst, witness = rep.max_violation, rep.witness
        for note in rep.notes:
            seen.setdefault(note, []).append(tag)
        cols = ["alpha", "beta"] + rep.table.columns
        rows.extend([alpha, beta] + row for row in rep.table.rows)
    # a note shared by every pair is reported once
    notes = [msg if len(tags) == len(pairs) else f"{' '.join(tags)}: {msg}" for msg, tags in seen.items()]
    table = Table(cols, rows) if rows else None
    tol = ctx.tol(name, flow.MONO_TOL)
    if worst == -math.inf:
        worst = math.inf
    return CheckReport(name, ok, worst, witness, tol, notes, table)


def _series_report(series, name, tol) -> CheckReport:
    series.tol = tol
    series.verdict = series.max_violation <= tol
    rep = series.as_report(name)
    violation = series.slopes / (1 + np.abs(series.values))
    rep.table = Table.from_columns(t=series.grid, value=series.values, slope=series.slopes, violation=violation)
    return rep


def _check_thm13(ctx):
    C = ctx.c_const
    tol = ctx.tol("thm13", flow.MONO_TOL)
    run = lambda a, b: _series_report(flow.thm_1_3_series(ctx.profile, ctx.domain(), a, b, ctx.t(), C), "thm13", tol)
    return _sweep(ctx, "thm13", run)


def _check_thm14(ctx):
    C = ctx.c_const
    tol = ctx.tol("thm14", flow.MONO_TOL)
    extra = ctx.cfg.flow.extra_decay

    def run(a, b):
        params = flow.FlowParams.exponential(a, b, C, -(C * b + extra))
        return _series_report(flow.thm_1_4_series(ctx.profile, ctx.domain(), params, ctx.t()), "thm14", tol)

    return _sweep(ctx, "thm14", run)


def _check_proof(ctx):
    C = ctx.c_const
    tol = ctx.tol("proof_ineq", 1e-6)

    def run(a, b):
        params = flow.FlowParams.exponential(a, b, C, -C * b)
        return flow.proof_inequality_check(ctx.profile, ctx.domain(), params, ctx.t(), tol)

    return _sweep(ctx, "proof_ineq", run)


def _check_thm15(ctx):
    tol = ctx.tol("thm15", 1e-6)
    r = ctx.r()
    s = level.thm_1_5_series(ctx.profile, ctx.c_const, r, tol)
    slope_bound = s.checks["volume_slope_bound"]
    rep = s.as_report("thm15")
    rep.verdict = s.verdict and slope_bound.verdict
    rep.notes.append(f"pointwise r V' bound: max violation {slope_bound.max_violation:.3e}")
    rep.extras["volume_slope_bound_verdict"] = slope_bound.verdict
    grid = s.grid
    V = np.array([level.v_of_r(ctx.profile, float(x)) for x in grid])
    Vp = np.array([level.v_prime_of_r(ctx.profile, float(x)) for x in grid])
    rep.table = Table.from_columns(r=grid, V=V, V_prime=Vp, Q=s.values, Q_slope=s.slopes)
    return rep


def _check_dirichlet(ctx):
    return level.dirichlet_identity_check(ctx.profile, ctx.r(), ctx.tol("dirichlet", 1e-6))


def _check_remark31(ctx):
    return level.remark_3_1_check(ctx.profile, ctx.c_const, ctx.r(), ctx.tol("remark31", 1e-8))


def _check_gradient(ctx):
    return level.gradient_estimate_check(ctx.profile, ctx.curv, ctx.r(), ctx.tol("gradient_estimate", 1e-9))


def _check_lemma22(ctx):
    return green.lemma22_check(ctx.profile, ctx.r(), ctx.tol("lemma22", 1e-7))


def _check_trace(ctx):
    return green.trace_identity_check(ctx.profile, ctx.r(), ctx.tol("trace_identity", 1e-8))


CHECKS = {
    "validate": _check_validate,
    "assumption": _check_assumption,
    "h_oracle": _check_h_oracle,
    "hess_decay": _check_hess_decay,
    "curvature_hypotheses": _check_curvature,
    "thm11": _check_thm11,
    "thm11_identity": _check_thm11_identity,
    "thm13": _check_thm13,
    "thm14": _check_thm14,
    "proof_ineq": _check_proof,
    "thm15": _check_thm15,
    "dirichlet": _check_dirichlet,
    "remark31": _check_remark31,
    "gradient_estimate": _check_gradient,
    "lemma22": _check_lemma22,
    "trace_identity": _check_trace,
}


def _failed(name: str, exc: Exception) -> CheckReport:
    return CheckReport(name, False, math.inf, math.nan, 0.0, [f"{type(exc).__name__}: {exc}"])


def run_manifold(mcfg: dict, cfg: RunConfig) -> dict:
    """Run every requested check on one manifold; errors become failed reports."""
    try:
        ctx = _Context(mcfg, cfg)
    except (GreenlabError, ValueError, KeyError, TypeError, SyntaxError, NameError) as exc:
        reports = [_failed(c, exc) for c in cfg.checks]
        return {"label": str(mcfg.get("type")), "spec": mcfg, "reports": reports, "assumption": None}
    reports = []
    for name in cfg.checks:
        try:
            reports.append(CHECKS[name](ctx))
        except (GreenlabError, ValueError, ArithmeticError) as exc:
            log.info("%s on %s failed: %s", name, ctx.spec.label, exc)
            reports.append(_failed(name, exc))
    assumption = None
    try:
        v = ctx.assumption
        assumption = {"holds": v.holds, "constant_c": v.constant_c, "witness_r": v.witness_r}
    except (GreenlabError, ValueError) as exc:
        assumption = {"holds": False, "error": f"{type(exc).__name__}: {exc}"}
    return {"label": ctx.spec.label, "spec": ctx.spec.describe(), "reports": reports, "assumption": assumption}


# output -------------------------------------------------------------------


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("_")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def gnuplot_script(csv_name: str, table: Table, title: str) -> str:
    x = table.columns[0]
    logx = x == "r"
    lines = [
        f"# {title}",
        "set datafile separator ','",
        "set key outside autotitle columnhead",
        f"set xlabel '{x}'",
        f"set title '{title}' noenhanced",
        "set terminal pngcairo size 900,600",
        f"set output '{csv_name[:-4]}.png'",
    ]
    if logx:
        lines.append("set logscale x")
    ncols = len(table.columns)
    lines.append(f"plot for [i=2:{ncols}] '{csv_name}' using 1:i with linespoints")
    return "\n".join(lines) + "\n"


def _json_value(value):
    if isinstance(value, float):
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _json_value(value.item())
    return value


def dumps(obj) -> str:
    return json.dumps(_json_value(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class RunSummary:
    manifolds: list[dict]
    wall_time: float
    version: str
    config: dict

    @property
    def exit_code(self) -> int:
        ok = all(r.verdict for m in self.manifolds for r in m["reports"])
        return 0 if ok else 1

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "wall_time": self.wall_time,
            "config": self.config,
            "exit_code": self.exit_code,
            "manifolds": [
                {
                    "label": m["label"],
                    "spec": m["spec"],
                    "assumption": m["assumption"],
                    "checks": [r.to_dict() for r in m["reports"]],
                }
                for m in self.manifolds
            ],
        }


def config_echo(cfg: RunConfig) -> dict:
    return {
        "manifolds": cfg.manifolds,
        "checks": cfg.checks,
        "grids": {
            k: g.echo() for k, g in (("r_grid", cfg.r_grid), ("t_grid", cfg.t_grid)) if g is not None
        },
        "tolerances": cfg.tolerances,
        "format": cfg.format,
        "flow": {
            "b_lo": cfg.flow.b_lo,
            "b_hi": cfg.flow.b_hi,
            "pairs": cfg.flow.pairs,
            "extra_decay": cfg.flow.extra_decay,
        },
    }


def write_outputs(summary: RunSummary, out_dir: Path, fmt: str) -> list[Path]:
    written = []
    if fmt in ("csv", "both"):
        for m in summary.manifolds:
            sub = out_dir / _slug(m["label"])
            for rep in m["reports"]:
                if rep.table is None or not rep.table.columns:
                    continue
                name = f"{rep.name}.csv"
                atomic_write(sub / name, table_csv(rep.table))
                atomic_write(sub / f"{rep.name}.gp", gnuplot_script(name, rep.table, f"{rep.name} on {m['label']}"))
                written += [sub / name, sub / f"{rep.name}.gp"]
    if fmt in ("json", "both"):
        atomic_write(out_dir / "summary.json", dumps(summary.to_dict()))
        written.append(out_dir / "summary.json")
    return written


def run(cfg: RunConfig, *, out_dir: str | None = None, fmt: str | None = None, jobs: int = 1) -> RunSummary:
    start = time.perf_counter()
    if jobs > 1 and len(cfg.manifolds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_manifold, cfg.manifolds, [cfg] * len(cfg.manifolds)))
    else:
        results = [run_manifold(m, cfg) for m in cfg.manifolds]
    summary = RunSummary(results, time.perf_counter() - start, __version__, config_echo(cfg))
    write_outputs(summary, Path(out_dir or cfg.output_dir), fmt or cfg.format)
    return summary


def run_single(check: str, mcfg: dict) -> CheckReport:
    if check not in CHECK_IDS:
        raise UnknownCheck(f"unknown check id {check!r}")
    cfg = RunConfig([mcfg], [check])
    return run_manifold(mcfg, cfg)["reports"][0]


__all__ = ["CHECK_IDS", "RunConfig", "RunSummary", "parse_config", "run", "run_single", "ConfigError"]
