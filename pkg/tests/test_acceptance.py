"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import functools
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402

from greenlab import flow, green, level, report  # noqa: E402
from greenlab.curvature import CurvatureProfile  # noqa: E402
from greenlab.errors import HypothesisNotMet  # noqa: E402
from greenlab.manifold import from_config, log_grid  # noqa: E402

EUCLID = [{"type": "euclidean", "n": n} for n in (3, 4, 5)]
CONES = [{"type": "cone", "n": 4, "a": 0.5}, {"type": "cone", "n": 4, "a": 0.9}]
SUBLINEAR = [{"type": "sublinear", "n": 4, "alpha": 0.5}, {"type": "sublinear", "n": 4, "alpha": 0.7}]
PERTURBED = [
    {"type": "perturbed_cone", "n": 4, "a": 1.0, "eps": 0.01, "r0": 1.0},
    {"type": "perturbed_cone", "n": 4, "a": 1.0, "eps": 0.5, "r0": 1.0},
]
CATALOG = EUCLID + CONES + SUBLINEAR + PERTURBED
SWEEP_ENTRIES = [EUCLID[1], CONES[0], SUBLINEAR[0], PERTURBED[1]]
BALL = flow.FlowDomain(0.0, 1.0)


def _key(cfg):
    return json.dumps(cfg, sort_keys=True)


@functools.lru_cache(maxsize=None)
def _profile(key):
    return green.build_profile(from_config(json.loads(key)))


def profile(cfg):
    return _profile(_key(cfg))


def label(cfg):
    return profile(cfg).spec.label


def c_const(cfg):
    return green.assumption_constant(profile(cfg)).constant_c


def record(number, ok, detail, sub=()):
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    for sub_ok, text in sub:
        ACCEPTANCE_LINES.append(f"    {'pass' if sub_ok else 'FAIL'}  {text}")
    print(ACCEPTANCE_LINES[-1 - len(sub)])
    assert ok, detail


def test_criterion_01_euclidean_golden():
    start = time.perf_counter()
    worst, worst_c = 0.0, 0.0
    r = log_grid(1e-3, 1e3, 50)
    for n in (3, 4, 5):
        p = green.build_profile(from_config({"type": "euclidean", "n": n}))
        lr, lt = p.eigenvalues(r)
        for got, exact in ((p.G(r), r ** (2.0 - n)), (p.b(r), r), (p.grad_b(r), 1.0), (lr, 2.0), (lt, 2.0)):
            worst = max(worst, float(np.max(np.abs(got / exact - 1))))
        worst_c = max(worst_c, abs(green.assumption_constant(p).constant_c - 2.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and worst_c <= 1e-8 and elapsed < 5.0
    record(1, ok, f"max rel err {worst:.2e}, |C-2| {worst_c:.2e}, {elapsed:.2f}s")


def test_criterion_02_cone_closed_form():
    worst = 0.0
    r = log_grid(1e-3, 1e3, 50)
    for cfg in CONES:
        n, a = cfg["n"], cfg["a"]
        k = a ** ((n - 1) / (n - 2))  # from G = a^(1-n) r^(2-n) and b = G^(1/(2-n))
        p = profile(cfg)
        lr, lt = p.eigenvalues(r)
        for got, exact in ((p.b(r), k * r), (p.grad_b(r), k), (lr, 2 * k * k), (lt, 2 * k * k)):
            worst = max(worst, float(np.max(np.abs(got / exact - 1))))
    record(2, worst <= 1e-8, f"max rel err {worst:.2e} on a in (0.5, 0.9)")


def test_criterion_03_dirichlet():
    r = log_grid(1e-2, 1e1, 31)
    devs = {label(cfg): level.dirichlet_identity_check(profile(cfg), r).max_violation for cfg in CATALOG}
    worst = max(devs.values())
    record(3, worst < 1e-6, f"max rel dev {worst:.2e} over {len(devs)} entries, r in [1e-2, 1e1]")


def test_criterion_04_gradient_estimate():
    sub, bounded, attained = [], True, {}
    for cfg in CATALOG:
        p = profile(cfg)
        try:
            rep = level.gradient_estimate_check(p, CurvatureProfile(p.spec))
        except HypothesisNotMet:
            sub.append((True, f"{label(cfg)}: Ric >= 0 fails, excluded"))
            continue
        bounded &= rep.verdict
        attained[label(cfg)] = rep.extras["sup_attained"]
        sub.append((rep.verdict, f"{label(cfg)}: sup |grad b| = {rep.extras['sup_grad_b']:.12f}"))
    only_euclid = all(v == name.startswith("euclidean") for name, v in attained.items())
    record(4, bounded and only_euclid, f"bound holds: {bounded}; sup attained only on Euclidean: {only_euclid}", sub)


def test_criterion_05_trace_and_gradient_norm():
    worst_t = worst_l = 0.0
    for cfg in CATALOG:
        worst_t = max(worst_t, green.trace_identity_check(profile(cfg)).max_violation)
        worst_l = max(worst_l, green.lemma22_check(profile(cfg)).max_violation)
    record(5, worst_t < 1e-7 and worst_l < 1e-7, f"trace {worst_t:.2e}, gradient-norm identity {worst_l:.2e}")


def _sweep(fn):
    out = []
    for cfg in SWEEP_ENTRIES:
        for alpha, beta in flow.default_sweep(cfg["n"]):
            out.append((cfg, alpha, beta, fn(cfg, alpha, beta)))
    return out


def test_criterion_06_flow_monotonicity():
    start = time.perf_counter()

    def one(cfg, alpha, beta):
        p, C = profile(cfg), c_const(cfg)
        s13 = flow.thm_1_3_series(p, BALL, alpha, beta, c_const=C)
        params = flow.FlowParams.exponential(alpha, beta, C, -(C * beta + 1.0))
        s14 = flow.thm_1_4_series(p, BALL, params)
        return s13, s14

    results = _sweep(one)
    worst = max(max(s13.max_violation, s14.max_violation) for *_, (s13, s14) in results)
    eq = [
        float(np.max(np.abs(s13.slopes)))
        for cfg, a, b, (s13, _) in results
        if cfg["type"] == "euclidean" and a + b == cfg["n"]
    ]
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and max(eq) <= 1e-7 and elapsed < 60
    record(6, ok, f"max scaled slope {worst:.2e}, Euclidean equality |slope| {max(eq):.2e}, {elapsed:.1f}s")


def test_criterion_07_proof_inequality():
    def one(cfg, alpha, beta):
        p, C = profile(cfg), c_const(cfg)
        reps = []
        for extra in (0.0, 1.0):
            params = flow.FlowParams.exponential(alpha, beta, C, -(C * beta + extra))
            reps.append(flow.proof_inequality_check(p, BALL, params))
        return reps

    results = _sweep(one)
    ok = all(r.verdict for *_, reps in results for r in reps)
    worst = max(r.max_violation for *_, reps in results for r in reps)
    record(7, ok, f"max scaled excess {worst:.2e} over {2 * len(results)} (entry, pair, weight) cases")


def test_criterion_08_volume_monotonicity():
    sub = []
    mono = q_zero = slope_bound = True
    equality = {}
    for cfg in SWEEP_ENTRIES:
        p, C = profile(cfg), c_const(cfg)
        series = level.thm_1_5_series(p, C)
        mono &= series.verdict
        slope_bound &= series.checks["volume_slope_bound"].verdict
        if cfg["type"] == "euclidean":
            q_zero &= bool(np.max(np.abs(series.values)) <= 1e-8)
        rem = level.remark_3_1_check(p, C)
        equality[label(cfg)] = (rem.verdict, rem.extras["equality"], rem.extras["max_relative_gap"])
    bound_holds = all(v[0] for v in equality.values())
    equality_only_euclid = all(v[1] == name.startswith("euclidean") for name, v in equality.items())
    sub.append((mono, "Q(r) nonincreasing within 1e-6 scale"))
    sub.append((q_zero, "Euclidean Q == 0 within 1e-8"))
    sub.append((slope_bound, "pointwise bound r V' <= C|S| r^n / n + (n-2) V"))
    sub.append((bound_holds, "V(r) <= C|S| r^n / (2n)"))
    gaps = ", ".join(f"{name} gap {v[2]:.1e}" for name, v in equality.items())
    sub.append((equality_only_euclid, f"equality only on Euclidean ({gaps})"))
    ok = all(s for s, _ in sub)
    record(8, ok, "; ".join(text.split(" (")[0] for s, text in sub if not s) or "all sub-claims hold", sub)


def test_criterion_09_a_prime_identity():
    sub, ok = [], True
    for cfg in (EUCLID[1], CONES[0], SUBLINEAR[0]):
        p = profile(cfg)
        rep = level.thm11_identity_check(p, CurvatureProfile(p.spec), tol=1e-4)
        both = rep.extras["max_abs_side"]
        flat = cfg["type"] != "sublinear"
        good = rep.verdict and (both <= 1e-7 if flat else True)
        ok &= good
        sub.append((good, f"{label(cfg)}: max residual {rep.max_violation:.2e}, max |side| {both:.2e}"))
    record(9, ok, "identity at 10 radii on three entries", sub)


def test_criterion_10_decay():
    sub, ok = [], True
    for cfg in SUBLINEAR:
        d = green.hess_decay_profile(profile(cfg))
        good = d.c5 > 0 and d.residual < 0.1
        ok &= good
        sub.append((good, f"{label(cfg)}: c5 {d.c5:.3g}, residual {d.residual:.3f}; "
                          f"power-law fit slope {d.power_exponent:.2f}, residual {d.power_residual:.4f}"))
    record(10, ok, "exponential-type fit of log H over r in [10, 1e3]", sub)


def test_criterion_11_h_oracle():
    worst, skipped = 0.0, 0
    for cfg in CATALOG:
        rep = green.h_oracle_check(profile(cfg))
        worst = max(worst, rep.max_violation)
        skipped += len(rep.notes)
    record(11, worst < 1e-8, f"max rel gap {worst:.2e}, {skipped} radii skipped for F' = 0")


def _run_outputs(out_dir: Path) -> dict:
    cfg = report.parse_config(json.dumps({"manifolds": CATALOG, "checks": list(report.CHECK_IDS)}))
    report.run(cfg, out_dir=str(out_dir))
    files = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file():
            data = path.read_bytes()
            if path.name == "summary.json":
                doc = json.loads(data)
                doc.pop("wall_time")
                data = report.dumps(doc).encode()
            files[str(path.relative_to(out_dir))] = data
    return files


def test_criterion_12_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        a = _run_outputs(Path(tmp) / "a")
        b = _run_outputs(Path(tmp) / "b")
    same = a == b
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    record(12, same and len(a) > 0, f"{len(a)} files compared, {len(differing)} differ")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    print("\n".join(ACCEPTANCE_LINES))
    sys.exit(1 if failed else 0)
