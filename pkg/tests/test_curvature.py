import math

import numpy as np
import pytest

from greenlab import curvature
from greenlab.curvature import CurvatureProfile, audit_curvature, build_curvature, check_thm_1_2_hypotheses
from greenlab.errors import CurvatureAuditError
from greenlab.manifold import log_grid, make_cone, make_custom, make_euclidean, make_perturbed_cone, make_sublinear


def test_euclidean_is_flat():
    prof = build_curvature(make_euclidean(4))
    r = log_grid(1e-3, 1e3, 20)
    for fn in (prof.k_rad, prof.k_tan, prof.rm_norm, prof.nabla_ric_norm):
        np.testing.assert_allclose(fn(r), 0.0, atol=1e-12)
    rep = check_thm_1_2_hypotheses(prof)
    assert rep.radial_curvature_nonneg and rep.ricci_nonneg and rep.parallel_ricci
    assert rep.decay_verdict


def test_cone_closed_form():
    # a = 1/2, n = 4: k_tan = (1 - a^2) / (a r)^2 = 3 / r^2, Ric_tan = 6 / r^2
    prof = build_curvature(make_cone(4, 0.5))
    assert prof.k_tan(1.0) == pytest.approx(3.0, rel=1e-14)
    assert prof.k_tan(2.0) == pytest.approx(0.75, rel=1e-14)
    assert prof.ric_tan(1.0) == pytest.approx(6.0, rel=1e-14)
    assert prof.k_rad(1.0) == 0.0
    # |grad Ric|^2 = 3 (12)^2 + 2 * 3 * 6^2 at r = 1
    assert prof.nabla_ric_norm(1.0) == pytest.approx(math.sqrt(648.0), rel=1e-13)
    assert prof.nabla_ric_norm(1.0) == pytest.approx(25.45584412271571, rel=1e-13)
    rep = check_thm_1_2_hypotheses(prof)
    assert rep.rm_decay_K == pytest.approx(10.392304845413266, rel=1e-12)
    assert rep.nabla_ric_decay_L == pytest.approx(25.455844122715714, rel=1e-12)
    assert rep.ricci_nonneg and not rep.parallel_ricci and rep.decay_verdict


def test_wide_cone_has_negative_ricci():
    rep = check_thm_1_2_hypotheses(build_curvature(make_cone(4, 2.0)))
    assert not rep.ricci_nonneg
    assert rep.radial_curvature_nonneg
    assert not curvature.ricci_nonneg(make_cone(4, 2.0))


def test_sublinear_tail_growth_flagged():
    rep = check_thm_1_2_hypotheses(build_curvature(make_sublinear(4, 0.5)))
    assert rep.ricci_nonneg
    assert rep.rm_tail_slope == pytest.approx(1.0, abs=0.05)
    assert not rep.decay_verdict
    assert rep.notes


def test_perturbed_cone_radial_curvature_negative():
    prof = build_curvature(make_perturbed_cone(4, 1.0, 0.5, 1.0))
    assert np.min(prof.k_rad(np.linspace(1.01, 1.99, 99))) < 0
    assert not check_thm_1_2_hypotheses(prof).radial_curvature_nonneg


@pytest.mark.parametrize(
    "spec",
    [make_cone(3, 0.5), make_sublinear(4, 0.7), make_sublinear(5, 0.5), make_perturbed_cone(4, 1.0, 0.5, 1.0)],
    ids=lambda s: s.label,
)
def test_closed_forms_match_coordinate_oracle(spec):
    assert audit_curvature(CurvatureProfile(spec)) < 1e-5


def test_audit_catches_wrong_third_derivative():
    good = make_sublinear(4, 0.5).warping
    bad = make_custom(4, good.eval_f, good.eval_f1, good.eval_f2, alpha=0.5, origin_smooth=True,
                      f3=lambda r: 0.0 * r + 1.0)
    with pytest.raises(CurvatureAuditError):
        build_curvature(bad)


def test_numerical_third_derivative_fallback():
    w = make_sublinear(4, 0.5).warping
    plain = make_custom(4, w.eval_f, w.eval_f1, w.eval_f2, alpha=0.5, origin_smooth=True)
    r = np.array([0.3, 1.0, 5.0])
    np.testing.assert_allclose(
        CurvatureProfile(plain).nabla_ric_norm(r), CurvatureProfile(make_sublinear(4, 0.5)).nabla_ric_norm(r), rtol=1e-8
    )


def test_cross_curvature_must_be_positive():
    with pytest.raises(ValueError):
        CurvatureProfile(make_euclidean(3), cross_curvature=0.0)


def test_table_columns():
    t = build_curvature(make_cone(4, 0.5)).table([1.0, 2.0])
    assert t.columns == ["r", "k_rad", "k_tan", "ric_rad", "ric_tan", "nabla_ric_norm"]
