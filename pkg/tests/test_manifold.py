import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greenlab import manifold
from greenlab.errors import BadDimension, InvalidManifold, NonPositiveSlope, NotSublinear, ParabolicRange
from greenlab.numerics import derive


def test_sphere_volume_known():
    assert manifold.sphere_volume(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert manifold.sphere_volume(4) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert manifold.sphere_volume(5) == pytest.approx(8 * math.pi**2 / 3, rel=1e-15)


@pytest.mark.parametrize("n", [2, 3.5, 1, True])
def test_bad_dimension(n):
    with pytest.raises(BadDimension):
        manifold.make_euclidean(n)


def test_constructor_errors():
    with pytest.raises(NonPositiveSlope):
        manifold.make_cone(4, 0.0)
    with pytest.raises(ParabolicRange):
        manifold.make_sublinear(4, 0.3)
    with pytest.raises(NotSublinear):
        manifold.make_sublinear(4, 1.0)
    with pytest.raises(NonPositiveSlope):
        manifold.make_perturbed_cone(4, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidManifold):
        manifold.from_config({"type": "torus", "n": 3})


def test_bump_support_and_normalisation():
    s = np.linspace(0.0, 3.0, 30001)
    for k in range(3):
        vals = manifold.bump(s, k)
        assert np.all(vals[(s <= 1) | (s >= 2)] == 0)
        assert np.max(np.abs(vals)) <= 1.0 + 1e-9
    assert np.max(np.abs(manifold.bump(s, 2))) == pytest.approx(1.0, rel=1e-4)
    with pytest.raises(ValueError):
        manifold.bump(s, 4)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_bump_derivatives(order):
    for s in (1.2, 1.5, 1.77):
        num = derive(lambda x: float(manifold.bump(np.array([x]), order - 1)[0]), s, 0.01)
        assert float(manifold.bump(np.array([s]), order)[0]) == pytest.approx(num, rel=1e-7, abs=1e-9)


SPECS = [
    manifold.make_euclidean(3),
    manifold.make_cone(4, 0.5),
    manifold.make_sublinear(4, 0.5),
    manifold.make_sublinear(5, 0.7),
    manifold.make_perturbed_cone(4, 1.0, 0.5, 1.0),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_validate_catalog(spec):
    rep = manifold.validate(spec)
    assert rep.ok, rep.notes


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_third_derivative_consistent(spec):
    w = spec.warping
    for r in (0.3, 1.1, 1.5, 1.9, 7.0):
        num = derive(lambda x: float(w.eval_f2(np.array([x]))[0]), r, 0.01 * r)
        assert float(w.eval_f3(np.array([r]))[0]) == pytest.approx(num, rel=1e-7, abs=1e-9)


def test_validate_flags_problems():
    bad = manifold.make_custom(4, lambda r: r, lambda r: 2 * r, lambda r: 0 * r, alpha=1.0, origin_smooth=True)
    rep = manifold.validate(bad)
    assert not rep.derivative_consistency_ok
    assert rep.notes
    parabolic = manifold.make_custom(3, lambda r: r**0.4, lambda r: 0.4 * r**-0.6, lambda r: -0.24 * r**-1.6, alpha=0.4)
    rep = manifold.validate(parabolic)
    assert not rep.nonparabolic
    assert not rep.ok


def test_from_config_custom_expression():
    spec = manifold.from_config(
        {"type": "custom", "n": 4, "f": "r", "f1": "1+0*r", "f2": "0*r", "alpha": 1.0, "origin_smooth": True}
    )
    assert manifold.validate(spec).ok
    assert spec.describe()["type"] == "custom"


def test_describe_round_trip():
    for cfg in ({"type": "cone", "n": 4, "a": 0.5}, {"type": "sublinear", "n": 4, "alpha": 0.7}):
        spec = manifold.from_config(cfg)
        assert spec.describe() == cfg
        assert manifold.from_config(spec.describe()).label == spec.label


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 7), st.floats(0.3, 0.95))
def test_sublinear_growth(n, alpha):
    if alpha * (n - 1) <= 1.05:
        return
    w = manifold.make_sublinear(n, alpha).warping
    r = np.array([1e-6, 1e6])
    f = w.eval_f(r)
    assert f[0] == pytest.approx(1e-6, rel=1e-9)
    assert f[1] / 1e6**alpha == pytest.approx(1.0, rel=1e-9)
    assert np.all(w.eval_f1(manifold.log_grid(1e-3, 1e3, 30)) > 0)
