import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from greenlab import cli, report
from greenlab.errors import BadGrid, ParseError, UnknownCheck
from greenlab.results import CheckReport, Table

FAST = ["validate", "assumption", "trace_identity", "dirichlet"]


def cfg_text(**extra):
    base = {"manifold": {"type": "euclidean", "n": 3}, "checks": FAST}
    base.update(extra)
    return json.dumps(base)


def test_parse_minimal_defaults():
    cfg = report.parse_config('{"manifold": {"type": "cone", "n": 4, "a": 0.5}}')
    assert cfg.checks == ["validate", "assumption"]
    assert cfg.format == "both"
    assert cfg.flow.b_lo == 0.0 and cfg.flow.pairs is None


@pytest.mark.parametrize(
    "text, exc, fragment",
    [
        ("{", ParseError, "line 1"),
        ("[]", ParseError, "$"),
        ('{"manifold": {"type": "cone", "n": 4}, "colour": 1}', ParseError, "$.colour"),
        ('{"manifold": {"type": "torus", "n": 4}}', ParseError, "$.manifold.type"),
        ('{"manifolds": [{"type": "cone", "a": 1}]}', ParseError, "$.manifolds[0].n"),
        ('{"manifold": {"type": "cone", "n": 4}, "checks": ["bogus"]}', UnknownCheck, "$.checks[0]"),
        ('{"manifold": {"type": "cone", "n": 4}, "tolerances": {"thm11": -1}}', ParseError, "$.tolerances.thm11"),
        ('{"manifold": {"type": "cone", "n": 4}, "grids": {"r_grid": [1, 0.5]}}', BadGrid, "$.grids.r_grid"),
        ('{"manifold": {"type": "cone", "n": 4}, "grids": {"r_grid": {"lo": 0, "hi": 1, "num": 3}}}', BadGrid, "lo"),
        ('{"manifold": {"type": "cone", "n": 4}, "flow": {"b_lo": 2, "b_hi": 1}}', ParseError, "$.flow"),
        ('{"manifold": {"type": "cone", "n": 4}, "format": "xml"}', ParseError, "$.format"),
    ],
)
def test_parse_errors(text, exc, fragment):
    with pytest.raises(exc) as info:
        report.parse_config(text)
    assert fragment in str(info.value)


def test_checks_validated_before_manifolds():
    with pytest.raises(UnknownCheck):
        report.parse_config('{"manifold": {"type": "torus"}, "checks": ["bogus"]}')


def test_grid_forms():
    cfg = report.parse_config(cfg_text(grids={"r_grid": {"lo": 0.1, "hi": 10, "num": 3}, "t_grid": [0, 0.5, 1]}))
    assert list(cfg.r_grid.values()) == pytest.approx([0.1, 1.0, 10.0])
    assert list(cfg.t_grid.values()) == [0.0, 0.5, 1.0]


def test_check_ids_complete():
    assert set(report.CHECKS) == set(report.CHECK_IDS)
    assert len(report.CHECK_IDS) == 16


def test_run_writes_outputs(tmp_path):
    cfg = report.parse_config(cfg_text())
    summary = report.run(cfg, out_dir=str(tmp_path))
    assert summary.exit_code == 0
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["exit_code"] == 0
    assert [c["name"] for c in data["manifolds"][0]["checks"]] == FAST
    sub = tmp_path / "euclidean_n=3"
    csv_text = (sub / "dirichlet.csv").read_text()
    assert csv_text.splitlines()[0] == "r,energy,exact,dirichlet_dev"
    assert "set datafile separator ','" in (sub / "dirichlet.gp").read_text()


def test_run_format_json_only(tmp_path):
    report.run(report.parse_config(cfg_text(format="json")), out_dir=str(tmp_path))
    assert [p.name for p in tmp_path.iterdir()] == ["summary.json"]


def test_errors_become_failed_reports(tmp_path):
    cfg = report.parse_config('{"manifold": {"type": "sublinear", "n": 4, "alpha": 0.3}, "checks": ["assumption"]}')
    summary = report.run(cfg, out_dir=str(tmp_path))
    rep = summary.manifolds[0]["reports"][0]
    assert not rep.verdict
    assert "ParabolicRange" in rep.notes[0]
    assert summary.exit_code == 1


def test_dumps_maps_nonfinite():
    text = report.dumps({"a": math.inf, "b": [math.nan, 1.5]})
    assert json.loads(text) == {"a": "inf", "b": ["nan", 1.5]}


def test_table_csv_uses_repr():
    assert report.table_csv(Table(["r", "x"], [[0.1, 1 / 3]])) == "r,x\n0.1,0.3333333333333333\n"


def test_parse_inline_manifold():
    assert cli.parse_inline_manifold("cone:n=4,a=0.5") == {"type": "cone", "n": 4, "a": 0.5}
    assert cli.parse_inline_manifold('{"type": "euclidean", "n": 3}') == {"type": "euclidean", "n": 3}
    with pytest.raises(ParseError):
        cli.parse_inline_manifold("cone:n")


def test_cli_check_exit_codes(capsys):
    assert cli.main(["check", "gradient_estimate", "--manifold", "euclidean:n=3"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] is True
    assert cli.main(["check", "curvature_hypotheses", "--manifold", "cone:n=4,a=2"]) == 1
    assert json.loads(capsys.readouterr().out)["verdict"] is False
    assert cli.main(["check", "bogus", "--manifold", "euclidean:n=3"]) == 2


def test_cli_run_and_errors(tmp_path, capsys, monkeypatch):
    good = tmp_path / "good.json"
    good.write_text(cfg_text())
    assert cli.main(["run", str(good), "--out", str(tmp_path / "out"), "-q"]) == 0
    assert (tmp_path / "out" / "summary.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text('{"manifold": {"type": "cone", "n": 4}, "checks": ["bogus"]}')
    assert cli.main(["run", str(bad)]) == 2
    assert "UnknownCheck" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run", str(good), "--jobs", "0"]) == 2
    assert cli.main(["catalog"]) == 0
    monkeypatch.setenv("GREENLAB_SEED", "1")
    assert cli.main(["catalog"]) == 2


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "greenlab.cli", "catalog"], capture_output=True, text=True, check=True)
    assert {e["type"] for e in json.loads(out.stdout)} == {"euclidean", "cone", "perturbed_cone", "sublinear", "custom"}


def test_parallel_matches_serial(tmp_path):
    text = json.dumps(
        {"manifolds": [{"type": "euclidean", "n": 3}, {"type": "cone", "n": 4, "a": 0.5}], "checks": FAST}
    )
    a = report.run(report.parse_config(text), out_dir=str(tmp_path / "a"), jobs=1).to_dict()
    b = report.run(report.parse_config(text), out_dir=str(tmp_path / "b"), jobs=2).to_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


manifold_cfg = st.one_of(
    st.builds(lambda n: {"type": "euclidean", "n": n}, st.integers(3, 8)),
    st.builds(lambda n, a: {"type": "cone", "n": n, "a": a}, st.integers(3, 8), st.floats(0.1, 5)),
    st.builds(lambda n, al: {"type": "sublinear", "n": n, "alpha": al}, st.integers(3, 8), st.floats(0.5, 0.99)),
)
grid_cfg = st.one_of(
    st.lists(st.floats(0.01, 100), min_size=2, max_size=6, unique=True).map(sorted),
    st.builds(lambda lo, w, k: {"lo": lo, "hi": lo * w, "num": k, "spacing": "log"},
              st.floats(0.01, 1), st.floats(1.5, 100), st.integers(2, 50)),
)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(manifold_cfg, min_size=1, max_size=3),
    st.lists(st.sampled_from(report.CHECK_IDS), min_size=1, max_size=5, unique=True),
    st.one_of(st.none(), grid_cfg),
    st.dictionaries(st.sampled_from(report.CHECK_IDS), st.floats(1e-12, 1e-2), max_size=3),
    st.sampled_from(report.FORMATS),
)
def test_config_echo_round_trip(manifolds, checks, r_grid, tols, fmt):
    raw = {"manifolds": manifolds, "checks": checks, "tolerances": tols, "format": fmt}
    if r_grid is not None:
        raw["grids"] = {"r_grid": r_grid}
    cfg = report.parse_config(json.dumps(raw))
    echo = report.config_echo(cfg)
    again = report.parse_config(json.dumps({k: v for k, v in echo.items() if k != "flow" or v["pairs"] is not None}
                                           | {"flow": {k: v for k, v in echo["flow"].items() if v is not None}}))
    assert report.config_echo(again) == echo


@settings(max_examples=50, deadline=None)
@given(
    st.booleans(),
    st.floats(allow_nan=True, allow_infinity=True),
    st.lists(st.text(max_size=10), max_size=3),
    st.dictionaries(st.text(min_size=1, max_size=5), st.floats(-1e9, 1e9), max_size=3),
)
def test_report_json_round_trip(verdict, violation, notes, extras):
    rep = CheckReport("x", verdict, violation, 1.0, 1e-6, notes, extras=extras)
    text = report.dumps(rep.to_dict())
    assert json.loads(text) == json.loads(report.dumps(json.loads(text)))
    assert json.loads(text)["verdict"] is verdict
