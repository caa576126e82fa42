import math

import pytest

import geppml


SCENARIO = """name = "drop-first"
evaluation_year = 2008
reference_country = "DEU"
drop = [["CHL", "USA"]]
"""


def test_percent_effect_anchors():
    assert geppml.format_display(geppml.percent_effect(0.4383)) == "55.01"
    assert round(geppml.percent_effect(0.2348)) == 26
    assert round(geppml.percent_effect(0.0995)) == 10


def test_fit_ppml_constant():
    fit = geppml.fit_ppml([2.0, 2.0, 2.0, 2.0])
    assert fit["fitted"] == pytest.approx([2.0] * 4, rel=1e-12)


def test_fit_ppml_names_collinear_column():
    x = [0.1, 0.5, -0.3, 1.2, 0.7, -0.8]
    with pytest.raises(geppml.EstimationError, match="x2"):
        geppml.fit_ppml([1, 2, 0, 3, 2, 1], covariates=[("x", x), ("x2", [2 * v for v in x])])


def test_pipeline(tmp_path):
    truth = geppml.synth(str(tmp_path / "data"), n_countries=8, seed=2)
    assert "DEU" in truth["countries"]
    est = geppml.estimate(str(tmp_path / "data"), out=str(tmp_path / "est"))
    assert abs(est["beta_fta"] - 0.5) < 1e-8
    assert math.isclose(est["percent_effect"], 100 * (math.exp(est["beta_fta"]) - 1))

    scenario = tmp_path / "scenario.toml"
    scenario.write_text(SCENARIO)
    run = geppml.simulate(str(tmp_path / "est" / "baseline.json"), str(scenario), out=str(tmp_path / "sim"))
    assert run["iterations"] == len(run["trace"])
    assert {r["country"] for r in run["rows"]} == set(truth["countries"])

    checks = geppml.verify(str(tmp_path / "sim"))
    assert checks and all(c["passed"] for c in checks)


def test_input_errors(tmp_path):
    with pytest.raises(geppml.InputError):
        geppml.estimate(str(tmp_path / "missing"))
    with pytest.raises(ValueError):
        geppml.estimate(str(tmp_path / "missing"))
