"""Command-line entry points."""

import json

import numpy as np
import pytest

from ppdiv import GaussianMixture, PoissonModel
from ppdiv.cli import main
from ppdiv.divergence import bhatt_poisson_gaussian, csd_poisson_gm
from ppdiv.gaussmix import load_mixture, mixture_from_dict, mixture_to_dict, save_mixture


@pytest.fixture
def mixture_files(tmp_path):
    a = GaussianMixture([1.2], [[0.0, 0.0]], [np.eye(2)])
    b = GaussianMixture([0.8], [[1.0, -0.5]], [1.5 * np.eye(2)])
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    save_mixture(a, pa)
    save_mixture(b, pb)
    return a, b, pa, pb


def _value(line):
    return float(line.split(":")[1].split("+/-")[0])


def test_mixture_json_roundtrip(tmp_path):
    u = GaussianMixture(
        [0.5, 1.5],
        [[1.0, 2.0], [-1.0, 0.5]],
        [np.eye(2), [[2.0, 0.3], [0.3, 1.0]]],
    )
    path = tmp_path / "mix.json"
    save_mixture(u, path)
    back = load_mixture(path)
    assert np.array_equal(back.weights, u.weights)
    assert np.array_equal(back.means, u.means)
    assert np.array_equal(back.covs, u.covs)
    doc = mixture_to_dict(u)
    assert doc["dim"] == 2 and len(doc["components"]) == 2
    with pytest.raises(ValueError, match="components\\[0\\]"):
        mixture_from_dict({"dim": 2, "components": [{"weight": 1.0}]})
    with pytest.raises(ValueError, match="dim"):
        mixture_from_dict({"components": []})


def test_divergence_closed_and_quadrature(mixture_files, capsys):
    a, b, pa, pb = mixture_files
    assert main(["divergence", "--a", str(pa), "--b", str(pb)]) == 0
    closed_lines = capsys.readouterr().out.strip().split("\n")
    assert main(["divergence", "--a", str(pa), "--b", str(pb), "--method", "quadrature"]) == 0
    quad_lines = capsys.readouterr().out.strip().split("\n")
    expected_cs = csd_poisson_gm(PoissonModel(a), PoissonModel(b))
    expected_db = bhatt_poisson_gaussian(PoissonModel(a), PoissonModel(b))
    assert _value(closed_lines[0]) == pytest.approx(expected_cs, rel=1e-12)
    assert _value(closed_lines[1]) == pytest.approx(expected_db, rel=1e-12)
    assert _value(quad_lines[0]) == pytest.approx(expected_cs, rel=1e-6)
    assert _value(quad_lines[1]) == pytest.approx(expected_db, rel=1e-6)


def test_divergence_monte_carlo(mixture_files, capsys):
    a, b, pa, pb = mixture_files
    code = main(
        ["divergence", "--a", str(pa), "--b", str(pb), "--method", "montecarlo",
         "--samples", "50000", "--seed", "3"]
    )
    assert code == 0
    line = capsys.readouterr().out.strip()
    est = _value(line)
    se = float(line.split("+/-")[1].split("(")[0])
    expected = csd_poisson_gm(PoissonModel(a), PoissonModel(b))
    assert abs(est - expected) <= 4.0 * se


def test_bad_inputs_exit_two(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["divergence", "--a", str(missing), "--b", str(missing)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
    shallow = tmp_path / "shallow.json"
    shallow.write_text(json.dumps({"horizon": -3}))
    assert main(["simulate", "--config", str(shallow), "--out", str(tmp_path / "o.csv")]) == 2
    capsys.readouterr()


def test_rejected_flags_exit_nonzero(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["simulate", "--config", "x.json", "--out", "y.csv", "--policy", "bogus"])
    with pytest.raises(SystemExit):
        main(["no-such-command"])
    capsys.readouterr()


def test_validate_fast_battery(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["validate", "--level", "fast", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "oracles passed" in text
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert report["n_failed"] == 0
    assert report["level"] == "fast"
    assert all(entry["measure"] < entry["tolerance"] for entry in report["entries"])
