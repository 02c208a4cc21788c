import json

import numpy as np
import pytest

from nsbf_dirac.cli import ConfigError, RunConfig, main, parse_config
from nsbf_dirac.evaluator import SpectralPoint, leading_coefficients
from oracles import ode_unit_solution, relative_sup


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    # Runs without out_dir write to the default relative directory.
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(path):
    return np.genfromtxt(path, delimiter=",", names=True)


def test_parse_valid_verify():
    cfg = parse_config('{"mode":"verify","potential":{"builtin":"zero"},"kappa":1,"b":3.14}')
    assert isinstance(cfg, RunConfig)
    assert cfg.mode == "verify" and cfg.kappa == 1.0 and cfg.b == 3.14
    assert cfg.n_points == 100001 and cfg.budget_N == 100 and cfg.threshold == 0.01
    assert not cfg.truncate_effective


@pytest.mark.parametrize("text, field", [
    ('{"mode":"verify","potential":{"builtin":"zero"},"b":3}', "kappa"),
    ('{"mode":"verify","potential":{"builtin":"zero"},"kappa":1,"b":3,"n_points":1}', "n_points"),
    ('{"mode":"verify","potential":{"builtin":"zero"},"kappa":1,"b":3,"colour":1}', "colour"),
    ('{"mode":"fly","potential":{"builtin":"zero"},"kappa":1,"b":3}', "mode"),
    ('{"mode":"verify","potential":{"builtin":"cubic"},"kappa":1,"b":3}', "potential.builtin"),
    ('{"mode":"verify","potential":{"builtin":"zero"},"kappa":0.2,"b":3}', "kappa"),
    ('{"mode":"verify","potential":{"builtin":"zero"},"kappa":1,"b":-3}', "b"),
    ('{"mode":"solve","potential":{"builtin":"zero"},"kappa":1,"b":3}', "omegas"),
    ('{"mode":"eigs","potential":{"builtin":"zero"},"kappa":1,"b":3}', "scan"),
    ('{"mode":"eigs","potential":{"builtin":"zero"},"kappa":1,"b":3,"scan":{"min":2,"max":1,"step":1}}',
     "scan.max"),
    ('{"mode":"oscillator-demo","oscillator":{"epsilon":2}}', "oscillator"),
    ('[1, 2]', "<document>"),
    ('{not json', "<document>"),
])
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_demo_defaults():
    cfg = parse_config('{}', mode="oscillator-demo")
    assert cfg.kappa == 3.0 and cfg.b == 20.0 and cfg.truncate_effective
    assert cfg.potential == {"builtin": "oscillator", "epsilon": -1, "m": 1.0, "freq": 1.0}
    assert cfg.oscillator["count"] == 13


def test_verify_zero_potential(tmp_path):
    path = _write(tmp_path, {"potential": {"builtin": "zero"}, "kappa": 1, "b": 3.14,
                             "n_points": 2001, "budget_N": 10, "omegas": [[2.0, 2.0]]})
    out = tmp_path / "out"
    assert main(["verify", "--config", path, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["status"] == "ok"
    checks = summary["checks"]
    assert checks["zero_potential_coefficients"]["max_abs"] <= 1e-10
    assert checks["identity_j1"]["passed"] and checks["identity_j2"]["passed"]
    assert max(checks["residuals_2_2"].values()) <= 1e-10
    disc = _read_csv(out / "discrepancy.csv")
    assert disc.dtype.names == ("r", "e2", "abs_rQ2_over_100")


def test_solve_csv_potential_against_ode(tmp_path):
    b, n = 3.0, 6001
    r = np.linspace(0, b, n)
    pfun = lambda t: np.sin(t) / (1 + t)
    np.savetxt(tmp_path / "p.csv", np.column_stack([r, pfun(r)]), delimiter=",", header="r,p",
               comments="", fmt="%.17g")
    path = _write(tmp_path, {"potential": {"csv": str(tmp_path / "p.csv")}, "kappa": 1, "b": b,
                             "omegas": [[10.0, 10.0]], "budget_N": 60})
    out = tmp_path / "out"
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    sol = _read_csv(out / "solution_0.csv")
    cf, _ = leading_coefficients(1.0, SpectralPoint(10.0, 10.0))
    f_ref, g_ref = ode_unit_solution(pfun, 1.0, 10.0, 10.0, sol["r"])
    keep = sol["r"] >= 0.1
    assert relative_sup(sol["f"][keep], cf * f_ref[keep]) <= 1e-7
    assert relative_sup(sol["g"][keep], cf * g_ref[keep]) <= 1e-7
    summary = json.loads((out / "summary.json").read_text())
    assert summary["points"][0]["normalization"] == "regular"
    assert summary["points"][0]["sup_residual1"] < 1e-6


def test_eigs_free_problem_and_cache(tmp_path, capsys):
    cfg = {"potential": {"builtin": "zero"}, "kappa": 1, "b": float(np.pi), "n_points": 2001,
           "budget_N": 10, "N": 2, "truncate": False, "scan": {"min": 0.5, "max": 30, "step": 0.5}}
    out = tmp_path / "a"
    assert main(["eigs", "--config", _write(tmp_path, cfg), "--out", str(out), "--coeff-dump"]) == 0
    assert "approximate" in capsys.readouterr().out
    rows = _read_csv(out / "eigs.csv")
    assert np.allclose(rows["approximate"], [1, 4, 9, 16, 25], rtol=1e-12)
    assert (out / "beta_j1.csv").exists() and (out / "beta_j2.csv").exists()
    cached = dict(cfg, coeff_cache=str(out / "coeffs.npz"))
    out2 = tmp_path / "b"
    assert main(["eigs", "--config", _write(tmp_path, cached, "c2.json"), "--out", str(out2)]) == 0
    rows2 = _read_csv(out2 / "eigs.csv")
    assert np.max(np.abs(rows2["approximate"] - rows["approximate"])) <= 1e-13


def test_determinism(tmp_path):
    cfg = {"potential": {"builtin": "polynomial", "coeffs": [0, 0.5, -0.2]}, "kappa": 1.5, "b": 2.0,
           "n_points": 2001, "budget_N": 20, "omegas": [[3.0, 4.0], [1.0, -2.0]]}
    path = _write(tmp_path, cfg)
    outs = []
    for k in range(2):
        out = tmp_path / ("run%d" % k)
        assert main(["solve", "--config", path, "--out", str(out)]) == 0
        outs.append(out)
    for name in ("solution_0.csv", "solution_1.csv", "discrepancy.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["points"][1]["normalization"] == "unit"


def test_oscillator_demo_small(tmp_path, capsys):
    cfg = {"n_points": 20001, "oscillator": {"epsilon": -1, "count": 6, "states": [1, 3]}}
    out = tmp_path / "demo"
    assert main(["oscillator-demo", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _read_csv(out / "eigs.csv")
    assert np.max(rows["abs_error"][:6]) < 1e-6
    assert all(f == b"ok" or f == "ok" for f in np.genfromtxt(out / "eigs.csv", delimiter=",",
                                                              names=True, dtype=None,
                                                              encoding=None)["flag"][:6])
    summary = json.loads((out / "summary.json").read_text())
    assert 8.5 <= summary["B_selected"] <= 9.5
    assert [e["n"] for e in summary["eigenfunctions"]] == [1, 3]
    ef = _read_csv(out / "eigenfunction_n1.csv")
    assert ef.dtype.names[:3] == ("r", "F_exact", "G_exact")
    keep = ef["r"] <= 6
    assert np.max(ef["abs_err_F"][keep]) < 1e-6


def test_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, {"potential": {"builtin": "zero"}, "b": 3})
    assert main(["verify", "--config", bad]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["kind"] == "config" and err["field"] == "kappa"
    assert main(["verify", "--config", str(tmp_path / "missing.json")]) == 2
    missing_csv = _write(tmp_path, {"potential": {"csv": str(tmp_path / "nope.csv")}, "kappa": 1,
                                    "b": 1, "omegas": [[1, 1]]}, "m.json")
    assert main(["solve", "--config", missing_csv]) == 2
    # An unattainable identity target fails on the first cell.
    failing = _write(tmp_path, {"potential": {"builtin": "linear", "slope": 1.0}, "kappa": 1, "b": 3,
                                "n_points": 101, "threshold": 1e-300, "budget_N": 2,
                                "omegas": [[1, 1]], "out_dir": str(tmp_path / "y")}, "f.json")
    assert main(["solve", "--config", failing]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["kind"] == "numeric"
