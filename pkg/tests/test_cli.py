import csv
import json

import numpy as np
import pytest

from gapbounds import cli
from gapbounds import config as cfgmod
from gapbounds.errors import ConfigError, NoConvergence

V = "schema_version = 1\n"

GAUSS_2D = """
schema_version = 1
[problem]
family = "gaussian"
d = 2
[grid]
n = 61
radius = 6.0
[commands]
run = ["bound", "eigs", "report"]
bounds = ["first_order", "second_order", "cordero"]
"""

POWER_1D = """
schema_version = 1
[problem]
family = "power_product"
d = 1
a = 1.5
c = 0.0
tau = 0.01
[weight]
family = "exp_eps_U"
eps = 0.25
[grid]
n = 801
[commands]
run = ["bound", "eigs"]
bounds = ["first_order", "prop41"]
[output]
figures = false
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _run(tmp_path, text, *extra):
    path = _write(tmp_path, text)
    return cli.main(["--config", str(path), "--out", str(tmp_path / "out"), *extra])


# -- configuration ------------------------------------------------------------

def test_config_defaults():
    cfg = cfgmod.loads(V + '[problem]\nfamily = "gaussian"\nd = 3\n')
    assert cfg.d == 3 and cfg.weight == "identity"
    assert cfg.commands == ("bound", "eigs")
    assert cfg.box == 8


@pytest.mark.parametrize("text, match", [
    (V + '[problem]\nfamily = "gaussian"\nd = 2\nfoo = 1\n', "problem.foo"),
    (V + '[problem]\nfamily = "gaussian"\nd = 2\n[extra]\n', "extra"),
    (V + '[problem]\nfamily = "gaussian"\nd = "two"\n', "problem.d"),
    (V + '[problem]\nfamily = "banana"\nd = 2\n', "family"),
    ('[problem]\nfamily = "gaussian"\nd = 2\n', "schema_version"),
    ('schema_version = 7\n[problem]\nfamily = "gaussian"\nd = 2\n', "schema_version"),
    (V + '[problem]\nfamily = "gaussian"\nd = 2\n[commands]\nrun = ["dance"]\n', "dance"),
    (V + '[weight]\nfamily = "identity"\n', "problem"),
])
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        cfgmod.loads(text)


def test_toml_syntax_error_has_location():
    with pytest.raises(ConfigError, match="line 3"):
        cfgmod.loads(V + '[problem]\nfamily = \n')


def test_bad_expression_reports_caret():
    cfg = cfgmod.loads(V + '[problem]\nfamily = "custom"\nd = 1\nexpression = "x1^2 + q"\n')
    with pytest.raises(ConfigError) as info:
        cfg.build_potential()
    assert "^" in str(info.value) and "q" in str(info.value)


def test_power_domain_error_is_config_error():
    cfg = cfgmod.loads(V + '[problem]\nfamily = "power_product"\nd = 2\na = 2.0\nc = 0.1\ntau = 0.01\n')
    with pytest.raises(ConfigError):
        cfg.build_potential()


def test_env_overrides():
    env = {"GAPBOUNDS_SEED": "5", "GAPBOUNDS_DUMP_MATRICES": "yes", "GAPBOUNDS_OUT": "x", "OTHER": "1"}
    assert cfgmod.env_overrides(env) == {"seed": 5, "dump_matrices": True, "out": "x"}
    with pytest.raises(ConfigError, match="GAPBOUNDS_THREADS"):
        cfgmod.env_overrides({"GAPBOUNDS_THREADS": "many"})


def test_cli_flag_beats_env_beats_file(tmp_path, monkeypatch):
    path = _write(tmp_path, GAUSS_2D + "[run]\nseed = 1\n")
    cfg = cfgmod.load(path)
    args = cli.build_parser().parse_args(["--seed", "9"])
    cli._apply_overrides(cfg, args, {"seed": 4})
    assert cfg.seed == 9
    cfg = cfgmod.load(path)
    cli._apply_overrides(cfg, cli.build_parser().parse_args([]), {"seed": 4})
    assert cfg.seed == 4
    cfg = cfgmod.load(path)
    cli._apply_overrides(cfg, cli.build_parser().parse_args([]), {})
    assert cfg.seed == 1


# -- exit codes -----------------------------------------------------------------

def test_exit_config_errors(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG
    assert _run(tmp_path, V + '[problem]\nfamily = "gaussian"\nd = 2\nbogus = 1\n') == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "problem.bogus" in err


def test_exit_config_without_config(monkeypatch):
    monkeypatch.delenv("GAPBOUNDS_CONFIG", raising=False)
    assert cli.main([]) == cli.EXIT_CONFIG


def test_config_from_env(tmp_path, monkeypatch):
    path = _write(tmp_path, POWER_1D)
    monkeypatch.setenv("GAPBOUNDS_CONFIG", str(path))
    assert cli.main([]) == cli.EXIT_OK


def test_exit_violation(tmp_path, monkeypatch):
    monkeypatch.setattr(cli.bd.BoundResult, "value",
                        property(lambda self: None if not self.applicable else self.raw_value + 1.0))
    assert _run(tmp_path, POWER_1D) == cli.EXIT_VIOLATION


def test_exit_no_convergence(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NoConvergence("forced")
    monkeypatch.setattr(cli, "lowest_eigs", boom)
    assert _run(tmp_path, POWER_1D) == cli.EXIT_NOCONV


# -- runs -----------------------------------------------------------------------

def test_gaussian_2d_report(tmp_path):
    assert _run(tmp_path, GAUSS_2D) == cli.EXIT_OK
    out = tmp_path / "out"
    for name in ("report.json", "eigenvalues.csv", "bounds.csv", "spectrum.png", "curvature.png"):
        assert (out / name).exists(), name
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == 1
    ev = rep["results"]["eigs"]["eigenvalues"]
    np.testing.assert_allclose(ev[:4], [0, 1, 1, 2], atol=2e-2)
    bounds = {(b["method"], b["target"]): b["value"] for b in rep["results"]["bound"]}
    assert bounds[("first_order[identity]", "lambda_1")] == pytest.approx(1.0)
    assert rep["violations"] == []
    with open(out / "eigenvalues.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[1]["eigenvalue"]) == ev[1]


def test_power_prop41_values(tmp_path):
    runner = cli.Runner(cfgmod.loads(POWER_1D.replace("d = 1", "d = 2").replace("c = 0.0", "c = 0.1")
                                     .replace("n = 801", "n = 41")))
    rep = runner.run()
    vals = {b["target"]: b["value"] for b in rep["results"]["bound"] if b["method"].startswith("prop41")}
    assert vals["lambda_1"] == pytest.approx(0.0971875, abs=1e-12)
    assert vals["lambda_d_plus_1"] == pytest.approx(0.214375, abs=1e-12)


def test_report_round_trips_and_is_deterministic(tmp_path):
    reps = []
    for k in range(2):
        runner = cli.Runner(cfgmod.loads(POWER_1D.replace('["bound", "eigs"]', '["bound", "eigs", "verify"]')))
        reps.append(cli.comparable(runner.run()))
    assert reps[0] == reps[1]
    text = cli.dumps(reps[0])
    assert json.loads(text) == reps[0]
    assert cli.dumps(json.loads(text)) == text


def test_json_non_finite_values():
    assert cli.to_json_value({"a": float("inf"), "b": np.float64("nan"), "c": np.arange(2)}) == \
        {"a": "inf", "b": "nan", "c": [0, 1]}


def test_verify_1d_contents():
    runner = cli.Runner(cfgmod.loads(POWER_1D.replace('["bound", "eigs"]', '["verify"]')))
    v = runner.run()["results"]["verify"]
    assert all(r["slack"] >= -1e-6 for r in v["brascamp_lieb"])
    assert {"variance_identity", "second_order", "schrodinger"} <= set(v)


def test_dump_matrices(tmp_path):
    assert _run(tmp_path, POWER_1D, "--dump-matrices") == cli.EXIT_OK
    out = tmp_path / "out"
    K = np.loadtxt(out / "K.csv", delimiter=",", skiprows=1)
    m = np.loadtxt(out / "m.csv", delimiter=",")
    assert K.shape[1] == 3 and m.ndim == 1 and np.all(m > 0)
    assert (out / "eigenvectors.csv").exists()


def test_version(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--version"])
    assert cli.__version__ in capsys.readouterr().out
