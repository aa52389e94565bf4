import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvtrack.harness import checks, experiments
from tvtrack.harness.cli import main
from tvtrack.harness.config import (ConfigError, ExperimentConfig, dump_config, load_config,
                                    parse_text)
from tvtrack.harness.csvio import HEADER, CsvRow, flag_dict, format_float, read_rows, write_rows


def test_config_parse_and_defaults(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\nproblem = rotating\nkappa = 6   # trailing\n"
                    "solvers = polyak, ogd\nseed = 3\n")
    cfg = load_config(str(path), [("replications", "4")])
    assert cfg.problem == "rotating" and cfg.kappa == 6.0 and cfg.seed == 3
    assert cfg.solvers == ("polyak", "ogd") and cfg.replications == 4
    assert cfg.n == 20 and cfg.noise_std == 1e-3 and cfg.L == 1.0
    assert cfg.mu_value == pytest.approx(1 / 6)


def test_config_round_trip():
    cfg = ExperimentConfig(problem="least_squares", seed=1, kappa=316.2, solvers=("ogd", "olnm"),
                           sweep_param="kappa", sweep_values=(10.0, 0.1 + 0.2))
    back = ExperimentConfig(**parse_text(dump_config(cfg)))
    assert back == cfg and back.digest() == cfg.digest()


@pytest.mark.parametrize("text", ["problem = nope", "solvers = sgd", "kappa = 2\nmu = 0.5",
                                  "bogus = 1", "horizon = many", "noequals", "solvers = alg",
                                  "limsup = mean"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        ExperimentConfig(**parse_text(text))


def test_config_unreadable():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.cfg")


def test_csv_format():
    r = CsvRow("id", 0, 3, "iterate_error", 0.1 + 0.2, "a=1")
    assert r.cells() == ["id", "0", "3", "iterate_error", "0.30000000000000004", "a=1"]
    assert format_float(math.inf) == "inf" and format_float(None) == ""
    with pytest.raises(ValueError):
        CsvRow("id", 0, 0, "speed", 1.0)
    assert flag_dict("mean;of=iterate_error;diverged@4") == {
        "mean": "", "of": "iterate_error", "diverged@4": ""}


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False), st.one_of(st.none(), st.integers(0, 10**6),
                                             st.floats(1e-3, 1e6)))
def test_csv_round_trip_is_lossless(value, t):
    row = CsvRow("run", -1, t, "bound_value", value, "bound=x")
    back = CsvRow.parse(row.cells())
    assert back.value == value or (math.isinf(value) and back.value == value)
    assert back.t == (None if t is None else float(t))


def test_csv_file_round_trip(tmp_path):
    rows = [CsvRow("r", i, i, "rho", v, "") for i, v in enumerate([1 / 3, 2e-300, -7.5])]
    path = tmp_path / "x.csv"
    write_rows(str(path), rows)
    assert path.read_text().splitlines()[0] == ",".join(HEADER)
    back = read_rows(str(path))
    assert [r.value for r in back] == [r.value for r in rows]


def _cli(tmp_path, *args, out="out.csv"):
    path = tmp_path / out
    code = main(["run", "--out", str(path), *args])
    return code, path


def test_cli_run_translating_ogd_summary(tmp_path):
    code, path = _cli(tmp_path, "--seed", "1", "--reps", "2", "--set", "kappa=500",
                      "--set", "solvers=ogd")
    assert code == 0
    rows = read_rows(str(path))
    mean = [r for r in rows if r.replication == -1 and r.flags == "mean;of=iterate_error"]
    assert mean[0].value == pytest.approx(250.5, rel=1e-12)
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert meta["digest"] in rows[0].run_id


def test_cli_rotating_polyak_diverges(tmp_path):
    code, path = _cli(tmp_path, "--seed", "1", "--reps", "1", "--set", "problem=rotating",
                      "--set", "kappa=6", "--set", "solvers=polyak", "--set", "horizon=10000",
                      "--set", "series=none")
    assert code == 3
    rows = read_rows(str(path))
    assert any("diverged" in r.flags for r in rows)
    rho = [r.value for r in rows if r.metric_name == "rho"]
    assert rho and rho[0] > 1


def test_cli_online_nesterov_abstain_gradient_rows(tmp_path):
    code, path = _cli(tmp_path, "--seed", "1", "--reps", "1", "--set", "problem=online_nesterov",
                      "--set", "kappa=500", "--set", "solvers=abstain", "--set", "horizon=300")
    assert code == 0
    rows = read_rows(str(path))
    bound = [r.value for r in rows if r.flags == "bound=abstain_upper"][0]
    grads = [r.value for r in rows if r.metric_name == "gradient_error"]
    assert len(grads) == 300 and max(grads) <= bound


def test_cli_exit_codes(tmp_path, capsys):
    assert _cli(tmp_path, "--set", "kappa=10")[0] == 2          # no seed
    assert _cli(tmp_path, "--seed", "1")[0] == 2               # no kappa
    assert _cli(tmp_path, "--seed", "1", "--set", "kappa=10", out="no/dir/x.csv")[0] == 4
    assert main(["verify", "no_such_check"]) == 2
    assert main(["verify", "two_step_convergence"]) == 0
    assert json.loads(capsys.readouterr().out.splitlines()[-1])["passed"] is True
    assert main(["list-checks"]) == 0
    assert "ogd_tightness" in capsys.readouterr().out


def test_cli_config_file_and_paper_scale(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("problem = translating\nkappa = 10\nhorizon = 50\nseed = 2\nseries = none\n")
    code = main(["run", "--config", str(cfg), "--paper-scale", "--out", str(tmp_path / "p.csv")])
    assert code == 0
    reps = {r.replication for r in read_rows(str(tmp_path / "p.csv"))}
    assert max(reps) == 199


def test_reproducible_bytes(tmp_path):
    args = ["--seed", "5", "--reps", "3", "--set", "problem=least_squares", "--set", "kappa=30",
            "--set", "solvers=ogd,nesterov", "--set", "horizon=60"]
    _, a = _cli(tmp_path, *args, out="a.csv")
    _, b = _cli(tmp_path, *args, out="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_changes_data(tmp_path):
    base = ["--reps", "1", "--set", "problem=least_squares", "--set", "kappa=30",
            "--set", "horizon=20"]
    _, a = _cli(tmp_path, "--seed", "1", *base, out="a.csv")
    _, b = _cli(tmp_path, "--seed", "2", *base, out="b.csv")
    assert a.read_bytes() != b.read_bytes()


def test_single_point_sweep_equals_run():
    cfg = ExperimentConfig(problem="least_squares", seed=3, kappa=50.0, replications=3,
                           solvers=("ogd", "olnm_every_step"), horizon=150, series="none")
    run_rows, _ = experiments.run(cfg)
    sweep_cfg = ExperimentConfig(problem="least_squares", seed=3, replications=3,
                                 solvers=("ogd", "olnm_every_step"), horizon=150, series="none",
                                 sweep_param="kappa", sweep_values=(50.0,))
    sweep_rows, _, fits = experiments.sweep(sweep_cfg)
    key = lambda r: (r.run_id.split(".")[1], r.replication, r.metric_name, r.flags)
    summary = {key(r): r.value for r in run_rows}
    swept = {key(r): r.value for r in sweep_rows if r.metric_name != "fit_constant"}
    assert summary == swept
    fit_rows = [r for r in sweep_rows if r.metric_name == "fit_constant"]
    assert len(fit_rows) == 2 and all("insufficient_points" in r.flags for r in fit_rows)


def test_sweep_fit_on_translating_ogd():
    # OGD(2/(mu+L)) trails at (kappa+1)/2, so the fit on kappa is about 1/2
    cfg = ExperimentConfig(problem="translating", seed=0, solvers=("ogd",), replications=1,
                           horizon=400, sweep_param="kappa", sweep_values=(10.0, 40.0, 160.0),
                           fit="kappa", series="none")
    _, _, fits = experiments.sweep(cfg)
    x = np.array([10.0, 40.0, 160.0])
    assert fits["ogd"] == pytest.approx(float(x @ ((x + 1) / 2) / (x @ x)), rel=1e-12)


def test_sweep_needs_grid():
    with pytest.raises(ConfigError):
        experiments.sweep(ExperimentConfig(problem="translating", seed=0, kappa=10.0))


def test_logistic_run_with_auto_delta():
    cfg = ExperimentConfig(problem="logistic", seed=0, solvers=("orgd", "abstain"),
                           replications=3, horizon=200, series="none")
    rows, diverged = experiments.run(cfg)
    assert not diverged
    names = {r.flags for r in rows if r.metric_name == "bound_value"}
    assert {"bound=orgd_upper", "bound=abstain_upper", "bound=delta_star"} <= names


def test_check_catalog_descriptions():
    for name in checks.CHECKS:
        assert checks.describe(name)
    with pytest.raises(KeyError):
        checks.run_check("nope")
    res = checks.run_check("haar_orthogonality")
    assert json.dumps(res.to_json())
