import pandas as pd
import pytest
from click.testing import CliRunner

import harness
from dp_oracle import dp_oracle
from environments import run_episode
from harness import environment_by_name
from run_smooth_rl import cli


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, extra=""):
    path = tmp_path / "small.conf"
    path.write_text(
        "environment = synthetic_smooth\n"
        "algorithm = legendre_lsvi\n"
        "degree = 2\n"
        "episodes = 3\n"
        "seeds = 0, 1\n"
        "horizon = 2\n"
        f"output_dir = {tmp_path / 'out'}\n" + extra
    )
    return path


def test_run_succeeds(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--config", str(write_config(tmp_path)), "--no-progress"])
    assert result.exit_code == 0, result.output
    assert "6 return rows" in result.output
    assert (tmp_path / "out" / "aggregate.csv").exists()


def test_config_errors_exit_with_code_2(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--config", str(write_config(tmp_path, "colour = blue\n"))])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["run", "--config", str(tmp_path / "absent.conf")])
    assert result.exit_code == 2


def test_failed_runs_exit_with_code_3(runner, tmp_path, monkeypatch):
    def flaky(env, policy, rng, episode_index=0):
        if episode_index == 1:
            raise FloatingPointError("diverged")
        return run_episode(env, policy, rng, episode_index)

    monkeypatch.setattr(harness, "run_episode", flaky)
    result = runner.invoke(cli, ["run", "--config", str(write_config(tmp_path)), "--no-progress"])
    assert result.exit_code == 3
    assert "2 run(s) failed" in result.output


def test_validate_orthonormality(runner):
    result = runner.invoke(cli, ["validate", "--suite", "orthonormality", "--max-degree", "12"])
    assert result.exit_code == 0
    assert "PASS orthonormality up to degree 12" in result.output


def test_validate_rate(runner):
    result = runner.invoke(cli, ["validate", "--suite", "rate"])
    assert result.exit_code == 0, result.output
    assert "# abs" in result.output and "# cos_pi" in result.output
    assert "FAIL" not in result.output


def test_oracle_prints_the_exact_value(runner):
    result = runner.invoke(cli, ["oracle", "--env", "tabular", "--horizon", "3", "--master-seed", "5"])
    assert result.exit_code == 0
    expected = dp_oracle(environment_by_name("tabular", horizon=3, master_seed=5))
    assert result.output.strip().splitlines()[-1] == repr(expected)


def test_plot_from_raw_returns(runner, tmp_path):
    runner.invoke(cli, ["run", "--config", str(write_config(tmp_path)), "--no-progress"])
    out = tmp_path / "fig.svg"
    result = runner.invoke(cli, ["plot", "--in", str(tmp_path / "out" / "returns.csv"), "--out", str(out),
                                 "--smoothing-window", "2"])
    assert result.exit_code == 0, result.output
    assert out.read_bytes().startswith(b"<?xml")


def test_plot_of_single_seed_is_a_numerical_error(runner, tmp_path):
    single = tmp_path / "single.csv"
    single.write_text("env,algo,degree,seed,episode,return\nlqr_left,legendre_lsvi,3,0,0,-1.0\n")
    result = runner.invoke(cli, ["plot", "--in", str(single), "--out", str(tmp_path / "fig.svg")])
    assert result.exit_code == 3


def write_returns(directory, late_legendre):
    rows = []
    for algo, late in (("legendre_lsvi", late_legendre), ("monomial_lsvi", -2.0)):
        for seed in (0, 1):
            for k in range(120):
                rows.append(("lqr_right", algo, 3, seed, k, -5.0 if k < 20 else late))
    directory.mkdir()
    harness.write_table(pd.DataFrame(rows, columns=harness.RAW_COLUMNS), directory / "returns.csv", "# test\n")


def test_summarize_reports_each_comparison(runner, tmp_path):
    write_returns(tmp_path / "good", late_legendre=-1.0)
    result = runner.invoke(cli, ["summarize", "--dir", str(tmp_path / "good")])
    assert result.exit_code == 0, result.output
    assert "PASS legendre_beats_monomial lqr_right legendre_lsvi N=3: 1" in result.output

    write_returns(tmp_path / "bad", late_legendre=-3.0)
    result = runner.invoke(cli, ["summarize", "--dir", str(tmp_path / "bad")])
    assert result.exit_code == 3
    assert "FAIL legendre_beats_monomial" in result.output


def test_summarize_without_comparisons_or_returns(runner, tmp_path):
    runner.invoke(cli, ["run", "--config", str(write_config(tmp_path)), "--no-progress"])
    result = runner.invoke(cli, ["summarize", "--dir", str(tmp_path / "out")])
    assert result.exit_code == 0
    assert "No comparisons apply" in result.output

    (tmp_path / "empty").mkdir()
    result = runner.invoke(cli, ["summarize", "--dir", str(tmp_path / "empty")])
    assert result.exit_code == 2


def test_status_lists_the_ledger(runner, tmp_path):
    runner.invoke(cli, ["run", "--config", str(write_config(tmp_path)), "--no-progress"])
    result = runner.invoke(cli, ["status", "--dir", str(tmp_path / "out")])
    assert result.exit_code == 0, result.output
    assert f"Ledger {tmp_path / 'out' / 'runs.db'}: 2 run(s)" in result.output
    assert result.output.count("completed  3/3") == 2

    result = runner.invoke(cli, ["status", "--dir", str(tmp_path / "out"), "--status", "failed"])
    assert "0 run(s)" in result.output

    result = runner.invoke(cli, ["status", "--dir", str(tmp_path / "nowhere")])
    assert result.exit_code == 2
