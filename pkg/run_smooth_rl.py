"""
Command-line entry point

    python run_smooth_rl.py run --config configs/lqr_left.conf
    python run_smooth_rl.py validate --suite rate
    python run_smooth_rl.py oracle --env lqr_left
    python run_smooth_rl.py plot --in results/lqr_left/aggregate.csv --out fig.svg
    python run_smooth_rl.py summarize --dir results/lqr_left
    python run_smooth_rl.py status --dir results/lqr_left

Exit codes: 0 success, 2 config error, 3 numerical failure (including failed runs).
"""
import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np

from config import (
    EARLY_WINDOW,
    FINAL_WINDOW,
    ORACLE_ACTION_GRID,
    ORACLE_STATE_GRID,
    QUADRATURE_ORDER,
    REWARD_NOISE_STD,
    TRANSITION_NOISE_STD,
)
from errors import EXIT_NUMERICAL, EXIT_OK, ConfigError, SmoothRLError

logger = logging.getLogger("smooth_rl")

ORTHONORMALITY_TOLERANCE = 1e-10
RATE_CASES = [
    # name, function, smoothness, degrees, slope ceiling
    ("abs", np.abs, 0, [4, 8, 16, 32], -0.8),
    ("cos_pi", lambda x: np.cos(np.pi * x), 3, [4, 6, 8, 10], -3.0),
]
IBE_DEGREES = [2, 4, 6, 8]
IBE_TOLERANCE = 1e-3
IBE_SLOPE_CEILING = -1.0
POLYNOMIAL_IBE_CEILING = 1e-6


class Colors:
    RED = 'red'
    GREEN = 'green'
    YELLOW = 'yellow'


STATUS_COLORS = {'completed': Colors.GREEN, 'failed': Colors.RED}


def exits_with_error_codes(command):
    """Map library errors to the documented exit codes"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            code = command(*args, **kwargs)
        except SmoothRLError as e:
            click.secho(f"error: {e}", fg=Colors.RED, err=True)
            sys.exit(e.exit_code)
        except Exception as e:
            logger.error(f"Unexpected failure: {e}", exc_info=True)
            click.secho(f"error: {e}", fg=Colors.RED, err=True)
            sys.exit(EXIT_NUMERICAL)
        sys.exit(code or EXIT_OK)
    return wrapper


def _report(ok: bool, message: str):
    click.secho(("PASS " if ok else "FAIL ") + message, fg=Colors.GREEN if ok else Colors.RED)


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Smooth-MDP reinforcement learning experiments"""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--progress/--no-progress", default=True, help="Per-run episode progress bars")
@exits_with_error_codes
def run(config_path, progress):
    """Execute every (algorithm, degree, seed) run of an experiment file"""
    from experiment_config import load_config
    from harness import run_experiment

    config = load_config(config_path)
    record = run_experiment(config, show_progress=progress)
    click.echo(f"{len(record.raw)} return rows written to {config.output_dir}")
    if record.oracle_value is not None:
        click.echo(f"oracle value {record.oracle_value:.6f}")
    if record.failed_runs:
        click.secho(f"{len(record.failed_runs)} run(s) failed: {', '.join(record.failed_runs)}",
                    fg=Colors.RED, err=True)
        return EXIT_NUMERICAL
    return EXIT_OK


def _orthonormality_suite(max_degree: int) -> bool:
    from validation import orthonormality_report

    deviation = orthonormality_report(max_degree, QUADRATURE_ORDER)
    ok = deviation < ORTHONORMALITY_TOLERANCE
    _report(ok, f"orthonormality up to degree {max_degree}: max deviation {deviation:.3e}")
    return ok


def _rate_suite() -> bool:
    from validation import approximation_rate

    ok = True
    for name, f, smoothness, degrees, ceiling in RATE_CASES:
        fit = approximation_rate(f, smoothness, degrees)
        click.echo(f"# {name}")
        click.echo(fit.to_csv(), nl=False)
        passed = fit.fitted_slope <= ceiling
        _report(passed, f"{name}: slope {fit.fitted_slope:.3f} (ceiling {ceiling})")
        ok = ok and passed
    return ok


def _ibe_suite(theta_samples: int, seed: int) -> bool:
    from environments import PolynomialDensityMdpConfig, SmoothDensityMdpConfig
    from legendre_features import build_feature_map
    from rng import derive_stream
    from validation import empirical_ibe, fit_rate, ibe_decay

    smooth = SmoothDensityMdpConfig(horizon=2)
    maps = [build_feature_map(2, N) for N in IBE_DEGREES]
    estimates = ibe_decay(smooth, maps, theta_samples, lambda N: derive_stream(seed, "ibe", N))
    click.echo("degree,ibe")
    for N, value in zip(IBE_DEGREES, estimates):
        click.echo(f"{N},{value:.6e}")
    decreasing = all(b <= a + IBE_TOLERANCE for a, b in zip(estimates, estimates[1:]))
    _report(decreasing, f"IBE non-increasing over degrees {IBE_DEGREES}")
    slope = fit_rate(IBE_DEGREES, estimates).fitted_slope if min(estimates) > 0 else float("nan")
    decays = slope <= IBE_SLOPE_CEILING
    _report(decays, f"IBE slope {slope:.3f} over degrees {IBE_DEGREES} (ceiling {IBE_SLOPE_CEILING})")

    exact = empirical_ibe(PolynomialDensityMdpConfig(), build_feature_map(2, 2), theta_samples,
                          derive_stream(seed, "ibe", "polynomial")).value
    representable = exact < POLYNOMIAL_IBE_CEILING
    _report(representable, f"polynomial MDP IBE {exact:.3e} at degree 2")
    return decreasing and decays and representable


@cli.command()
@click.option("--suite", required=True, type=click.Choice(["orthonormality", "rate", "ibe"]))
@click.option("--max-degree", default=10, show_default=True, help="Orthonormality suite degree")
@click.option("--theta-samples", default=200, show_default=True, help="IBE suite theta draws")
@click.option("--seed", default=0, show_default=True)
@exits_with_error_codes
def validate(suite, max_degree, theta_samples, seed):
    """Numerical checks of the Legendre approximation claims"""
    if suite == "orthonormality":
        ok = _orthonormality_suite(max_degree)
    elif suite == "rate":
        ok = _rate_suite()
    else:
        ok = _ibe_suite(theta_samples, seed)
    return EXIT_OK if ok else EXIT_NUMERICAL


@cli.command()
@click.option("--env", "env_name", required=True,
              type=click.Choice(["lqr_left", "lqr_right", "synthetic_smooth", "tabular"]))
@click.option("--state-grid", default=ORACLE_STATE_GRID, show_default=True)
@click.option("--action-grid", default=ORACLE_ACTION_GRID, show_default=True)
@click.option("--transition-noise", default=TRANSITION_NOISE_STD, show_default=True)
@click.option("--reward-noise", default=REWARD_NOISE_STD, show_default=True)
@click.option("--horizon", default=None, type=int)
@click.option("--master-seed", default=0, show_default=True)
@exits_with_error_codes
def oracle(env_name, state_grid, action_grid, transition_noise, reward_noise, horizon, master_seed):
    """Print the optimal value V*_1(s_1) of an environment"""
    from dp_oracle import dp_oracle
    from harness import environment_by_name

    env = environment_by_name(env_name, transition_noise, reward_noise, horizon, master_seed)
    click.echo(f"{dp_oracle(env, state_grid, action_grid)!r}")
    return EXIT_OK


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--smoothing-window", default=1, show_default=True, help="Used when --in holds raw returns")
@click.option("--title", default=None)
@exits_with_error_codes
def plot(in_path, out_path, smoothing_window, title):
    """Render aggregate.csv (or raw returns.csv) as an SVG"""
    from harness import aggregate, read_table
    from plotting import plot_curves

    frame = read_table(in_path)
    if "mean" not in frame.columns:
        frame = aggregate(frame, smoothing_window)
    plot_curves(frame, out_path, title)
    return EXIT_OK


@cli.command()
@click.option("--dir", "output_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--window", default=FINAL_WINDOW, show_default=True, help="Final episodes compared per run")
@click.option("--early", default=EARLY_WINDOW, show_default=True, help="Episodes the regret extrapolation starts from")
@exits_with_error_codes
def summarize(output_dir, window, early):
    """Check the headline comparisons of a finished experiment"""
    from harness import acceptance_checks, read_table

    directory = Path(output_dir)
    returns_path = directory / "returns.csv"
    if not returns_path.exists():
        raise ConfigError(f"No returns.csv in {directory}")
    regret_path = directory / "regret.csv"
    regret = read_table(regret_path) if regret_path.exists() else None
    checks = acceptance_checks(read_table(returns_path), regret, window, early)
    if checks.empty:
        click.echo("No comparisons apply to this experiment")
        return EXIT_OK
    for row in checks.itertuples(index=False):
        _report(bool(row.passed), f"{row.check} {row.env} {row.algo} N={row.degree}: "
                                  f"{row.value:.6g} (threshold {row.threshold:g})")
    return EXIT_OK if checks["passed"].all() else EXIT_NUMERICAL


@cli.command()
@click.option("--dir", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--status", "status_filter", default=None,
              type=click.Choice(["pending", "processing", "completed", "failed"]))
@exits_with_error_codes
def status(output_dir, status_filter):
    """List the runs recorded in an experiment's ledger"""
    import database

    database.configure(Path(output_dir) / "runs.db")
    path = database.current_path()
    if not path.exists():
        raise ConfigError(f"No run ledger at {path}")
    runs = database.get_all_runs(status_filter)
    click.echo(f"Ledger {path}: {len(runs)} run(s)")
    for run in runs:
        line = f"{run['run_id']}  {run['status']}  {run['episodes_done']}/{run['episodes_total']}"
        if run["error_message"]:
            line += f"  {run['error_message']}"
        click.secho(line, fg=STATUS_COLORS.get(run["status"], Colors.YELLOW))
    return EXIT_OK


if __name__ == "__main__":
    cli()
