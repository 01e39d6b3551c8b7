"""
Experiment runner: every (algorithm, degree, seed) combination of a config is one run.

Runs execute concurrently on a RunQueue, each with private env/learner streams derived
from (master seed, environment, algorithm, degree, seed index, seed, purpose). Each run
writes its own part file under <output_dir>/runs/; once all runs finish the parts are
merged in config order into returns.csv, then aggregated into aggregate.csv.
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

import database
from config import (
    BENCHMARK_HORIZON,
    CI_Z,
    EARLY_WINDOW,
    ELEANOR_MAX_FEATURES,
    ELEANOR_MAX_HORIZON,
    FINAL_WINDOW,
    MAX_WORKERS,
    REWARD_NOISE_STD,
    SUBLINEAR_RATIO,
    TRANSITION_NOISE_STD,
)
from dp_oracle import dp_oracle
from eleanor import EleanorAgent
from environments import (
    DensityMdp,
    Environment,
    SmoothDensityMdpConfig,
    SquashedLqr,
    TabularMdp,
    benchmark_environments,
    random_tabular_mdp,
    run_episode,
)
from errors import ConfigError, InsufficientSeedsError
from experiment_config import ExperimentConfig
from legendre_features import FeatureKind, OneHotFeatureMap, build_feature_map
from lsvi_ucb import LsviAgent, bonus_scale, new_lsvi_state
from rng import RNG_RULE_VERSION, derive_stream
from run_queue import RunQueue

logger = logging.getLogger(__name__)

RAW_COLUMNS = ["env", "algo", "degree", "seed", "episode", "return"]
AGGREGATE_COLUMNS = ["env", "algo", "degree", "episode", "mean", "ci_lo", "ci_hi"]
FLOAT_FORMAT = "%.17g"
MONOTONICITY_TOLERANCE = 1e-9
ACCEPTANCE_COLUMNS = ["check", "env", "algo", "degree", "value", "threshold", "passed"]


@dataclass(frozen=True)
class RunSpec:
    environment: str
    algorithm: str
    degree: int
    seed_index: int
    seed: int

    @property
    def run_id(self) -> str:
        return f"{self.environment}__{self.algorithm}__N{self.degree}__seed{self.seed}"

    def stream(self, master_seed: int, purpose: str) -> np.random.Generator:
        return derive_stream(master_seed, self.environment, self.algorithm, self.degree,
                             self.seed_index, self.seed, purpose)


@dataclass
class RunRecord:
    raw: pd.DataFrame
    aggregate: Optional[pd.DataFrame] = None
    failed_runs: List[str] = field(default_factory=list)
    oracle_value: Optional[float] = None
    regret: Optional[pd.DataFrame] = None


def environment_by_name(
    name: str,
    transition_noise: float = TRANSITION_NOISE_STD,
    reward_noise: float = REWARD_NOISE_STD,
    horizon: Optional[int] = None,
    master_seed: int = 0,
) -> Environment:
    """
    Instantiate a shipped environment

    Args:
        name: lqr_left, lqr_right, synthetic_smooth or tabular
        transition_noise: sigma_xi for the LQRs
        reward_noise: sigma_eta
        horizon: Override of the environment's default horizon
        master_seed: Seed of the `tabular` stream that draws the tabular kernel
    """
    overrides = {"horizon": horizon} if horizon else {}
    if name in ("lqr_left", "lqr_right"):
        left, right = benchmark_environments(transition_noise, reward_noise, horizon or BENCHMARK_HORIZON)
        return SquashedLqr(left if name == "lqr_left" else right)
    if name == "synthetic_smooth":
        return DensityMdp(SmoothDensityMdpConfig(reward_noise_std=reward_noise, **overrides))
    if name == "tabular":
        return TabularMdp(random_tabular_mdp(derive_stream(master_seed, "tabular"),
                                             reward_noise_std=reward_noise, **overrides))
    raise ConfigError(f"Unknown environment {name!r}")


def build_environment(config: ExperimentConfig) -> Environment:
    return environment_by_name(config.environment, config.transition_noise, config.reward_noise,
                               config.horizon, config.master_seed)


def plan_runs(config: ExperimentConfig, env: Environment) -> List[RunSpec]:
    """All runs of a config in output order: algorithm, then degree, then seed"""
    degrees = config.resolved_degrees()
    dimension = env.state_dim + env.action_dim
    specs = []
    for algorithm in config.algorithm:
        algorithm_degrees = [0] if algorithm == "onehot_lsvi" else degrees
        for degree in algorithm_degrees:
            if algorithm == "legendre_eleanor":
                length = math.comb(degree + dimension, dimension)
                if length > ELEANOR_MAX_FEATURES or env.horizon > ELEANOR_MAX_HORIZON:
                    raise ConfigError(
                        f"legendre_eleanor needs at most {ELEANOR_MAX_FEATURES} features and horizon "
                        f"{ELEANOR_MAX_HORIZON}, degree {degree} gives {length} with horizon {env.horizon}"
                    )
            for seed_index, seed in enumerate(config.seeds):
                specs.append(RunSpec(config.environment, algorithm, degree, seed_index, seed))
    return specs


def make_learner(config: ExperimentConfig, env: Environment, spec: RunSpec):
    """Fresh learner for one run"""
    horizon = env.horizon
    grid = env.action_grid(config.action_grid)
    if spec.algorithm == "onehot_lsvi":
        feature_map = OneHotFeatureMap(env.cfg.n_states, env.cfg.n_actions)
    else:
        kind = FeatureKind.MONOMIAL if spec.algorithm == "monomial_lsvi" else FeatureKind.LEGENDRE
        feature_map = build_feature_map(env.state_dim + env.action_dim, spec.degree, kind)
    beta = bonus_scale(feature_map.length, config.episodes, horizon, config.delta, config.bonus_scale)
    reward_bound = env.reward_bound()
    if spec.algorithm == "legendre_eleanor":
        return EleanorAgent(feature_map, horizon, grid, env.initial_state, ridge_radius=beta,
                            reward_bound=reward_bound, base=config.eleanor_base, budget=config.eleanor_budget,
                            ridge=config.ridge, slack=config.eleanor_slack)
    state = new_lsvi_state(feature_map, horizon, grid, beta, config.ridge,
                           value_cap=horizon * reward_bound, nonpositive=env.rewards_nonpositive)
    return LsviAgent(feature_map, state)


def run_fingerprint(config: ExperimentConfig, spec: RunSpec) -> str:
    """Hash of every setting that determines one run's returns"""
    settings = config.model_dump(exclude={"algorithm", "degree", "seeds", "output_dir", "plot", "oracle",
                                          "smoothing_window"})
    settings.update(algorithm=spec.algorithm, degree=spec.degree, seed_index=spec.seed_index, seed=spec.seed)
    return hashlib.sha256(json.dumps(settings, sort_keys=True).encode("utf-8")).hexdigest()


def _write_part(path: Path, spec: RunSpec, returns: Sequence[float]):
    frame = pd.DataFrame({
        "env": spec.environment,
        "algo": spec.algorithm,
        "degree": spec.degree,
        "seed": spec.seed,
        "episode": np.arange(len(returns), dtype=int),
        "return": np.asarray(returns, dtype=float),
    }, columns=RAW_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def execute_run(config: ExperimentConfig, env: Environment, spec: RunSpec, part_path: Path,
                show_progress: bool = False) -> int:
    """
    Run K episodes of one learner, recording each episode's return

    Args:
        config: Experiment config
        env: Environment (immutable, shared between runs)
        spec: Run identity
        part_path: Destination of the per-run CSV (written even when the run fails)
        show_progress: Display a tqdm bar over episodes

    Returns:
        Number of completed episodes
    """
    database.create_run(spec.run_id, config.episodes, run_fingerprint(config, spec))
    database.update_run_status(spec.run_id, "processing")
    env_rng = spec.stream(config.master_seed, "env")
    learner_rng = spec.stream(config.master_seed, "learner")
    report_every = max(1, config.episodes // 20)
    returns: List[float] = []
    try:
        agent = make_learner(config, env, spec)
        for k in tqdm(range(config.episodes), desc=spec.run_id, leave=False, disable=not show_progress):
            agent.begin_episode(learner_rng)
            transcript = run_episode(env, agent.act, env_rng, episode_index=k)
            agent.observe(transcript)
            returns.append(transcript.total_return)
            if (k + 1) % report_every == 0:
                database.update_run_status(spec.run_id, "processing", episodes_done=k + 1)
    except Exception as e:
        database.update_run_status(spec.run_id, "failed", error_message=str(e), episodes_done=len(returns))
        raise
    finally:
        _write_part(part_path, spec, returns)
    database.update_run_status(spec.run_id, "completed", episodes_done=len(returns))
    return len(returns)


def output_header(config: ExperimentConfig) -> str:
    return f"# master_seed={config.master_seed}; rng_rule={RNG_RULE_VERSION}; config_sha256={config.config_hash()}\n"


def write_table(frame: pd.DataFrame, path: Path, header: str = ""):
    """CSV with an optional leading comment line; bytes depend only on the frame"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header)
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def aggregate(raw: pd.DataFrame, smoothing_window: int = 1, z: float = CI_Z) -> pd.DataFrame:
    """
    Per-episode mean return and normal-approximation confidence band across seeds

    Args:
        raw: Rows of env, algo, degree, seed, episode, return
        smoothing_window: Trailing moving-average window applied per seed (1 = none)
        z: Normal quantile of the band

    Returns:
        Rows of env, algo, degree, episode, mean, ci_lo, ci_hi in first-appearance order
    """
    if raw.empty:
        raise InsufficientSeedsError("No returns to aggregate")
    frame = raw.copy()
    if smoothing_window > 1:
        frame["return"] = frame.groupby(["env", "algo", "degree", "seed"], sort=False)["return"].transform(
            lambda series: series.rolling(smoothing_window, min_periods=1).mean()
        )
    stats = frame.groupby(["env", "algo", "degree", "episode"], sort=False)["return"].agg(["mean", "std", "count"])
    stats = stats.reset_index()
    if (stats["count"] < 2).any():
        short = stats.loc[stats["count"] < 2, ["algo", "degree", "episode"]].iloc[0].tolist()
        raise InsufficientSeedsError(f"Confidence intervals need at least two seeds, {short} has fewer")
    half_width = z * stats["std"] / np.sqrt(stats["count"])
    stats["ci_lo"] = stats["mean"] - half_width
    stats["ci_hi"] = stats["mean"] + half_width
    return stats[AGGREGATE_COLUMNS]


def _warn_on_negative_gaps(gaps: np.ndarray):
    violations = int(np.sum(gaps < -MONOTONICITY_TOLERANCE))
    if violations:
        logger.warning(f"Cumulative regret decreased in {violations} episode(s): oracle value may be an underestimate")


def regret_curve(returns: Sequence[float], oracle_value: float) -> np.ndarray:
    """Partial sums of (oracle_value - episodic return)"""
    gaps = oracle_value - np.asarray(returns, dtype=float)
    _warn_on_negative_gaps(gaps)
    return np.cumsum(gaps)


def regret_frame(raw: pd.DataFrame, oracle_value: float) -> pd.DataFrame:
    """Raw rows with a per-run cumulative `regret` column"""
    frame = raw.copy()
    gaps = oracle_value - frame["return"]
    _warn_on_negative_gaps(gaps.to_numpy())
    frame["regret"] = gaps.groupby([frame["env"], frame["algo"], frame["degree"], frame["seed"]], sort=False).cumsum()
    return frame


def final_return_means(raw: pd.DataFrame, window: int = FINAL_WINDOW) -> pd.DataFrame:
    """Mean return over the last `window` episodes of each run, averaged over seeds"""
    last = raw.groupby(["env", "algo", "degree", "seed"], sort=False)["episode"].transform("max")
    tail = raw[raw["episode"] > last - window]
    means = tail.groupby(["env", "algo", "degree"], sort=False)["return"].mean()
    return means.rename("final_mean").reset_index()


def acceptance_checks(raw: pd.DataFrame, regret: Optional[pd.DataFrame] = None,
                      window: int = FINAL_WINDOW, early: int = EARLY_WINDOW,
                      ratio_ceiling: float = SUBLINEAR_RATIO) -> pd.DataFrame:
    """
    Headline comparisons of an experiment's outputs

    `legendre_beats_monomial`: at each degree run with both feature kinds, the final-window
    mean return of legendre_lsvi minus that of monomial_lsvi (passes when > 0).
    `sublinear_regret`: seed-averaged cumulative regret after all K episodes divided by the
    seed-averaged regret of the first `early` episodes scaled by K / early (passes when
    below `ratio_ceiling`). Only runs longer than `early` episodes are checked.

    Returns:
        Rows of check, env, algo, degree, value, threshold, passed
    """
    rows = []
    means = final_return_means(raw, window).set_index(["env", "algo", "degree"])["final_mean"]
    for (env, algo, degree), value in means.items():
        if algo != "legendre_lsvi" or (env, "monomial_lsvi", degree) not in means.index:
            continue
        gap = float(value - means[(env, "monomial_lsvi", degree)])
        rows.append(("legendre_beats_monomial", env, algo, degree, gap, 0.0, gap > 0.0))

    if regret is not None:
        for (env, algo, degree), frame in regret.groupby(["env", "algo", "degree"], sort=False):
            runs = frame.groupby("seed", sort=False)
            episodes = int(runs["episode"].count().min())
            if episodes <= early:
                continue
            final = runs["regret"].last().mean()
            extrapolated = frame[frame["episode"] == early - 1]["regret"].mean() * episodes / early
            ratio = float(final / extrapolated) if extrapolated > 0 else math.inf
            rows.append(("sublinear_regret", env, algo, degree, ratio, ratio_ceiling, ratio < ratio_ceiling))
    return pd.DataFrame(rows, columns=ACCEPTANCE_COLUMNS)


def run_experiment(config: ExperimentConfig, show_progress: bool = False) -> RunRecord:
    """
    Execute every run of a config and write its outputs

    Args:
        config: Validated experiment config
        show_progress: Display per-run tqdm bars

    Returns:
        RunRecord with raw rows, aggregate rows (None when fewer than two seeds or when a
        run failed), the ids of failed runs and, if requested, the oracle value and regret
    """
    output_dir = Path(config.output_dir)
    parts_dir = output_dir / "runs"
    parts_dir.mkdir(parents=True, exist_ok=True)
    database.configure(output_dir / "runs.db")
    database.init_database()

    env = build_environment(config)
    specs = plan_runs(config, env)
    queue = RunQueue(max_workers=min(MAX_WORKERS, len(specs)))
    queue.start()
    for spec in specs:
        part_path = parts_dir / f"{spec.run_id}.csv"
        if database.get_completed_run_by_hash(run_fingerprint(config, spec)) and part_path.exists():
            logger.warning(f"Reusing completed run {spec.run_id} from {part_path}")
            continue
        queue.add_run(spec.run_id, execute_run, config, env, spec, part_path, show_progress)
    queue.join()
    queue.stop()
    failed = queue.failed_runs()

    parts = [parts_dir / f"{spec.run_id}.csv" for spec in specs]
    raw = pd.concat([pd.read_csv(path) for path in parts if path.exists()], ignore_index=True)
    raw = raw[RAW_COLUMNS]
    header = output_header(config)
    write_table(raw, output_dir / "returns.csv", header)
    logger.info(f"Wrote {len(raw)} return rows to {output_dir / 'returns.csv'}")
    record = RunRecord(raw=raw, failed_runs=failed)

    if failed:
        for run_id in failed:
            logger.error(f"Run {run_id} failed: {queue.get_run_info(run_id)['error']}")
        logger.error(f"{len(failed)} run(s) failed, skipping aggregation: {', '.join(failed)}")
        return record

    if len(config.seeds) >= 2:
        record.aggregate = aggregate(raw, config.smoothing_window)
        write_table(record.aggregate, output_dir / "aggregate.csv", header)
        if config.plot:
            from plotting import plot_curves
            plot_curves(record.aggregate, output_dir / "returns.svg")
    else:
        logger.warning("Single seed: no confidence intervals written")

    if config.oracle:
        record.oracle_value = dp_oracle(env, action_resolution=config.action_grid)
        record.regret = regret_frame(raw, record.oracle_value)
        write_table(record.regret, output_dir / "regret.csv",
                    header + f"# oracle_value={record.oracle_value!r}\n")
    return record
