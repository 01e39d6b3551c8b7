"""
Optimal-value oracles used to turn episodic returns into regret.

Continuous environments are solved by backward value iteration on a tensor-product
state grid with multilinear interpolation; expectations over Gaussian transition noise
use an 8-node Gauss-Hermite rule per noise coordinate, expectations over closed-form
densities use Gauss-Legendre quadrature. Finite MDPs are solved exactly.
"""
import itertools
import logging

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from config import (
    ORACLE_ACTION_GRID,
    ORACLE_CHUNK_STATES,
    ORACLE_HERMITE_ORDER,
    ORACLE_MEMORY_CAP,
    ORACLE_STATE_GRID,
    QUADRATURE_ORDER,
)
from environments import DensityMdp, SquashedLqr, TabularMdp, TabularMdpConfig
from errors import ResolutionError
from legendre_features import gauss_legendre

logger = logging.getLogger(__name__)


def gaussian_noise_rule(std: float, dimension: int, order: int = ORACLE_HERMITE_ORDER):
    """Tensor Gauss-Hermite nodes (M, dimension) and weights (M,) for N(0, std^2 I)"""
    if std == 0.0:
        return np.zeros((1, dimension)), np.ones(1)
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    grid = np.array(list(itertools.product(nodes, repeat=dimension))) * std
    grid_weights = np.array([np.prod(w) for w in itertools.product(weights, repeat=dimension)])
    return grid, grid_weights


def tabular_q_star(cfg: TabularMdpConfig) -> np.ndarray:
    """Exact optimal Q-values, shape (H, S, A)"""
    q = np.zeros((cfg.horizon, cfg.n_states, cfg.n_actions))
    following = np.zeros(cfg.n_states)
    for h in reversed(range(cfg.horizon)):
        q[h] = cfg.rewards + cfg.transitions @ following
        following = q[h].max(axis=1)
    return q


def _lqr_oracle(env: SquashedLqr, state_resolution: int, action_resolution: int) -> float:
    cfg = env.cfg
    d_s = cfg.state_dim
    if d_s > 2:
        raise ResolutionError(f"Grid oracle supports state dimension <= 2, got {d_s}")
    axes = [np.linspace(-1.0, 1.0, state_resolution)] * d_s
    states = np.array(list(itertools.product(*axes)))
    actions = env.action_grid(action_resolution)
    noise, noise_weights = gaussian_noise_rule(cfg.noise_std, d_s)
    queries = states.shape[0] * actions.shape[0] * noise.shape[0]
    if queries > ORACLE_MEMORY_CAP:
        raise ResolutionError(f"Oracle grid needs {queries} interpolation queries per stage (cap {ORACLE_MEMORY_CAP})")

    def successors(origin):
        drift = origin @ cfg.A.T
        pushed = drift[:, None, :] + (actions @ cfg.B.T)[None, :, :]
        raw = pushed[:, :, None, :] + noise[None, None, :, :]
        return raw / (1.0 + np.linalg.norm(raw, axis=-1, keepdims=True))

    def backup(origin, value_grid):
        rewards = env.mean_reward(np.repeat(origin, actions.shape[0], axis=0), np.tile(actions, (origin.shape[0], 1)))
        rewards = rewards.reshape(origin.shape[0], actions.shape[0])
        if value_grid is None:
            return rewards
        interpolator = RegularGridInterpolator(axes, value_grid.reshape([state_resolution] * d_s),
                                               method="linear", bounds_error=False, fill_value=None)
        expected = np.empty_like(rewards)
        for start in range(0, origin.shape[0], ORACLE_CHUNK_STATES):
            chunk = slice(start, start + ORACLE_CHUNK_STATES)
            following = successors(origin[chunk])
            expected[chunk] = interpolator(following.reshape(-1, d_s)).reshape(following.shape[:3]) @ noise_weights
        return rewards + expected

    value = None
    for _ in range(cfg.horizon - 1):
        value = backup(states, value).max(axis=1)
    return float(backup(cfg.initial_state.reshape(1, -1), value).max())


def _density_oracle(env: DensityMdp, state_resolution: int, action_resolution: int) -> float:
    cfg = env.cfg
    states = np.linspace(-1.0, 1.0, state_resolution)
    actions = np.linspace(-1.0, 1.0, action_resolution)
    nodes, weights = gauss_legendre(QUADRATURE_ORDER)

    def backup(origin, value_grid):
        s, a = np.meshgrid(origin, actions, indexing="ij")
        rewards = np.asarray(cfg.reward_fn(s, a), dtype=float)
        if value_grid is None:
            return rewards
        following = np.interp(nodes, states, value_grid)
        density = cfg.density(nodes[None, None, :], s[:, :, None], a[:, :, None])
        return rewards + density @ (weights * following)

    value = None
    for _ in range(cfg.horizon - 1):
        value = backup(states, value).max(axis=1)
    return float(backup(np.array([float(cfg.initial_state)]), value).max())


def dp_oracle(
    env,
    state_resolution: int = ORACLE_STATE_GRID,
    action_resolution: int = ORACLE_ACTION_GRID,
) -> float:
    """
    Estimated optimal value V*_1(s_1)

    Args:
        env: SquashedLqr, DensityMdp or TabularMdp
        state_resolution: Grid points per state coordinate
        action_resolution: Grid points per action coordinate

    Returns:
        Optimal expected return from the initial state over grid policies
    """
    if isinstance(env, TabularMdp):
        return float(tabular_q_star(env.cfg)[0, env.cfg.initial_state].max())
    if isinstance(env, SquashedLqr):
        value = _lqr_oracle(env, state_resolution, action_resolution)
    elif isinstance(env, DensityMdp):
        value = _density_oracle(env, state_resolution, action_resolution)
    else:
        raise ResolutionError(f"No oracle for environment type {type(env).__name__}")
    logger.info(f"Oracle value {value:.6f} (state grid {state_resolution}, action grid {action_resolution})")
    return value
