"""
Optimistic least-squares value iteration (LSVI-UCB) over an arbitrary feature map.

Per stage h the learner keeps the ridge Gram matrix Lambda_h = lambda I + sum phi phi^T,
its inverse (maintained by Sherman-Morrison rank-1 updates) and the regression weights
w_h. After every episode all weights are refit backwards against all stored data:

    w_h = Lambda_h^{-1} sum_tau phi_tau [r_tau + max_a Q_{h+1}(s'_tau, a)]
    Q_h(s, a) = clip(w_h^T phi(s, a) + beta * ||phi(s, a)||_{Lambda_h^{-1}}, -V_max, V_max)
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from config import BONUS_SCALE, DELTA, RIDGE
from environments import Transcript
from errors import EmptyGridError, NumericalError

logger = logging.getLogger(__name__)


def choose_degree(K: int, d: int, nu: int) -> int:
    """
    Polynomial degree N = ceil(K^{1 / (d + 2(nu + 1))})

    Args:
        K: Number of episodes (>= 1)
        d: Dimension of the state-action space
        nu: Smoothness order

    Returns:
        Smallest integer N with N^{d + 2(nu + 1)} >= K
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    exponent = d + 2 * (nu + 1)
    degree = max(1, math.ceil(K ** (1.0 / exponent)))
    # guard the floating-point root against exact powers
    while degree > 1 and (degree - 1) ** exponent >= K:
        degree -= 1
    while degree ** exponent < K:
        degree += 1
    return degree


def bonus_scale(length: int, episodes: int, horizon: int, delta: float = DELTA, c_beta: float = BONUS_SCALE) -> float:
    """beta = c_beta * sqrt(N_tilde * log(2 N_tilde K H / delta))"""
    return c_beta * math.sqrt(length * math.log(2.0 * length * episodes * horizon / delta))


def state_action_points(state: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Rows (s, a) for one state and every action in `actions` (shape (G, d_A))"""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    state = np.asarray(state, dtype=float).reshape(1, -1)
    return np.hstack([np.repeat(state, actions.shape[0], axis=0), actions])


class StageData:
    """
    Transitions observed at one stage: features, rewards and the features of every
    (next state, grid action) pair, stored in arrays that grow by doubling
    """

    def __init__(self, length: int, n_grid: int, capacity: int = 64):
        self.length = length
        self.n_grid = n_grid
        self.size = 0
        self._features = np.empty((capacity, length))
        self._rewards = np.empty(capacity)
        self._next_features = np.empty((capacity, n_grid, length))

    def append(self, phi: np.ndarray, reward: float, next_phi: Optional[np.ndarray]):
        if self.size == self._rewards.shape[0]:
            capacity = 2 * self.size
            self._features = np.resize(self._features, (capacity, self.length))
            self._rewards = np.resize(self._rewards, capacity)
            self._next_features = np.resize(self._next_features, (capacity, self.n_grid, self.length))
        self._features[self.size] = phi
        self._rewards[self.size] = reward
        self._next_features[self.size] = 0.0 if next_phi is None else next_phi
        self.size += 1

    @property
    def features(self) -> np.ndarray:
        return self._features[:self.size]

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[:self.size]

    @property
    def next_features(self) -> np.ndarray:
        return self._next_features[:self.size]


@dataclass
class LsviState:
    horizon: int
    action_grid: np.ndarray
    gram: List[np.ndarray]
    gram_inverse: List[np.ndarray]
    weights: List[np.ndarray]
    data: List[StageData]
    beta: float
    ridge: float
    value_cap: float
    nonpositive: bool = False
    episodes_seen: int = 0

    @property
    def clip_range(self):
        return (-self.value_cap, 0.0) if self.nonpositive else (-self.value_cap, self.value_cap)


def new_lsvi_state(
    feature_map,
    horizon: int,
    action_grid: np.ndarray,
    beta: float,
    ridge: float = RIDGE,
    value_cap: float = 1.0,
    nonpositive: bool = False,
) -> LsviState:
    """Empty-data learner state: Lambda_h = lambda I and w_h = 0 for every stage"""
    if not ridge > 0:
        raise NumericalError(f"Ridge parameter must be positive, got {ridge}")
    action_grid = np.atleast_2d(np.asarray(action_grid, dtype=float))
    if action_grid.shape[0] == 0:
        raise EmptyGridError("Action grid is empty")
    length = feature_map.length
    return LsviState(
        horizon=horizon,
        action_grid=action_grid,
        gram=[ridge * np.eye(length) for _ in range(horizon)],
        gram_inverse=[np.eye(length) / ridge for _ in range(horizon)],
        weights=[np.zeros(length) for _ in range(horizon)],
        data=[StageData(length, action_grid.shape[0]) for _ in range(horizon)],
        beta=beta,
        ridge=ridge,
        value_cap=value_cap,
        nonpositive=nonpositive,
    )


def _q_from_features(state: LsviState, h: int, phi: np.ndarray) -> np.ndarray:
    """Clipped optimistic Q for feature rows of shape (..., N_tilde)"""
    flat = phi.reshape(-1, phi.shape[-1])
    means = flat @ state.weights[h]
    widths = np.einsum("ni,ni->n", flat @ state.gram_inverse[h], flat)
    q = means + state.beta * np.sqrt(np.maximum(widths, 0.0))
    low, high = state.clip_range
    return np.clip(q, low, high).reshape(phi.shape[:-1])


def _rank_one_update(state: LsviState, h: int, phi: np.ndarray):
    inverse = state.gram_inverse[h]
    projected = inverse @ phi
    denominator = 1.0 + float(phi @ projected)
    if not np.isfinite(denominator) or denominator <= 0.0:
        raise NumericalError(f"Gram matrix at stage {h} lost positive definiteness (check the ridge parameter)")
    state.gram[h] += np.outer(phi, phi)
    state.gram_inverse[h] = inverse - np.outer(projected, projected) / denominator


def update_after_episode(state: LsviState, transcript: Transcript, feature_map) -> LsviState:
    """
    Store an episode's transitions and refit all stage weights backwards

    Args:
        state: Learner state (modified in place and returned)
        transcript: Episode of exactly state.horizon steps
        feature_map: Feature map used by the learner

    Returns:
        The updated state
    """
    if transcript.horizon != state.horizon:
        raise ValueError(f"Transcript has {transcript.horizon} steps, learner horizon is {state.horizon}")

    for h, step in enumerate(transcript.steps):
        phi = feature_map.evaluate(state_action_points(step.state, step.action.reshape(1, -1)))[0]
        next_phi = None
        if h < state.horizon - 1:
            next_phi = feature_map.evaluate(state_action_points(transcript.next_state(h), state.action_grid))
        state.data[h].append(phi, step.reward, next_phi)
        _rank_one_update(state, h, phi)

    for h in reversed(range(state.horizon)):
        data = state.data[h]
        if data.size == 0:
            state.weights[h] = np.zeros(feature_map.length)
            continue
        targets = data.rewards.copy()
        if h < state.horizon - 1:
            targets += np.max(_q_from_features(state, h + 1, data.next_features), axis=1)
        weights = state.gram_inverse[h] @ (data.features.T @ targets)
        if not np.all(np.isfinite(weights)):
            raise NumericalError(f"Non-finite regression weights at stage {h}")
        state.weights[h] = weights

    state.episodes_seen += 1
    return state


def q_value(state: LsviState, h: int, s, a, feature_map) -> float:
    """Optimistic, clipped Q_h(s, a)"""
    phi = feature_map.evaluate(state_action_points(s, np.asarray(a, dtype=float).reshape(1, -1)))
    return float(_q_from_features(state, h, phi)[0])


def q_values(state: LsviState, h: int, s, actions, feature_map) -> np.ndarray:
    """Optimistic Q_h(s, .) over a batch of actions"""
    return _q_from_features(state, h, feature_map.evaluate(state_action_points(s, actions)))


def select_action(state: LsviState, h: int, s, action_grid, feature_map) -> np.ndarray:
    """Grid action maximizing the optimistic Q; ties go to the lowest grid index"""
    action_grid = np.atleast_2d(np.asarray(action_grid, dtype=float))
    if action_grid.size == 0:
        raise EmptyGridError("Action grid is empty")
    return action_grid[int(np.argmax(q_values(state, h, s, action_grid, feature_map)))]


class LsviAgent:
    """Binds a feature map and an LsviState into the act/observe interface of the harness"""

    def __init__(self, feature_map, state: LsviState):
        self.feature_map = feature_map
        self.state = state

    def begin_episode(self, rng: np.random.Generator):
        pass

    def act(self, h: int, s: np.ndarray) -> np.ndarray:
        return select_action(self.state, h, s, self.state.action_grid, self.feature_map)

    def observe(self, transcript: Transcript):
        update_after_episode(self.state, transcript, self.feature_map)
