"""
Episodic simulators.

Stages are indexed 0..H-1 in code. Each step consumes random draws in a fixed order:
transition noise first, reward noise second. Draws happen even when the corresponding
standard deviation is zero so a stream's position depends only on the step count.
"""
import io
import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import erf, erfinv

from config import (
    ACTION_GRID_SIZE,
    BENCHMARK_HORIZON,
    REWARD_NOISE_STD,
    SMOOTH_MDP_CONCENTRATION,
    SMOOTH_MDP_HORIZON,
    TABULAR_ACTIONS,
    TABULAR_HORIZON,
    TABULAR_STATES,
    TRANSITION_NOISE_STD,
)
from errors import DomainError, ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Step:
    state: np.ndarray
    action: np.ndarray
    reward: float


@dataclass
class Transcript:
    """Record of one episode: H (state, action, reward) steps plus the final state"""
    steps: List[Step]
    episode_index: int
    final_state: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def total_return(self) -> float:
        return float(sum(step.reward for step in self.steps))

    def next_state(self, h: int) -> np.ndarray:
        """State reached after stage h"""
        if h + 1 < len(self.steps):
            return self.steps[h + 1].state
        return self.final_state

    def to_csv(self) -> str:
        """Deterministic serialization, one row per step"""
        buffer = io.StringIO()
        d_s = self.steps[0].state.size if self.steps else 0
        d_a = self.steps[0].action.size if self.steps else 0
        header = ["episode", "stage"] + [f"s{i}" for i in range(d_s)] + [f"a{i}" for i in range(d_a)] + ["reward"]
        buffer.write(",".join(header) + "\n")
        for h, step in enumerate(self.steps):
            values = [repr(float(v)) for v in step.state] + [repr(float(v)) for v in step.action]
            buffer.write(",".join([str(self.episode_index), str(h)] + values + [repr(float(step.reward))]) + "\n")
        return buffer.getvalue()


class Environment(ABC):
    """Episodic simulator contract used by the learners, the oracle and the harness"""
    horizon: int
    state_dim: int
    action_dim: int

    @property
    @abstractmethod
    def initial_state(self) -> np.ndarray:
        ...

    @abstractmethod
    def step(self, state: np.ndarray, action: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
        ...

    @abstractmethod
    def reward_bound(self) -> float:
        """Supremum of the noiseless per-step |reward| over reachable states and actions"""

    @property
    def rewards_nonpositive(self) -> bool:
        return False

    def action_grid(self, points_per_dim: int = ACTION_GRID_SIZE) -> np.ndarray:
        """Uniform candidate grid over [-1, 1]^{d_A}, shape (G, d_A)"""
        axis = np.linspace(-1.0, 1.0, points_per_dim)
        return np.array(list(itertools.product(axis, repeat=self.action_dim)), dtype=float)

    def _check_shapes(self, state: np.ndarray, action: np.ndarray):
        if state.shape != (self.state_dim,):
            raise ShapeMismatchError(f"State shape {state.shape} != ({self.state_dim},)")
        if action.shape != (self.action_dim,):
            raise ShapeMismatchError(f"Action shape {action.shape} != ({self.action_dim},)")


def squash(x) -> np.ndarray:
    """Map x to x / (1 + ||x||_2), inside the open unit ball"""
    x = np.asarray(x, dtype=float)
    return x / (1.0 + np.linalg.norm(x))


@dataclass(frozen=True)
class SquashedLqrConfig:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    noise_std: float = TRANSITION_NOISE_STD
    reward_noise_std: float = REWARD_NOISE_STD
    horizon: int = BENCHMARK_HORIZON
    initial_state: Optional[np.ndarray] = None
    name: str = "lqr"

    def __post_init__(self):
        for key in ("A", "B", "Q", "R"):
            object.__setattr__(self, key, np.atleast_2d(np.asarray(getattr(self, key), dtype=float)))
        d_s, d_a = self.B.shape
        if self.A.shape != (d_s, d_s) or self.Q.shape != (d_s, d_s) or self.R.shape != (d_a, d_a):
            raise ShapeMismatchError(
                f"Inconsistent LQR shapes: A {self.A.shape}, B {self.B.shape}, Q {self.Q.shape}, R {self.R.shape}"
            )
        for key in ("Q", "R"):
            matrix = getattr(self, key)
            if not np.allclose(matrix, matrix.T) or np.linalg.eigvalsh(matrix)[0] < -1e-12:
                raise ValueError(f"{key} must be symmetric positive semidefinite")
        if self.horizon < 1:
            raise ValueError(f"Horizon must be >= 1, got {self.horizon}")
        if self.noise_std < 0 or self.reward_noise_std < 0:
            raise ValueError("Noise standard deviations must be non-negative")
        s1 = np.zeros(d_s) if self.initial_state is None else np.asarray(self.initial_state, dtype=float)
        if s1.shape != (d_s,) or np.linalg.norm(s1) >= 1.0:
            raise ValueError(f"Initial state must lie in the open unit ball of R^{d_s}")
        object.__setattr__(self, "initial_state", s1)

    @property
    def state_dim(self) -> int:
        return self.B.shape[0]

    @property
    def action_dim(self) -> int:
        return self.B.shape[1]


def lqr_step(cfg: SquashedLqrConfig, s, a, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """
    One squashed-LQR transition

    Args:
        cfg: Environment configuration
        s: State in the open unit ball
        a: Action in [-1, 1]^{d_A}
        rng: Random stream (transition noise drawn first, reward noise second)

    Returns:
        (squash(A s + B a + xi), -s'Qs - a'Ra + eta)
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    if s.shape != (cfg.state_dim,) or a.shape != (cfg.action_dim,):
        raise ShapeMismatchError(f"Expected state ({cfg.state_dim},) and action ({cfg.action_dim},), got {s.shape}, {a.shape}")
    xi = rng.normal(0.0, 1.0, size=cfg.state_dim) * cfg.noise_std
    eta = rng.normal(0.0, 1.0) * cfg.reward_noise_std
    next_state = squash(cfg.A @ s + cfg.B @ a + xi)
    reward = -float(s @ cfg.Q @ s) - float(a @ cfg.R @ a) + eta
    return next_state, reward


class SquashedLqr(Environment):

    def __init__(self, cfg: SquashedLqrConfig):
        self.cfg = cfg
        self.horizon = cfg.horizon
        self.state_dim = cfg.state_dim
        self.action_dim = cfg.action_dim

    @property
    def initial_state(self) -> np.ndarray:
        return self.cfg.initial_state.copy()

    def step(self, state, action, rng):
        return lqr_step(self.cfg, state, action, rng)

    def mean_reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Noiseless reward for batches of shape (n, d_S) and (n, d_A)"""
        return -np.einsum("ni,ij,nj->n", states, self.cfg.Q, states) - np.einsum("ni,ij,nj->n", actions, self.cfg.R, actions)

    def reward_bound(self) -> float:
        # s'Qs over the unit ball peaks at lambda_max(Q); a'Ra is convex so it peaks at a vertex of the box
        vertices = np.array(list(itertools.product([-1.0, 1.0], repeat=self.action_dim)))
        action_peak = float(np.max(np.einsum("ni,ij,nj->n", vertices, self.cfg.R, vertices)))
        return float(np.linalg.eigvalsh(self.cfg.Q)[-1]) + action_peak

    @property
    def rewards_nonpositive(self) -> bool:
        return self.cfg.reward_noise_std == 0.0


def benchmark_environments(
    noise_std: float = TRANSITION_NOISE_STD,
    reward_noise_std: float = REWARD_NOISE_STD,
    horizon: int = BENCHMARK_HORIZON,
) -> Tuple[SquashedLqrConfig, SquashedLqrConfig]:
    """The two squashed LQRs of the orthogonal-versus-naive feature comparison"""
    common = dict(
        B=np.array([[1.0], [1.0]]),
        Q=np.eye(2),
        R=np.array([[0.2]]),
        noise_std=noise_std,
        reward_noise_std=reward_noise_std,
        horizon=horizon,
    )
    left = SquashedLqrConfig(A=np.array([[0.7, 0.7], [-0.7, 0.7]]), name="lqr_left", **common)
    right = SquashedLqrConfig(A=np.array([[0.0, 1.0], [1.0, 0.0]]), name="lqr_right", **common)
    return left, right


def default_mean(s, a):
    return 0.5 * np.tanh(s + a)


def default_reward(s, a):
    return 0.5 * np.cos(np.pi * s) * a


def linear_mean(s, a):
    return 0.5 * (s + a)


def bilinear_reward(s, a):
    return 0.5 * s * a


def _check_unit_interval(*arrays):
    for values in arrays:
        values = np.asarray(values, dtype=float)
        if np.any(np.abs(values) > 1.0 + 1e-12):
            raise DomainError(f"Arguments must lie in [-1, 1], got max |x| = {np.max(np.abs(values))}")


@dataclass(frozen=True)
class SmoothDensityMdpConfig:
    """
    One-dimensional MDP on [-1, 1] with a Gaussian transition density truncated to [-1, 1]

    p(s' | s, a) = exp(-kappa (s' - m(s, a))^2 / 2) / Z(m), Z in closed form through erf.
    """
    mean_fn: Callable = default_mean
    concentration: float = SMOOTH_MDP_CONCENTRATION
    reward_fn: Callable = default_reward
    horizon: int = SMOOTH_MDP_HORIZON
    reward_noise_std: float = REWARD_NOISE_STD
    initial_state: float = 0.0

    def __post_init__(self):
        if self.concentration < 0:
            raise ValueError(f"Concentration must be non-negative, got {self.concentration}")
        if self.horizon < 1:
            raise ValueError(f"Horizon must be >= 1, got {self.horizon}")

    def _uniform_limit(self) -> bool:
        return self.concentration < 1e-12

    def density(self, s_next, s, a) -> np.ndarray:
        s_next, s, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s_next, s, a)))
        if self._uniform_limit():
            return np.full(s_next.shape, 0.5)
        m = self.mean_fn(s, a)
        z = np.sqrt(self.concentration / 2.0)
        normalizer = np.sqrt(np.pi / (2.0 * self.concentration)) * (erf(z * (1.0 - m)) - erf(z * (-1.0 - m)))
        return np.exp(-self.concentration * (s_next - m) ** 2 / 2.0) / normalizer

    def inverse_cdf(self, u, s, a) -> np.ndarray:
        u, s, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u, s, a)))
        if self._uniform_limit():
            return 2.0 * u - 1.0
        m = self.mean_fn(s, a)
        z = np.sqrt(self.concentration / 2.0)
        low, high = erf(z * (-1.0 - m)), erf(z * (1.0 - m))
        return np.clip(m + erfinv(low + u * (high - low)) / z, -1.0, 1.0)


@dataclass(frozen=True)
class PolynomialDensityMdpConfig:
    """
    MDP whose transition density and reward are polynomials in (s, a)

    p(s' | s, a) = (1 + tilt * s' * m(s, a)) / 2 with linear m, so Bellman backups of
    any value function stay polynomial of degree max(deg m, deg r).
    """
    mean_fn: Callable = linear_mean
    tilt: float = 0.5
    reward_fn: Callable = bilinear_reward
    horizon: int = 2
    reward_noise_std: float = REWARD_NOISE_STD
    initial_state: float = 0.0

    def __post_init__(self):
        if abs(self.tilt) >= 1.0:
            raise ValueError(f"|tilt| must be < 1 to keep the density positive, got {self.tilt}")

    def density(self, s_next, s, a) -> np.ndarray:
        s_next, s, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s_next, s, a)))
        return 0.5 * (1.0 + self.tilt * s_next * self.mean_fn(s, a))

    def inverse_cdf(self, u, s, a) -> np.ndarray:
        u, s, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u, s, a)))
        t = self.tilt * self.mean_fn(s, a)
        # F(x) = (x + 1)/2 + t (x^2 - 1)/4; stable root of t x^2/4 + x/2 + (1/2 - t/4 - u) = 0
        c = 0.5 - t / 4.0 - u
        disc = np.maximum(0.25 - t * c, 0.0)
        return np.clip(2.0 * c / (-0.5 - np.sqrt(disc)), -1.0, 1.0)


def density_eval(cfg, s_next, s, a) -> np.ndarray:
    """
    Closed-form transition density p(s_next | s, a)

    Args:
        cfg: SmoothDensityMdpConfig or PolynomialDensityMdpConfig
        s_next, s, a: Values (or broadcastable arrays) in [-1, 1]

    Returns:
        Density values, non-negative
    """
    _check_unit_interval(s_next, s, a)
    return cfg.density(s_next, s, a)


class DensityMdp(Environment):
    """Simulator for the one-dimensional density MDPs (inverse-CDF sampling)"""
    state_dim = 1
    action_dim = 1

    def __init__(self, cfg):
        self.cfg = cfg
        self.horizon = cfg.horizon

    @property
    def initial_state(self) -> np.ndarray:
        return np.array([float(self.cfg.initial_state)])

    def step(self, state, action, rng):
        state = np.asarray(state, dtype=float).reshape(-1)
        action = np.asarray(action, dtype=float).reshape(-1)
        self._check_shapes(state, action)
        u = rng.random()
        eta = rng.normal(0.0, 1.0) * self.cfg.reward_noise_std
        next_state = np.atleast_1d(self.cfg.inverse_cdf(u, state[0], action[0])).astype(float)
        reward = float(self.cfg.reward_fn(state[0], action[0])) + eta
        return next_state, reward

    def mean_reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.asarray(self.cfg.reward_fn(states[:, 0], actions[:, 0]), dtype=float)

    def reward_bound(self) -> float:
        grid = np.linspace(-1.0, 1.0, 201)
        s, a = np.meshgrid(grid, grid, indexing="ij")
        return float(np.max(np.abs(self.cfg.reward_fn(s, a))))


@dataclass(frozen=True)
class TabularMdpConfig:
    """Finite MDP with stationary kernel transitions[s, a, s'] and rewards[s, a] in [0, 1]"""
    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int = TABULAR_HORIZON
    reward_noise_std: float = REWARD_NOISE_STD
    initial_state: int = 0

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def random_tabular_mdp(
    rng: np.random.Generator,
    n_states: int = TABULAR_STATES,
    n_actions: int = TABULAR_ACTIONS,
    horizon: int = TABULAR_HORIZON,
    reward_noise_std: float = REWARD_NOISE_STD,
) -> TabularMdpConfig:
    """Dirichlet transition kernel and uniform rewards, reproducible from `rng`"""
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    rewards = rng.random((n_states, n_actions))
    return TabularMdpConfig(transitions, rewards, horizon, reward_noise_std)


class TabularMdp(Environment):
    """States and actions are carried as length-1 float arrays holding their index"""
    state_dim = 1
    action_dim = 1

    def __init__(self, cfg: TabularMdpConfig):
        self.cfg = cfg
        self.horizon = cfg.horizon

    @property
    def initial_state(self) -> np.ndarray:
        return np.array([float(self.cfg.initial_state)])

    def step(self, state, action, rng):
        state = np.asarray(state, dtype=float).reshape(-1)
        action = np.asarray(action, dtype=float).reshape(-1)
        self._check_shapes(state, action)
        s, a = int(state[0]), int(action[0])
        u = rng.random()
        eta = rng.normal(0.0, 1.0) * self.cfg.reward_noise_std
        cumulative = np.cumsum(self.cfg.transitions[s, a])
        next_index = min(int(np.searchsorted(cumulative, u, side="right")), self.cfg.n_states - 1)
        return np.array([float(next_index)]), float(self.cfg.rewards[s, a]) + eta

    def action_grid(self, points_per_dim: int = ACTION_GRID_SIZE) -> np.ndarray:
        return np.arange(self.cfg.n_actions, dtype=float).reshape(-1, 1)

    def reward_bound(self) -> float:
        return float(np.max(np.abs(self.cfg.rewards)))


def run_episode(
    env: Environment,
    policy: Callable[[int, np.ndarray], np.ndarray],
    rng: np.random.Generator,
    episode_index: int = 0,
) -> Transcript:
    """
    Roll out one episode of env.horizon steps from the initial state

    Args:
        env: Environment to simulate
        policy: Maps (stage, state) to an action
        rng: Random stream consumed step by step
        episode_index: Stored in the transcript

    Returns:
        Transcript with H steps and the final state
    """
    state = env.initial_state
    steps = []
    for h in range(env.horizon):
        action = np.asarray(policy(h, state), dtype=float).reshape(-1)
        next_state, reward = env.step(state, action, rng)
        steps.append(Step(state=state, action=action, reward=float(reward)))
        state = next_state
    return Transcript(steps=steps, episode_index=episode_index, final_state=state)
