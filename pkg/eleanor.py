"""
Desk-scale Legendre-Eleanor: global optimism over per-stage parameters.

Each stage parameter is written as theta_h = c_h(theta_{h+1}) + r_h * Lambda_h^{-1/2} u_h
with ||u_h|| <= 1, where c_h is the ridge solution whose targets are
r + max_a theta_{h+1}^T phi(s', a). Every such theta_h lies in the confidence
ellipsoid ||theta_h - c_h||_{Lambda_h} <= r_h; the remaining constraint is the norm
cap ||theta_h|| <= norm_cap(h). The optimistic value max_a theta_1^T phi(s_1, a) is
maximized by random restarts plus coordinate-wise refinement of the u_h, stopping
after a fixed number of candidate evaluations. Each restart has a fixed share of
evaluations, so a larger budget only extends the same search path.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from config import (
    ELEANOR_BASE,
    ELEANOR_BUDGET,
    ELEANOR_MAX_FEATURES,
    ELEANOR_MAX_HORIZON,
    ELEANOR_MIN_STEP,
    ELEANOR_RESTART_EVALUATIONS,
    ELEANOR_SLACK,
    RIDGE,
)
from environments import Transcript
from errors import EmptyGridError
from lsvi_ucb import StageData, state_action_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiusSchedule:
    base: float
    horizon: int
    values: tuple

    def norm_caps(self, feature_map, reward_bound: float) -> List[float]:
        """
        Stage-wise caps on ||theta_h||: the theta-norm needed for a Q-function bounded
        by reward_bound * (1 + values[h]), i.e. the schedule plus the reward itself
        """
        return [feature_map.theta_norm_bound(reward_bound * (1.0 + value)) for value in self.values]


def confidence_radii(H: int, c: float = ELEANOR_BASE) -> RadiusSchedule:
    """
    Geometric schedule values[h] = sum_{tau=1}^{H-h} c^tau (1-based h), values[H] = 0

    Args:
        H: Horizon
        c: Base, > 1

    Returns:
        RadiusSchedule with H strictly decreasing values
    """
    if not c > 1:
        raise ValueError(f"Schedule base must be > 1, got {c}")
    if H < 1:
        raise ValueError(f"Horizon must be >= 1, got {H}")
    values = tuple(float(sum(c ** tau for tau in range(1, H - h + 1))) for h in range(1, H + 1))
    return RadiusSchedule(base=float(c), horizon=H, values=values)


@dataclass
class EleanorPlan:
    thetas: List[np.ndarray]
    optimistic_value: float
    feasibility_residual: float
    feasible: bool = True
    evaluations: int = 0


class _PlanProblem:
    """Precomputed per-stage quantities for evaluating candidate plans"""

    def __init__(self, dataset: Sequence[StageData], feature_map, initial_features: np.ndarray,
                 radii: Sequence[float], caps: Sequence[float], ridge: float):
        self.horizon = len(dataset)
        self.length = feature_map.length
        self.initial_features = initial_features
        self.radii = np.asarray(radii, dtype=float)
        self.caps = np.asarray(caps, dtype=float)
        self.stages = []
        for data in dataset:
            gram = ridge * np.eye(self.length) + data.features.T @ data.features
            eigenvalues, eigenvectors = np.linalg.eigh(gram)
            gram_inverse = (eigenvectors / eigenvalues) @ eigenvectors.T
            inverse_root = (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T
            self.stages.append({
                "gram": gram,
                "solve": gram_inverse @ data.features.T,
                "inverse_root": inverse_root,
                "rewards": data.rewards.copy(),
                "next_features": data.next_features.copy(),
            })

    def thetas(self, directions: np.ndarray):
        """Backward pass from directions u (shape (H, N_tilde)); returns thetas and residual"""
        thetas = [None] * self.horizon
        residual = 0.0
        following = None
        for h in reversed(range(self.horizon)):
            stage = self.stages[h]
            targets = stage["rewards"]
            if following is not None and targets.size:
                targets = targets + np.max(stage["next_features"] @ following, axis=1)
            center = stage["solve"] @ targets if targets.size else np.zeros(self.length)
            theta = center + self.radii[h] * (stage["inverse_root"] @ directions[h])
            offset = theta - center
            ellipsoid = math.sqrt(max(float(offset @ stage["gram"] @ offset), 0.0))
            residual = max(residual, float(np.linalg.norm(theta)) - self.caps[h], ellipsoid - self.radii[h])
            thetas[h] = theta
            following = theta
        return thetas, max(residual, 0.0)

    def value(self, thetas) -> float:
        return float(np.max(self.initial_features @ thetas[0]))


def _project(direction: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(direction)
    return direction / norm if norm > 1.0 else direction


def _sample_ball(rng: np.random.Generator, size: int) -> np.ndarray:
    direction = rng.normal(size=size)
    direction /= max(np.linalg.norm(direction), 1e-300)
    return direction * rng.random() ** (1.0 / size)


def optimistic_plan(
    dataset: Sequence[StageData],
    feature_map,
    schedule: RadiusSchedule,
    ridge_radius: Sequence[float],
    budget: int,
    rng: np.random.Generator,
    initial_state: np.ndarray,
    action_grid: np.ndarray,
    norm_caps: Optional[Sequence[float]] = None,
    reward_bound: float = 1.0,
    ridge: float = RIDGE,
    slack: float = ELEANOR_SLACK,
) -> EleanorPlan:
    """
    Optimistic per-stage parameters inside the confidence sets

    Args:
        dataset: One StageData per stage (may be empty)
        feature_map: Feature map (N_tilde <= 64)
        schedule: Radius schedule (H <= 10)
        ridge_radius: Confidence-ellipsoid radius per stage
        budget: Number of candidate plans evaluated by the search
        rng: Random stream for restarts
        initial_state: s_1
        action_grid: Candidate actions, shape (G, d_A)
        norm_caps: Explicit caps on ||theta_h||; derived from the schedule when None
        reward_bound: Per-step reward bound used to derive the caps
        ridge: Ridge parameter lambda
        slack: Feasibility tolerance

    Returns:
        Best feasible plan found, so optimistic_value never decreases as the budget grows.
        When no candidate met the slack the least-infeasible thetas are returned with
        `feasible` False and optimistic_value -inf
    """
    horizon = len(dataset)
    length = feature_map.length
    if length > ELEANOR_MAX_FEATURES or horizon > ELEANOR_MAX_HORIZON:
        raise ValueError(
            f"Eleanor planning is limited to N_tilde <= {ELEANOR_MAX_FEATURES} and H <= {ELEANOR_MAX_HORIZON}, "
            f"got {length} and {horizon}"
        )
    if schedule.horizon != horizon:
        raise ValueError(f"Schedule horizon {schedule.horizon} does not match dataset horizon {horizon}")
    action_grid = np.atleast_2d(np.asarray(action_grid, dtype=float))
    if action_grid.size == 0:
        raise EmptyGridError("Action grid is empty")
    caps = list(norm_caps) if norm_caps is not None else schedule.norm_caps(feature_map, reward_bound)
    initial_features = feature_map.evaluate(state_action_points(initial_state, action_grid))
    problem = _PlanProblem(dataset, feature_map, initial_features, ridge_radius, caps, ridge)

    def score(directions):
        thetas, residual = problem.thetas(directions)
        return thetas, residual, problem.value(thetas)

    def better(candidate, current):
        # feasible beats infeasible; among feasible higher value wins; among infeasible lower residual wins
        c_ok, i_ok = candidate[1] <= slack, current[1] <= slack
        if c_ok != i_ok:
            return c_ok
        if c_ok:
            return candidate[2] > current[2]
        return candidate[1] < current[1]

    center = np.zeros((horizon, length))
    incumbent = score(center)
    best_feasible = incumbent if incumbent[1] <= slack else None
    least_residual = incumbent

    def record(candidate):
        nonlocal best_feasible, least_residual
        if candidate[1] <= slack:
            if best_feasible is None or candidate[2] > best_feasible[2]:
                best_feasible = candidate
        elif candidate[1] < least_residual[1]:
            least_residual = candidate

    # coordinate steps of the current size, then jumps of the whole u_h to a signed axis
    moves = [(h, i, sign, jump) for h in range(horizon) for i in range(length)
             for sign in (1.0, -1.0) for jump in (False, True)]
    evaluations = 0

    while evaluations < budget:
        if evaluations:
            directions = np.stack([_sample_ball(rng, length) for _ in range(horizon)])
        else:
            directions = center.copy()
        current = score(directions)
        evaluations += 1
        record(current)
        restart_end = evaluations - 1 + ELEANOR_RESTART_EVALUATIONS
        step = 0.5
        # a restart ends when its step collapses or its evaluation share is used, whatever the budget
        while step >= ELEANOR_MIN_STEP and evaluations < min(budget, restart_end):
            improved = False
            for h, i, sign, jump in moves:
                if evaluations >= min(budget, restart_end):
                    break
                trial = directions.copy()
                if jump:
                    trial[h] = 0.0
                    trial[h, i] = sign
                else:
                    trial[h, i] += sign * step
                    trial[h] = _project(trial[h])
                candidate = score(trial)
                evaluations += 1
                record(candidate)
                if better(candidate, current):
                    directions, current, improved = trial, candidate, True
            if not improved:
                step /= 2.0

    if best_feasible is not None:
        thetas, residual, value = best_feasible
        feasible = True
    else:
        thetas, residual, _ = least_residual
        value = -math.inf
        feasible = False
        logger.warning(f"Eleanor search exhausted its budget ({budget}) without a feasible plan, residual {residual:.3g}")
    return EleanorPlan(thetas=thetas, optimistic_value=value, feasibility_residual=residual,
                       feasible=feasible, evaluations=evaluations)


def act(plan: EleanorPlan, h: int, s, action_grid, feature_map) -> np.ndarray:
    """Grid action maximizing theta_h^T phi(s, a); ties go to the lowest grid index"""
    action_grid = np.atleast_2d(np.asarray(action_grid, dtype=float))
    if action_grid.size == 0:
        raise EmptyGridError("Action grid is empty")
    values = feature_map.evaluate(state_action_points(s, action_grid)) @ plan.thetas[h]
    return action_grid[int(np.argmax(values))]


class EleanorAgent:
    """Replans before each episode and acts greedily with respect to the plan"""

    def __init__(self, feature_map, horizon: int, action_grid: np.ndarray, initial_state: np.ndarray,
                 ridge_radius: float, reward_bound: float, base: float = ELEANOR_BASE,
                 budget: int = ELEANOR_BUDGET, ridge: float = RIDGE, slack: float = ELEANOR_SLACK):
        self.feature_map = feature_map
        self.action_grid = np.atleast_2d(np.asarray(action_grid, dtype=float))
        self.initial_state = np.asarray(initial_state, dtype=float)
        self.schedule = confidence_radii(horizon, base)
        self.ridge_radius = [ridge_radius] * horizon
        self.reward_bound = reward_bound
        self.budget = budget
        self.ridge = ridge
        self.slack = slack
        self.dataset = [StageData(feature_map.length, self.action_grid.shape[0]) for _ in range(horizon)]
        self.plan: Optional[EleanorPlan] = None

    def begin_episode(self, rng: np.random.Generator):
        self.plan = optimistic_plan(
            self.dataset, self.feature_map, self.schedule, self.ridge_radius, self.budget, rng,
            self.initial_state, self.action_grid, reward_bound=self.reward_bound,
            ridge=self.ridge, slack=self.slack,
        )

    def act(self, h: int, s: np.ndarray) -> np.ndarray:
        return act(self.plan, h, s, self.action_grid, self.feature_map)

    def observe(self, transcript: Transcript):
        horizon = len(self.dataset)
        for h, step in enumerate(transcript.steps):
            phi = self.feature_map.evaluate(state_action_points(step.state, step.action.reshape(1, -1)))[0]
            next_phi = None
            if h < horizon - 1:
                next_phi = self.feature_map.evaluate(state_action_points(transcript.next_state(h), self.action_grid))
            self.dataset[h].append(phi, step.reward, next_phi)
