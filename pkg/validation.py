"""
Desk-scale numerical checks of the approximation claims behind the Legendre learners:
basis orthonormality, the polynomial approximation rate, and the decay of the inherent
Bellman error of smooth MDPs as the degree grows.

The best uniform approximation is replaced by the L^2 projection onto the Legendre
basis (computed by quadrature); its sup-norm error is measured on a dense grid.
"""
import io
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import (
    DEGENERATE_ERROR,
    ELEANOR_BASE,
    IBE_ACTION_GRID,
    IBE_DENSITY_TOLERANCE,
    IBE_STATE_GRID,
    LEGENDRE_MAX_DEGREE,
    PROJECTION_QUADRATURE_ORDER,
    QUADRATURE_ORDER,
    RATE_GRID_POINTS,
)
from eleanor import confidence_radii
from errors import DegenerateFitError, QuadratureError
from legendre_features import gauss_legendre, legendre_table

logger = logging.getLogger(__name__)


def orthonormality_report(max_degree: int, quad_order: int = QUADRATURE_ORDER) -> float:
    """
    Max |G_ij - delta_ij| for the Gauss-Legendre Gram matrix of p_0..p_max_degree

    Args:
        max_degree: Highest polynomial degree checked
        quad_order: Number of quadrature nodes (>= max_degree + 1)

    Returns:
        Maximum absolute deviation from the identity
    """
    if quad_order < max_degree + 1:
        raise ValueError(f"Quadrature order {quad_order} too small for degree {max_degree}")
    nodes, weights = gauss_legendre(quad_order)
    table = legendre_table(max_degree, nodes)
    gram = table.T @ (weights[:, None] * table)
    return float(np.max(np.abs(gram - np.eye(max_degree + 1))))


@dataclass
class RateFit:
    degrees: List[int]
    errors: List[float]
    fitted_slope: float
    fit_residual: float

    def to_csv(self) -> str:
        """CSV (degree, error) followed by a summary line"""
        buffer = io.StringIO()
        pd.DataFrame({"degree": self.degrees, "error": self.errors}).to_csv(
            buffer, index=False, float_format="%.12e", lineterminator="\n"
        )
        buffer.write(f"# slope={self.fitted_slope:.6f},residual={self.fit_residual:.6f}\n")
        return buffer.getvalue()


def fit_rate(degrees: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Least-squares line through (log N, log error)"""
    log_n = np.log(np.asarray(degrees, dtype=float))
    log_e = np.log(np.asarray(errors, dtype=float))
    slope, intercept = np.polyfit(log_n, log_e, 1)
    residual = math.sqrt(float(np.mean((log_e - (slope * log_n + intercept)) ** 2)))
    return RateFit(list(degrees), [float(e) for e in errors], float(slope), residual)


def legendre_projection_errors(
    f: Callable,
    degrees: Sequence[int],
    quad_order: int = PROJECTION_QUADRATURE_ORDER,
    grid_points: int = RATE_GRID_POINTS,
) -> List[float]:
    """Sup-norm errors of the L^2 Legendre projections of f for each degree"""
    max_degree = max(degrees)
    nodes, weights = gauss_legendre(quad_order)
    coefficients = legendre_table(max_degree, nodes).T @ (weights * f(nodes))
    grid = np.linspace(-1.0, 1.0, grid_points)
    values = f(grid)
    basis = legendre_table(max_degree, grid)
    return [float(np.max(np.abs(values - basis[:, :N + 1] @ coefficients[:N + 1]))) for N in degrees]


def approximation_rate(f: Callable, smoothness: int, degrees: Sequence[int], **kwargs) -> RateFit:
    """
    Empirical approximation rate of f by Legendre projections

    Args:
        f: Vectorized scalar function on [-1, 1]
        smoothness: Order nu; degrees must lie in [nu + 1, 64]
        degrees: Strictly increasing list of degrees

    Returns:
        RateFit of log error against log degree
    """
    degrees = [int(N) for N in degrees]
    if len(degrees) < 2 or any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValueError(f"Degrees must be strictly increasing with at least two entries, got {degrees}")
    if degrees[0] < smoothness + 1 or degrees[-1] > LEGENDRE_MAX_DEGREE:
        raise ValueError(f"Degrees must lie in [{smoothness + 1}, {LEGENDRE_MAX_DEGREE}], got {degrees}")
    errors = legendre_projection_errors(f, degrees, **kwargs)
    if min(errors) < DEGENERATE_ERROR:
        raise DegenerateFitError(
            f"Projection error {min(errors):.3e} underflows: f is (numerically) in the span", degrees, errors
        )
    return fit_rate(degrees, errors)


@dataclass
class IbeEstimate:
    value: float
    samples: int
    empty: bool = False

    def __float__(self) -> float:
        return self.value


def _reward_bound(mdp, states: np.ndarray, actions: np.ndarray) -> float:
    return float(np.max(np.abs(mdp.reward_fn(states, actions))))


def empirical_ibe(
    mdp,
    feature_map,
    theta_samples: int,
    rng: np.random.Generator,
    state_grid: int = IBE_STATE_GRID,
    action_grid: int = IBE_ACTION_GRID,
    cap: Optional[float] = None,
    quad_order: int = QUADRATURE_ORDER,
    base: float = ELEANOR_BASE,
) -> IbeEstimate:
    """
    Monte-Carlo estimate of the inherent Bellman error of a known-density MDP

    For sampled theta, the Bellman image r + E[max_a' phi(s', a')^T theta] is computed
    by quadrature against the closed-form density on a (state x action) grid, projected
    onto the span of phi by least squares, and the sup-norm residual on the grid is
    recorded. The estimate is the maximum residual over samples.

    Args:
        mdp: SmoothDensityMdpConfig or PolynomialDensityMdpConfig
        feature_map: Map over (s, a) in [-1, 1]^2
        theta_samples: Number of theta drawn uniformly from the ball of radius `cap`
        rng: Random stream
        state_grid, action_grid: Grid resolution for (s, a)
        cap: Ball radius; defaults to the Eleanor norm cap at the first stage
        quad_order: Gauss-Legendre order for the expectation over s'
        base: Radius schedule base used for the default cap

    Returns:
        IbeEstimate (value 0 and `empty` set when theta_samples == 0)
    """
    if theta_samples <= 0:
        logger.warning("empirical_ibe called with no theta samples, returning 0")
        return IbeEstimate(0.0, 0, empty=True)

    states = np.linspace(-1.0, 1.0, state_grid)
    actions = np.linspace(-1.0, 1.0, action_grid)
    s_mesh, a_mesh = np.meshgrid(states, actions, indexing="ij")
    s_flat, a_flat = s_mesh.reshape(-1), a_mesh.reshape(-1)
    phi = feature_map.evaluate(np.stack([s_flat, a_flat], axis=1))

    nodes, weights = gauss_legendre(quad_order)
    density = mdp.density(nodes[:, None], s_flat[None, :], a_flat[None, :])
    mass = weights @ density
    if np.max(np.abs(mass - 1.0)) > IBE_DENSITY_TOLERANCE or np.any(density < 0):
        raise QuadratureError(f"Transition density normalization off by {np.max(np.abs(mass - 1.0)):.3e}")
    expectation = (weights[:, None] * density).T

    next_s, next_a = np.meshgrid(nodes, actions, indexing="ij")
    next_phi = feature_map.evaluate(np.stack([next_s.reshape(-1), next_a.reshape(-1)], axis=1))
    next_phi = next_phi.reshape(nodes.size, actions.size, feature_map.length)
    rewards = np.asarray(mdp.reward_fn(s_flat, a_flat), dtype=float)

    if cap is None:
        schedule = confidence_radii(mdp.horizon, base)
        cap = schedule.norm_caps(feature_map, _reward_bound(mdp, s_flat, a_flat))[0]

    worst = 0.0
    for _ in range(theta_samples):
        direction = rng.normal(size=feature_map.length)
        direction /= np.linalg.norm(direction)
        theta = cap * rng.random() ** (1.0 / feature_map.length) * direction
        values = np.max(next_phi @ theta, axis=1)
        image = rewards + expectation @ values
        projection, *_ = np.linalg.lstsq(phi, image, rcond=None)
        worst = max(worst, float(np.max(np.abs(phi @ projection - image))))
    return IbeEstimate(worst, theta_samples)


def ibe_decay(mdp, feature_maps, theta_samples: int, seed_stream: Callable[[int], np.random.Generator], **kwargs):
    """IBE estimates for a sequence of feature maps, each with its own labelled stream"""
    return [
        empirical_ibe(mdp, feature_map, theta_samples, seed_stream(feature_map.degree), **kwargs).value
        for feature_map in feature_maps
    ]
