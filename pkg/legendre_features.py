"""
Orthonormal Legendre feature maps over [-1, 1]^d.

The univariate polynomials are normalized in L^2([-1, 1]):

    p_n(x) = sqrt((2n + 1) / 2) * P_n(x),

with P_n from the three-term recurrence (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}.
Multivariate features stack the products p_{g_1}(x_1) ... p_{g_d}(x_d) for every
multi-index of total degree <= N, in graded lexicographic order, multiplied by
N_tilde^{-1/2} and a global ``scale`` that restores ||phi(x)||_2 <= 1 on the cube.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from config import DOMAIN_TOLERANCE, INDEX_SET_CAP, LEGENDRE_MAX_DEGREE, SCALE_GRID_POINTS
from errors import DegreeError, DimensionMismatchError, DomainError, IndexSetOverflowError

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]


class FeatureKind(str, Enum):
    LEGENDRE = "legendre"
    MONOMIAL = "monomial"


def _check_domain(x: np.ndarray, tolerance: float = DOMAIN_TOLERANCE):
    if np.any(np.abs(x) > 1.0 + tolerance) or not np.all(np.isfinite(x)):
        raise DomainError(f"Points must lie in [-1, 1] (tolerance {tolerance}), got max |x| = {np.max(np.abs(x))}")


def eval_1d(n: int, x: float, max_degree: int = LEGENDRE_MAX_DEGREE) -> float:
    """
    Evaluate the L^2-normalized Legendre polynomial of degree n at x

    Args:
        n: Degree, 0 <= n <= max_degree
        x: Point in [-1, 1]
        max_degree: Largest degree accepted

    Returns:
        sqrt((2n+1)/2) * P_n(x)
    """
    if n < 0 or n > max_degree:
        raise DegreeError(f"Degree {n} outside [0, {max_degree}]")
    x = float(x)
    if not abs(x) <= 1.0 + DOMAIN_TOLERANCE:
        raise DomainError(f"x = {x} outside [-1, 1]")

    previous, current = 1.0, x
    if n == 0:
        current = 1.0
    for k in range(1, n):
        previous, current = current, ((2 * k + 1) * x * current - k * previous) / (k + 1)
    return math.sqrt((2 * n + 1) / 2.0) * current


def legendre_table(max_degree: int, x: np.ndarray, limit: int = LEGENDRE_MAX_DEGREE) -> np.ndarray:
    """
    Evaluate all normalized Legendre polynomials up to max_degree

    Args:
        max_degree: Highest degree to evaluate
        x: Sample points with shape (n_samples,)
        limit: Largest degree accepted

    Returns:
        Array of shape (n_samples, max_degree + 1)
    """
    if max_degree < 0 or max_degree > limit:
        raise DegreeError(f"Degree {max_degree} outside [0, {limit}]")
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_domain(x)

    table = np.empty((x.size, max_degree + 1))
    table[:, 0] = 1.0
    if max_degree >= 1:
        table[:, 1] = x
    for k in range(1, max_degree):
        table[:, k + 1] = ((2 * k + 1) * x * table[:, k] - k * table[:, k - 1]) / (k + 1)
    table *= np.sqrt((2 * np.arange(max_degree + 1) + 1) / 2.0)
    return table


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of the Gauss-Legendre rule on [a, b]

    With `order` nodes the rule integrates polynomials of degree <= 2*order - 1 exactly.
    """
    if order < 1:
        raise ValueError(f"Quadrature order must be positive, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = ((b - a) * nodes + (b + a)) / 2.0
    weights = weights * (b - a) / 2.0
    return nodes, weights


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _index_set(d: int, N: int) -> Tuple[MultiIndex, ...]:
    return tuple(index for degree in range(N + 1) for index in _compositions(degree, d))


def enumerate_index_set(d: int, N: int, cap: int = INDEX_SET_CAP) -> List[MultiIndex]:
    """
    All multi-indices of length d and total degree <= N, graded lexicographic order

    Args:
        d: Ambient dimension (>= 1)
        N: Maximum total degree (>= 0)
        cap: Maximum admissible cardinality

    Returns:
        List of binomial(N + d, d) tuples
    """
    if d < 1 or N < 0:
        raise ValueError(f"Need d >= 1 and N >= 0, got d={d}, N={N}")
    size = math.comb(N + d, d)
    if size > cap:
        raise IndexSetOverflowError(f"Index set of size {size} exceeds cap {cap} (d={d}, N={N})")
    return list(_index_set(d, N))


@dataclass(frozen=True)
class FeatureMap:
    """
    Immutable polynomial feature map over [-1, 1]^d

    Points are rows of an array of shape (n, dimension); for state-action maps the
    state coordinates come first, then the action coordinates.
    """
    dimension: int
    degree: int
    index_set: Tuple[MultiIndex, ...]
    scale: float
    kind: FeatureKind
    exponents: np.ndarray = field(repr=False, compare=False)

    @property
    def length(self) -> int:
        return len(self.index_set)

    @property
    def input_dim(self) -> int:
        return self.dimension

    def _as_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"Expected points with {self.dimension} coordinates, got shape {points.shape}"
            )
        return points

    def raw_features(self, points) -> np.ndarray:
        """Products of normalized Legendre polynomials, before N_tilde^{-1/2} and scale"""
        points = self._as_points(points)
        _check_domain(points)
        values = np.ones((points.shape[0], self.length))
        for j in range(self.dimension):
            table = legendre_table(self.degree, points[:, j])
            values *= table[:, self.exponents[:, j]]
        return values

    def monomials(self, points) -> np.ndarray:
        """Products x_1^{g_1} ... x_d^{g_d}"""
        points = self._as_points(points)
        _check_domain(points)
        values = np.ones((points.shape[0], self.length))
        for j in range(self.dimension):
            powers = points[:, j:j + 1] ** np.arange(self.degree + 1)
            values *= powers[:, self.exponents[:, j]]
        return values

    def evaluate(self, points) -> np.ndarray:
        """
        Feature vectors for a batch of points

        Args:
            points: Array of shape (n, dimension)

        Returns:
            Array of shape (n, length)
        """
        if self.kind == FeatureKind.LEGENDRE:
            return self.raw_features(points) * (self.scale / math.sqrt(self.length))
        return self.monomials(points)

    def theta_norm_bound(self, sup_value: float) -> float:
        """
        Euclidean norm bound on theta for a function phi^T theta with sup-norm <= sup_value

        Uses ||f||_{L^2([-1,1]^d)} <= 2^{d/2} ||f||_inf and the smallest eigenvalue of
        the L^2 Gram matrix of the features.
        """
        return (2.0 ** (self.dimension / 2.0)) * sup_value / math.sqrt(self._gram_min_eigenvalue())

    def _gram_min_eigenvalue(self) -> float:
        if self.kind == FeatureKind.LEGENDRE:
            return self.scale ** 2 / self.length
        # int_{[-1,1]} x^k dx = 2/(k+1) for even k, 0 otherwise
        powers = self.exponents[:, None, :] + self.exponents[None, :, :]
        moments = np.where(powers % 2 == 0, 2.0 / (powers + 1.0), 0.0)
        gram = np.prod(moments, axis=2)
        return float(max(np.linalg.eigvalsh(gram)[0], np.finfo(float).tiny))


def _scale_grid(dimension: int, n_points: int = SCALE_GRID_POINTS) -> np.ndarray:
    per_axis = max(2, int(math.floor(n_points ** (1.0 / dimension))))
    axis = np.linspace(-1.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * dimension), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def build_feature_map(
    dimension: int,
    degree: int,
    kind: FeatureKind = FeatureKind.LEGENDRE,
    cap: int = INDEX_SET_CAP,
) -> FeatureMap:
    """
    Construct a feature map of total degree `degree` over [-1, 1]^dimension

    For Legendre maps the global scale is 1 / max ||unscaled phi(x)||_2 over a dense
    grid that contains the corners of the cube.
    """
    if degree < 1:
        raise DegreeError(f"Feature degree must be >= 1, got {degree}")
    if degree > LEGENDRE_MAX_DEGREE:
        raise DegreeError(f"Degree {degree} exceeds the maximum {LEGENDRE_MAX_DEGREE}")
    kind = FeatureKind(kind)
    index_set = tuple(enumerate_index_set(dimension, degree, cap))
    exponents = np.array(index_set, dtype=int).reshape(len(index_set), dimension)
    feature_map = FeatureMap(dimension, degree, index_set, 1.0, kind, exponents)
    if kind == FeatureKind.MONOMIAL:
        return feature_map

    grid = _scale_grid(dimension)
    sup_norm = 0.0
    for start in range(0, grid.shape[0], 4096):
        chunk = feature_map.raw_features(grid[start:start + 4096]) / math.sqrt(feature_map.length)
        sup_norm = max(sup_norm, float(np.max(np.linalg.norm(chunk, axis=1))))
    scale = 1.0 / sup_norm
    logger.debug(f"Legendre map d={dimension} N={degree}: length {len(index_set)}, scale {scale:.6g}")
    return FeatureMap(dimension, degree, index_set, scale, kind, exponents)


def feature_vector(feature_map: FeatureMap, x) -> np.ndarray:
    """Scaled orthonormal Legendre features of a single point"""
    if feature_map.kind != FeatureKind.LEGENDRE:
        raise ValueError(f"feature_vector needs a Legendre map, got {feature_map.kind.value}")
    return feature_map.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0]


def monomial_feature_vector(feature_map: FeatureMap, x) -> np.ndarray:
    """Naive monomial features of a single point"""
    if feature_map.kind != FeatureKind.MONOMIAL:
        raise ValueError(f"monomial_feature_vector needs a monomial map, got {feature_map.kind.value}")
    return feature_map.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0]


class OneHotFeatureMap:
    """
    Indicator features for a finite MDP: points are (state index, action index) pairs
    """

    def __init__(self, n_states: int, n_actions: int):
        self.n_states = n_states
        self.n_actions = n_actions
        self.input_dim = 2

    @property
    def length(self) -> int:
        return self.n_states * self.n_actions

    def evaluate(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != 2:
            raise DimensionMismatchError(f"Expected (state, action) pairs, got shape {points.shape}")
        columns = points[:, 0].astype(int) * self.n_actions + points[:, 1].astype(int)
        values = np.zeros((points.shape[0], self.length))
        values[np.arange(points.shape[0]), columns] = 1.0
        return values

    def theta_norm_bound(self, sup_value: float) -> float:
        return sup_value * math.sqrt(self.length)
