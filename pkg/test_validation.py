import logging

import numpy as np
import pytest

from environments import PolynomialDensityMdpConfig, SmoothDensityMdpConfig
from errors import DegenerateFitError, QuadratureError
from legendre_features import build_feature_map
from rng import derive_stream, seeded_stream
from validation import approximation_rate, empirical_ibe, fit_rate, ibe_decay, orthonormality_report


class LeakyDensity:
    """Transition density that only integrates to 0.7"""
    horizon = 2

    def density(self, s_next, s, a):
        return np.full(np.broadcast(s_next, s, a).shape, 0.35)

    def reward_fn(self, s, a):
        return 0.0 * s * a


def test_orthonormality_report():
    assert orthonormality_report(10, 64) < 1e-10
    assert orthonormality_report(20) < 1e-10
    with pytest.raises(ValueError):
        orthonormality_report(10, 5)


def test_rate_for_absolute_value():
    fit = approximation_rate(np.abs, 0, [4, 8, 16, 32])
    assert fit.fitted_slope <= -0.8
    assert fit.errors == sorted(fit.errors, reverse=True)


def test_rate_for_analytic_function():
    fit = approximation_rate(lambda x: np.cos(np.pi * x), 3, [4, 6, 8, 10])
    assert fit.fitted_slope <= -3.0


def test_smoother_function_decays_faster():
    # |x| is exactly representable at even powers, so compare the odd powers k = 1 and k = 3
    rough = approximation_rate(lambda x: np.abs(x), 0, [4, 8, 16, 32])
    smooth = approximation_rate(lambda x: np.abs(x) ** 3, 0, [4, 8, 16, 32])
    assert smooth.fitted_slope < rough.fitted_slope - 1.0


def test_polynomial_in_the_span_is_degenerate():
    with pytest.raises(DegenerateFitError) as excinfo:
        approximation_rate(lambda x: 2.5 * x ** 3 - 1.5 * x, 0, [4, 8])
    assert excinfo.value.degrees == [4, 8]
    assert len(excinfo.value.errors) == 2


@pytest.mark.parametrize("smoothness, degrees", [
    (0, [8, 4]),
    (0, [4]),
    (3, [2, 8]),
    (0, [8, 65]),
])
def test_rate_rejects_bad_degrees(smoothness, degrees):
    with pytest.raises(ValueError):
        approximation_rate(np.abs, smoothness, degrees)


def test_fit_rate_on_exact_power_law():
    fit = fit_rate([1, 2, 4, 8], [1.0, 0.25, 0.0625, 0.015625])
    assert fit.fitted_slope == pytest.approx(-2.0)
    assert fit.fit_residual == pytest.approx(0.0, abs=1e-12)


def test_rate_fit_csv():
    lines = fit_rate([2, 4], [0.5, 0.125]).to_csv().splitlines()
    assert lines[0] == "degree,error"
    assert lines[1].startswith("2,5.0")
    assert lines[-1] == "# slope=-2.000000,residual=0.000000"


def test_polynomial_mdp_has_zero_bellman_error():
    estimate = empirical_ibe(PolynomialDensityMdpConfig(), build_feature_map(2, 2), 20, seeded_stream(0),
                             state_grid=41, action_grid=11)
    assert estimate.samples == 20
    assert not estimate.empty
    assert estimate.value < 1e-6


def test_smooth_mdp_has_positive_bellman_error():
    estimate = empirical_ibe(SmoothDensityMdpConfig(horizon=2), build_feature_map(2, 1), 10, seeded_stream(0),
                             state_grid=41, action_grid=11)
    assert estimate.value > 1e-6
    assert float(estimate) == estimate.value


def test_zero_samples_returns_empty_estimate(caplog):
    with caplog.at_level(logging.WARNING, logger="validation"):
        estimate = empirical_ibe(SmoothDensityMdpConfig(), build_feature_map(2, 2), 0, seeded_stream(0))
    assert estimate.empty and estimate.value == 0.0 and estimate.samples == 0
    assert "no theta samples" in caplog.text


def test_unnormalized_density_is_rejected():
    with pytest.raises(QuadratureError):
        empirical_ibe(LeakyDensity(), build_feature_map(2, 1), 5, seeded_stream(0), state_grid=11, action_grid=5)


def test_ibe_decay_uses_one_stream_per_degree():
    maps = [build_feature_map(2, N) for N in (1, 2)]
    mdp = SmoothDensityMdpConfig(horizon=2)
    stream = lambda N: derive_stream(0, "ibe", N)
    first = ibe_decay(mdp, maps, 5, stream, state_grid=21, action_grid=5)
    second = ibe_decay(mdp, maps, 5, stream, state_grid=21, action_grid=5)
    assert first == second
    assert len(first) == 2 and all(value >= 0.0 for value in first)


@pytest.mark.slow
def test_ibe_decays_at_least_like_one_over_degree():
    degrees = [2, 4, 6, 8]
    maps = [build_feature_map(2, N) for N in degrees]
    estimates = ibe_decay(SmoothDensityMdpConfig(horizon=2), maps, 200, lambda N: derive_stream(0, "ibe", N))
    assert min(estimates) > 0.0
    assert fit_rate(degrees, estimates).fitted_slope <= -1.0
