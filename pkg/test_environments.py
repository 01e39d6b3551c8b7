import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from environments import (
    DensityMdp,
    PolynomialDensityMdpConfig,
    SmoothDensityMdpConfig,
    SquashedLqr,
    SquashedLqrConfig,
    TabularMdp,
    density_eval,
    lqr_step,
    benchmark_environments,
    random_tabular_mdp,
    run_episode,
    squash,
)
from errors import DomainError, ShapeMismatchError
from legendre_features import gauss_legendre
from rng import seeded_stream

LEFT_A = np.array([[0.7, 0.7], [-0.7, 0.7]])


def quiet_lqr(A=LEFT_A, B=((1.0,), (1.0,)), horizon=20, **kwargs):
    return SquashedLqrConfig(A=A, B=np.array(B), Q=np.eye(2), R=np.array([[0.2]]),
                             noise_std=0.0, reward_noise_std=0.0, horizon=horizon, **kwargs)


def test_squash_examples():
    np.testing.assert_allclose(squash([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(squash([3.0, 4.0]), [0.5, 2.0 / 3.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4))
def test_squash_lands_in_open_ball(values):
    assert np.linalg.norm(squash(values)) < 1.0


def test_lqr_step_examples():
    cfg = quiet_lqr()
    next_state, reward = lqr_step(cfg, [0.0, 0.0], [0.0], seeded_stream(0))
    np.testing.assert_allclose(next_state, [0.0, 0.0])
    assert reward == 0.0

    next_state, reward = lqr_step(cfg, [0.1, 0.2], [0.3], seeded_stream(0))
    np.testing.assert_allclose(next_state, [0.312868, 0.226983], atol=1e-6)
    assert reward == pytest.approx(-0.068)

    frozen = quiet_lqr(A=np.zeros((2, 2)), B=((0.0,), (0.0,)))
    next_state, _ = lqr_step(frozen, [0.5, -0.5], [1.0], seeded_stream(0))
    np.testing.assert_allclose(next_state, [0.0, 0.0])


def test_lqr_step_draws_transition_noise_before_reward_noise():
    left, _ = benchmark_environments(noise_std=0.1, reward_noise_std=0.05)
    s, a = np.array([0.1, -0.2]), np.array([0.4])
    next_state, reward = lqr_step(left, s, a, seeded_stream(3))

    replay = seeded_stream(3)
    xi = replay.normal(0.0, 1.0, size=2) * 0.1
    eta = replay.normal(0.0, 1.0) * 0.05
    np.testing.assert_allclose(next_state, squash(left.A @ s + left.B @ a + xi))
    assert reward == pytest.approx(-float(s @ s) - 0.2 * 0.16 + eta)


def test_lqr_config_validation():
    with pytest.raises(ShapeMismatchError):
        SquashedLqrConfig(A=np.eye(3), B=np.ones((2, 1)), Q=np.eye(2), R=np.eye(1))
    with pytest.raises(ValueError):
        quiet_lqr(initial_state=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        SquashedLqrConfig(A=np.eye(2), B=np.ones((2, 1)), Q=-np.eye(2), R=np.eye(1))
    with pytest.raises(ShapeMismatchError):
        lqr_step(quiet_lqr(), [0.0, 0.0, 0.0], [0.0], seeded_stream(0))


def test_benchmark_lqr_configs():
    left, right = benchmark_environments()
    np.testing.assert_allclose(left.A, LEFT_A)
    np.testing.assert_allclose(right.A, [[0.0, 1.0], [1.0, 0.0]])
    for cfg in (left, right):
        env = SquashedLqr(cfg)
        assert env.horizon == 20
        assert env.reward_bound() == pytest.approx(1.2)
        assert env.rewards_nonpositive
        assert env.action_grid().shape == (21, 1)


def test_zero_policy_episode_stays_at_origin():
    env = SquashedLqr(quiet_lqr())
    transcript = run_episode(env, lambda h, s: np.zeros(1), seeded_stream(0))
    assert transcript.horizon == 20
    assert transcript.total_return == 0.0
    assert all(np.all(step.state == 0.0) for step in transcript.steps)


def test_episode_replay_is_bit_identical():
    left, _ = benchmark_environments()
    env = SquashedLqr(left)
    policy = lambda h, s: np.array([0.5 * np.sin(h)])
    first = run_episode(env, policy, seeded_stream(11), episode_index=4)
    second = run_episode(env, policy, seeded_stream(11), episode_index=4)
    assert first.to_csv() == second.to_csv()
    assert first.to_csv().splitlines()[0] == "episode,stage,s0,s1,a0,reward"
    assert len(first.to_csv().splitlines()) == 21


def test_transcript_next_state():
    env = SquashedLqr(quiet_lqr(horizon=3))
    transcript = run_episode(env, lambda h, s: np.array([0.5]), seeded_stream(0))
    np.testing.assert_allclose(transcript.next_state(0), transcript.steps[1].state)
    np.testing.assert_allclose(transcript.next_state(2), transcript.final_state)


def test_smooth_density_is_normalized():
    cfg = SmoothDensityMdpConfig()
    nodes, weights = gauss_legendre(128)
    rng = np.random.default_rng(5)
    for s, a in rng.uniform(-1.0, 1.0, size=(20, 2)):
        mass = weights @ density_eval(cfg, nodes, s, a)
        assert mass == pytest.approx(1.0, abs=1e-6)


def test_density_uniform_limit_and_domain():
    cfg = SmoothDensityMdpConfig(concentration=0.0)
    np.testing.assert_allclose(density_eval(cfg, np.linspace(-1, 1, 7), 0.3, -0.2), 0.5)
    with pytest.raises(DomainError):
        density_eval(SmoothDensityMdpConfig(), 1.5, 0.0, 0.0)


@pytest.mark.parametrize("cfg", [SmoothDensityMdpConfig(), PolynomialDensityMdpConfig()])
def test_inverse_cdf_inverts_the_density(cfg):
    for u, s, a in [(0.1, 0.2, -0.5), (0.5, -0.7, 0.9), (0.93, 0.0, 1.0)]:
        x = float(cfg.inverse_cdf(u, s, a))
        nodes, weights = gauss_legendre(64, -1.0, x)
        assert weights @ cfg.density(nodes, s, a) == pytest.approx(u, abs=1e-8)


def test_polynomial_density_rejects_large_tilt():
    with pytest.raises(ValueError):
        PolynomialDensityMdpConfig(tilt=1.0)


def test_density_mdp_episode_stays_in_interval():
    env = DensityMdp(SmoothDensityMdpConfig())
    transcript = run_episode(env, lambda h, s: np.array([1.0]), seeded_stream(2))
    assert transcript.horizon == 5
    states = np.array([step.state[0] for step in transcript.steps] + [transcript.final_state[0]])
    assert np.all(np.abs(states) <= 1.0)
    assert transcript.steps[0].reward == pytest.approx(0.5)
    assert env.reward_bound() == pytest.approx(0.5)


def test_random_tabular_mdp_is_reproducible():
    first = random_tabular_mdp(seeded_stream(1))
    second = random_tabular_mdp(seeded_stream(1))
    np.testing.assert_array_equal(first.transitions, second.transitions)
    np.testing.assert_allclose(first.transitions.sum(axis=2), 1.0)
    assert first.rewards.min() >= 0.0 and first.rewards.max() <= 1.0
    assert (first.n_states, first.n_actions, first.horizon) == (5, 2, 5)


def test_tabular_step_follows_the_kernel():
    cfg = random_tabular_mdp(seeded_stream(4))
    env = TabularMdp(cfg)
    rng = seeded_stream(9)
    counts = np.zeros(cfg.n_states)
    for _ in range(4000):
        next_state, reward = env.step(np.array([1.0]), np.array([0.0]), rng)
        counts[int(next_state[0])] += 1
        assert reward == cfg.rewards[1, 0]
    np.testing.assert_allclose(counts / counts.sum(), cfg.transitions[1, 0], atol=0.04)
    np.testing.assert_array_equal(env.action_grid(), [[0.0], [1.0]])


def test_shape_check():
    env = DensityMdp(SmoothDensityMdpConfig())
    with pytest.raises(ShapeMismatchError):
        env.step(np.array([0.0, 0.0]), np.array([0.0]), seeded_stream(0))
    assert math.isfinite(env.step(np.array([0.0]), np.array([0.0]), seeded_stream(0))[1])


@pytest.mark.parametrize("which", [0, 1])
def test_random_policy_states_stay_inside_the_unit_ball(which):
    env = SquashedLqr(benchmark_environments()[which])
    rng = seeded_stream(11 + which)
    policy = lambda h, s: rng.uniform(-1.0, 1.0, size=1)
    for k in range(5000):
        transcript = run_episode(env, policy, rng, k)
        states = np.array([step.state for step in transcript.steps] + [transcript.final_state])
        assert np.all(np.linalg.norm(states, axis=1) < 1.0), f"episode {k}"
