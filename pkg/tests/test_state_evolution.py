import math

import numpy as np
import pytest
from scipy.stats import norm

from l1bp.instance_gen import RngSeed, gen_signal
from l1bp.state_evolution import (MacroState, QuadratureSpec, active_probability,
                                  find_threshold, initial_state, recovers, se_trajectory,
                                  se_update, se_update_empirical, solve_c,
                                  soft_threshold_gaussian_moments,
                                  soft_threshold_gaussian_moments_quad)

CLOSED = QuadratureSpec(method="closed")


@pytest.mark.parametrize("mse", [1e-6, 0.01, 0.3, 2.0])
@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.8])
def test_solve_c_quantile_when_signal_absent(mse, alpha):
    expected = math.sqrt(alpha * mse) * norm.isf(alpha / 2)
    assert solve_c(mse, 0.0, alpha) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("rho", [0.0, 0.05, 0.2, 0.6])
@pytest.mark.parametrize("mse", [1e-8, 1e-3, 0.1, 1.0])
def test_solve_c_residual(rho, mse):
    c = solve_c(mse, rho, 0.5)
    assert c > 0
    assert abs(active_probability(c, mse, rho, 0.5) - 0.5) < 1e-10


def test_solve_c_residual_sign_and_monotone():
    rho, alpha = 0.1, 0.5
    c1, c2 = solve_c(0.1, rho, alpha), solve_c(0.2, rho, alpha)
    assert c2 > c1
    for c, mse in ((c1, 0.1), (c2, 0.2)):
        assert active_probability(c * (1 - 1e-6), mse, rho, alpha) > alpha
        assert active_probability(c * (1 + 1e-6), mse, rho, alpha) < alpha


def test_solve_c_degenerate_cases():
    assert solve_c(0.0, 0.0, 0.5) == math.inf
    assert solve_c(0.0, 0.2, 0.5) == 0.0
    with pytest.raises(ValueError):
        solve_c(-1.0, 0.1, 0.5)
    with pytest.raises(ValueError):
        solve_c(0.1, 0.1, 1.0)


@pytest.mark.parametrize("sigma", [0.05, 0.5, 2.0])
@pytest.mark.parametrize("theta", [0.0, 0.3, 1.5])
def test_quadrature_matches_closed_form(sigma, theta):
    for mu in (0.0, -0.7, 0.2, 3.0):
        closed = soft_threshold_gaussian_moments(np.array([mu]), sigma, theta)
        quad = soft_threshold_gaussian_moments_quad(mu, sigma, theta)
        for a, b in zip(closed, quad):
            assert abs(float(a[0]) - b) < 1e-8


def test_closed_form_moments_against_monte_carlo():
    rng = np.random.default_rng(0)
    mu, sigma, theta = 0.4, 0.8, 0.5
    x = mu + sigma * rng.standard_normal(2_000_000)
    eta = np.sign(x) * np.maximum(np.abs(x) - theta, 0)
    closed = soft_threshold_gaussian_moments(np.array([mu]), sigma, theta)
    for c, mc in zip(closed, (eta.mean(), (eta ** 2).mean(), ((eta - mu) ** 2).mean())):
        assert abs(float(c[0]) - mc) < 5e-3


@pytest.mark.parametrize("rho", [0.05, 0.15, 0.3])
def test_update_quadrature_vs_closed(rho):
    s = initial_state(rho, 0.5)
    for _ in range(10):
        a, b = se_update(s), se_update(s, CLOSED)
        assert abs(a.m - b.m) < 1e-8 and abs(a.q - b.q) < 1e-8 and abs(a.mse - b.mse) < 1e-8
        s = a


def test_rho_zero_is_absorbing():
    s = se_update(initial_state(0.0, 0.5))
    assert s.m == 0 and s.q == 0 and s.mse == 0


def test_zero_mse_is_absorbing():
    s = MacroState(0.2, 0.2, 0.3, 0.2, 0.5, 0.0)
    for _ in range(3):
        s = se_update(s)
        assert s.mse == 0.0 and s.m == s.q == s.q0


@pytest.mark.parametrize("rho,alpha", [(0.1, 0.5), (0.25, 0.5), (0.05, 0.25), (0.4, 0.75)])
@pytest.mark.parametrize("lagged", [False, True])
def test_trajectory_invariants(rho, alpha, lagged):
    for s in se_trajectory(rho, alpha, 60, QuadratureSpec(lagged=lagged)):
        assert s.mse >= 0
        assert s.m ** 2 <= s.q * s.q0 * (1 + 1e-12) + 1e-15
        assert s.mse == pytest.approx(max(s.q - 2 * s.m + s.q0, 0.0), rel=1e-12, abs=1e-12)


def test_recovers_bracket():
    assert recovers(0.15, 0.5)
    assert not recovers(0.25, 0.5)


def test_subcritical_mse_becomes_tiny():
    traj = se_trajectory(0.15, 0.5, 400)
    assert traj[-1].mse < 1e-8
    assert all(b.mse <= a.mse for a, b in zip(traj, traj[1:]))


def test_threshold_monotone_in_alpha():
    quad = QuadratureSpec(method="closed")
    t = [find_threshold(a, quad, bisect_tol=2e-3) for a in (0.25, 0.5, 0.75)]
    assert t[0] < t[1] < t[2]
    assert 0.15 < t[1] < 0.25


def test_lagged_schedule_same_basin():
    lag = QuadratureSpec(lagged=True)
    assert se_trajectory(0.15, 0.5, 2000, lag, c_init=1.0)[-1].mse < 1e-10
    assert se_trajectory(0.25, 0.5, 2000, lag, c_init=1.0)[-1].mse > 1e-6


def test_empirical_update_approaches_prior_for_large_signal():
    x0 = gen_signal(400_000, 0.15, RngSeed(0)).values
    s_emp = initial_state(0.15, 0.5, signal=x0)
    s = initial_state(0.15, 0.5)
    for _ in range(5):
        s_emp = se_update_empirical(s_emp, x0, lagged=False)
        s = se_update(s)
        assert s_emp.mse == pytest.approx(s.mse, rel=0.02)


def test_invalid_quadrature():
    with pytest.raises(ValueError):
        QuadratureSpec(nodes=1)
    with pytest.raises(ValueError):
        QuadratureSpec(method="hermite")
