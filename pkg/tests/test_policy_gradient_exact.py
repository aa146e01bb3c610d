import numpy as np
import pytest

from drlab.mdp import TabularMDP, chain, layered
from drlab.tabular import (discounted_visitation, exact_J, exact_policy_gradient, fd_gradient,
                           max_kl, performance_identity_check, softmax_policy, surrogate_L,
                           trajectory_policy_gradient)

from oracles import enumerate_return_gradient, visitation_series


def test_visitation_sums_to_one_and_series():
    rng = np.random.default_rng(0)
    m = chain(4, gamma=0.9, slip=0.1)
    for _ in range(5):
        pi = softmax_policy(rng.normal(size=(4, 2)))
        d = discounted_visitation(m, pi)
        assert abs(d.sum() - 1.0) < 1e-10 and np.all(d >= 0)
        ref = visitation_series(m.P, m.terminal, m.start, m.gamma, pi)
        assert np.max(np.abs(d - ref)) < 1e-9


def test_visitation_tiny_gamma_is_start_point_mass():
    m = chain(4, gamma=1e-12)
    d = discounted_visitation(m, softmax_policy(np.zeros((4, 2))))
    assert d[0] == pytest.approx(1.0, abs=1e-11)


def test_gradient_vanishes_with_equal_rewards():
    # every state transition pays the same, the horizon is fixed: J does not depend on pi
    m = layered(3, 2, gamma=0.9, seed=1)
    flat = TabularMDP(m.P, np.where(m.terminal, 1.0, 1.0), m.terminal, 0, 0.9)
    g = exact_policy_gradient(flat, np.random.default_rng(0).normal(size=(6, 2)))
    assert np.max(np.abs(g)) < 1e-12


def test_gradient_matches_finite_differences_chain4():
    rng = np.random.default_rng(1)
    m = chain(4, gamma=0.9)
    for _ in range(3):
        theta = rng.normal(size=(4, 2))
        g = exact_policy_gradient(m, theta)
        fd = fd_gradient(lambda th: exact_J(m, softmax_policy(th)), theta, 1e-5)
        assert np.max(np.abs(g - fd)) <= 1e-6 * np.max(np.abs(fd))


def test_trajectory_form_matches_enumeration_oracle():
    m = layered(3, 2, gamma=0.9, seed=2)
    theta = np.random.default_rng(3).normal(size=(m.num_states, 2))
    g_traj = trajectory_policy_gradient(m, theta, 3)
    ref = enumerate_return_gradient(m.P, m.rewards, m.terminal, m.start, m.gamma, theta, 3)
    assert np.max(np.abs(g_traj - ref)) < 1e-12
    assert np.max(np.abs(exact_policy_gradient(m, theta) - g_traj)) < 1e-8


def test_performance_identity():
    rng = np.random.default_rng(4)
    m = chain(4, gamma=0.9)
    pi = softmax_policy(rng.normal(size=(4, 2)))
    assert performance_identity_check(m, pi, pi) < 1e-15
    for _ in range(10):
        a, b = (softmax_policy(rng.normal(size=(4, 2))) for _ in range(2))
        assert performance_identity_check(m, a, b) < 1e-9


def test_surrogate_gap_shrinks_with_kl():
    rng = np.random.default_rng(5)
    m = chain(4, gamma=0.9, slip=0.1)
    th_old = rng.normal(size=(4, 2))
    direction = rng.normal(size=(4, 2))
    pi_old = softmax_policy(th_old)
    gaps, kls = [], []
    for eps in (1.0, 0.3, 0.1, 0.03):
        pi = softmax_policy(th_old + eps * direction)
        gaps.append(abs(surrogate_L(m, pi, pi_old) - exact_J(m, pi)))
        kls.append(max_kl(pi_old, pi))
    assert gaps[0] > 0
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    assert all(k2 < k1 for k1, k2 in zip(kls, kls[1:]))
