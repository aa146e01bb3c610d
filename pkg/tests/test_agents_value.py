import copy

import numpy as np
import pytest

from drlab.agents import TwinDQN, ValueAgent, ValueAgentConfig, epsilon_schedule
from drlab.mdp.core import Transition
from drlab.replay import Batch

D, A = 3, 2


def make(seed=0, **kw):
    base = dict(hidden=(8,), batch_size=4, warmup=4, capacity=100, num_atoms=11)
    base.update(kw)
    return ValueAgent(ValueAgentConfig(**base), D, A, seed)


def batch(rng, B=6, done=None, n_used=1):
    done = rng.random(B) < 0.5 if done is None else np.full(B, done)
    return Batch(rng.normal(size=(B, D)), rng.integers(A, size=B), rng.normal(size=B),
                 rng.normal(size=(B, D)), done, np.full(B, n_used), np.arange(B), np.ones(B))


def fill(agent, n, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(n):
        agent.observe(Transition(rng.normal(size=D), int(rng.integers(A)), float(rng.normal()),
                                 rng.normal(size=D), bool(rng.random() < 0.2)))


def test_epsilon_schedule():
    assert epsilon_schedule(0) == 1.0
    assert epsilon_schedule(30_000) == pytest.approx(0.01 + 0.99 / np.e)
    assert epsilon_schedule(10**7) == pytest.approx(0.01)
    assert make(noisy=True).epsilon(0) == 0.0


@pytest.mark.parametrize("flags", [{}, {"double": True}, {"dueling": "mean", "n_step": 3}])
def test_terminal_target_is_reward(flags):
    ag = make(**flags)
    b = batch(np.random.default_rng(1), done=True)
    assert np.array_equal(ag.compute_targets(b), b.rewards)


def test_scalar_target_formula_nstep():
    ag = make(n_step=3)
    b = batch(np.random.default_rng(2), done=False, n_used=3)
    q_next = ag.q_values(b.next_states, ag.target)
    expected = b.rewards + 0.99 ** 3 * q_next.max(axis=1)
    assert np.allclose(ag.compute_targets(b), expected, rtol=0, atol=1e-15)


def test_double_with_identical_nets_equals_vanilla():
    b = batch(np.random.default_rng(3))
    assert np.array_equal(make(double=True).compute_targets(b), make().compute_targets(b))


def test_double_uses_online_argmax():
    ag = make(double=True)
    ag.target = ag.net.init_params(np.random.default_rng(9))
    b = batch(np.random.default_rng(4), done=False)
    a_star = np.argmax(ag.q_values(b.next_states), axis=1)
    q_t = ag.q_values(b.next_states, ag.target)
    expected = b.rewards + 0.99 * q_t[np.arange(6), a_star]
    assert np.allclose(ag.compute_targets(b), expected, atol=1e-15)


def test_categorical_targets():
    ag = make(distributional="categorical", v_min=-5.0, v_max=5.0)
    rng = np.random.default_rng(5)
    b = batch(rng)
    rows = ag.compute_targets(b)
    assert rows.shape == (6, 11) and np.allclose(rows.sum(axis=1), 1.0, atol=1e-12)
    # terminal: the point mass at r, split between its two neighbours
    b = batch(rng, done=True)
    b.rewards[:] = 1.5
    rows = ag.compute_targets(b)
    assert np.allclose(rows[:, 6], 0.5) and np.allclose(rows[:, 7], 0.5)
    ag = make(distributional="categorical", v_min=-5.0, v_max=5.0, gamma=0.0)
    b = batch(rng, done=False)
    b.rewards[:] = 2.0
    assert np.allclose(ag.compute_targets(b)[:, 7], 1.0)


def test_quantile_targets():
    ag = make(distributional="quantile")
    rng = np.random.default_rng(6)
    b = batch(rng, done=True)
    t = ag.compute_targets(b)
    assert t.shape == (6, 11) and np.all(t == b.rewards[:, None])
    b = batch(rng, done=False)
    atoms = ag.net(ag.target, b.next_states)
    a_star = np.argmax(atoms.mean(axis=-1), axis=1)
    expected = b.rewards[:, None] + 0.99 * atoms[np.arange(6), a_star]
    assert np.allclose(ag.compute_targets(b), expected, atol=1e-15)


def test_targets_are_held_fixed():
    # the gradient is d/d theta of the loss with the targets as constants
    ag = make()
    b = batch(np.random.default_rng(7))
    y = ag.compute_targets(b)
    res, grads, _ = ag.loss_and_grads(b, y)
    flat = ag.params.flatten()
    k = 3
    h = 1e-6

    def L(v):
        p = ag.params.unflatten(v)
        q = ag.net(p, b.states)[np.arange(6), b.actions]
        return np.mean((q - y) ** 2)
    e = flat.copy()
    e[k] += h
    up = L(e)
    e[k] -= 2 * h
    fd = (up - L(e)) / (2 * h)
    assert grads.flatten()[k] == pytest.approx(fd, rel=1e-5)


def test_warmup_is_a_noop():
    ag = make(warmup=50)
    fill(ag, 10)
    before = ag.params.copy()
    assert ag.train_step() is None and ag.params.equal(before)


def test_zero_learning_rate_leaves_params():
    ag = make(lr=0.0)
    fill(ag, 20)
    before = ag.params.copy()
    for _ in range(3):
        assert ag.train_step() is not None
    assert ag.params.equal(before)


def test_target_sync_every_k_steps():
    ag = make(target_update=3, lr=1e-2)
    fill(ag, 20)
    t0 = ag.target.copy()
    ag.train_step()
    ag.train_step()
    assert ag.target.equal(t0) and not ag.params.equal(t0)
    ag.train_step()
    assert ag.target.equal(ag.params)
    no_t = make(target_network=False)
    assert no_t.target is no_t.params


def test_prioritized_categorical_priority_is_clipped_kl():
    ag = make(distributional="categorical", prioritized=True, alpha=0.5)
    fill(ag, 30)
    twin = copy.deepcopy(ag)
    b = twin.buffer.sample(4, 0.4)
    y = twin.compute_targets(b)
    logp = twin.net(twin.params, b.states)[np.arange(4), b.actions]
    safe = np.where(y > 0, y, 1.0)
    kl = np.sum(np.where(y > 0, y * (np.log(safe) - logp), 0.0), axis=1)
    ag.train_step(0)
    leaves = ag.buffer.tree[b.indices]
    assert np.allclose(leaves, np.maximum(np.minimum(kl, 1.0) ** 0.5, 1e-6), rtol=1e-12)


def test_nstep_records_reach_buffer():
    ag = make(n_step=3, gamma=0.5)
    s = np.zeros(D)
    for r, d in [(1.0, False), (1.0, False), (1.0, False), (1.0, True)]:
        ag.observe(Transition(s, 0, r, s, d))
    b = ag.buffer.gather(np.arange(len(ag.buffer)))
    assert b.rewards.tolist() == [1.75, 1.75, 1.5, 1.0]
    assert b.n_used.tolist() == [3, 3, 2, 1]


def test_noisy_agent_is_greedy_under_its_draw():
    ag = make(noisy=True)
    s = np.random.default_rng(8).normal(size=(5, D))
    acts = ag.select_actions(s, 0)
    assert acts.shape == (5,) and set(acts.tolist()) <= {0, 1}


def test_twin_buffers_are_isolated():
    tw = TwinDQN(ValueAgentConfig(hidden=(8,), batch_size=2, warmup=2, capacity=50), D, A, 0)
    s = np.zeros(D)
    # episode 1 (agent 0): two steps, episode 2 (agent 1): three steps
    for k, d in [(0, False), (1, True), (2, False), (3, False), (4, True)]:
        tw.observe(Transition(s + k, 0, 0.0, s, d))
    b0 = tw.agents[0].buffer.gather(np.arange(len(tw.agents[0].buffer)))
    b1 = tw.agents[1].buffer.gather(np.arange(len(tw.agents[1].buffer)))
    assert b0.states[:, 0].tolist() == [0.0, 1.0]
    assert b1.states[:, 0].tolist() == [2.0, 3.0, 4.0]
    assert tw.controller(0) == 0


def test_twin_targets_use_partner_argmax():
    tw = TwinDQN(ValueAgentConfig(hidden=(8,)), D, A, 1)
    a0, a1 = tw.agents
    b = batch(np.random.default_rng(9), done=False)
    a_star = np.argmax(a1.q_values(b.next_states, a1.target), axis=1)
    q0 = a0.q_values(b.next_states, a0.target)
    expected = b.rewards + 0.99 * q0[np.arange(6), a_star]
    assert np.allclose(a0.compute_targets(b), expected, atol=1e-15)


def test_config_validation():
    for bad in ({"n_step": 0}, {"distributional": "gauss"}, {"dueling": "sum"},
                {"loss": "l1"}, {"gamma": 1.5}):
        with pytest.raises(ValueError):
            ValueAgentConfig(**bad)
