import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from drlab.mdp.core import Transition
from drlab.replay import (BufferUnderfilledError, NStepAssembler, PrioritizedReplayBuffer,
                          ReplayBuffer, SumTree, assemble_nstep, beta_schedule)

from oracles import nstep_windows


def tr(i, reward=0.0, done=False):
    return Transition(np.array([float(i)]), i % 2, reward, np.array([i + 1.0]), done)


def filled(cls, n, capacity=None, seed=0, **kw):
    buf = cls(capacity or n, rng=np.random.default_rng(seed), **kw)
    for i in range(n):
        buf.push(tr(i))
    return buf


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10_000))
def test_sumtree_audit_after_update_storm(capacity, seed):
    rng = np.random.default_rng(seed)
    tree = SumTree(capacity)
    ref = np.zeros(capacity)
    for _ in range(50):
        idx = rng.integers(capacity, size=rng.integers(1, 6))
        vals = rng.exponential(size=idx.size)
        tree.update(idx, vals)
        for i, v in zip(idx, vals):
            ref[i] = v
    assert tree.audit() == 0.0
    assert np.array_equal(tree.leaves, ref)
    assert tree.total == pytest.approx(ref.sum(), rel=1e-12)


def test_sumtree_find_intervals():
    tree = SumTree(5)
    tree.update(np.arange(5), [1.0, 0.0, 2.0, 0.5, 0.5])
    assert tree.find([0.0, 0.99, 1.0, 2.99, 3.0, 3.5, 3.999]).tolist() == [0, 0, 2, 2, 3, 4, 4]
    with pytest.raises(IndexError):
        tree.update(5, 1.0)
    with pytest.raises(ValueError):
        tree.update(0, -1.0)


def test_fifo_eviction_and_ages():
    buf = filled(ReplayBuffer, 7, capacity=4)
    assert len(buf) == 4
    stored = sorted(buf.gather(np.arange(4)).states[:, 0].tolist())
    assert stored == [3.0, 4.0, 5.0, 6.0]
    assert sorted(buf.ages().tolist()) == [3, 4, 5, 6]


def test_single_record_sampled_repeatedly():
    for cls in (ReplayBuffer, PrioritizedReplayBuffer):
        buf = filled(cls, 1)
        batch = buf.sample(6)
        assert len(batch) == 6 and np.all(batch.states == 0.0)


def test_empty_buffer_raises():
    for cls in (ReplayBuffer, PrioritizedReplayBuffer):
        with pytest.raises(BufferUnderfilledError):
            cls(3).sample(2)


def test_uniform_sampling_chi_square():
    buf = filled(ReplayBuffer, 10)
    counts = np.bincount(buf.sample(200_000).indices, minlength=10)
    assert chisquare(counts).pvalue > 1e-3


def test_alpha_zero_is_uniform():
    buf = filled(PrioritizedReplayBuffer, 8, alpha=0.0)
    buf.update_priorities(np.arange(8), np.linspace(0.01, 1.0, 8))
    assert np.allclose(buf.probabilities(), 1 / 8, atol=1e-15)
    batch = buf.sample(16, beta=1.0)
    assert np.all(batch.weights == 1.0)


def test_weights_trivial_cases():
    buf = filled(PrioritizedReplayBuffer, 6)
    assert np.all(buf.sample(32, beta=0.7).weights == 1.0)
    buf.update_priorities(np.arange(6), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert np.all(buf.sample(32, beta=0.0).weights == 1.0)
    with pytest.raises(ValueError):
        buf.sample(4, beta=1.5)


def test_is_weights_formula():
    buf = filled(PrioritizedReplayBuffer, 5, alpha=0.6)
    rho = np.array([0.05, 0.2, 0.4, 0.8, 1.0])
    buf.update_priorities(np.arange(5), rho)
    batch = buf.sample(50, beta=0.4)
    p = rho ** 0.6 / np.sum(rho ** 0.6)
    w = (1 / (5 * p[batch.indices])) ** 0.4
    assert np.allclose(batch.weights, w / w.max(), rtol=1e-12, atol=0)
    assert np.allclose(batch.probs, p[batch.indices], rtol=1e-12, atol=0)


def test_priority_clipping_and_running_max():
    buf = filled(PrioritizedReplayBuffer, 2, alpha=0.5)
    buf.update_priorities([0], [1.7])
    assert buf.tree[0] == 1.0 and buf.max_priority == 1.0
    buf = filled(PrioritizedReplayBuffer, 2, capacity=4, alpha=1.0)
    buf.update_priorities([0, 1], [0.3, 0.2])
    assert buf.max_priority == 1.0
    slot = buf.push(tr(9))
    assert buf.tree[slot] == 1.0
    with pytest.raises(ValueError):
        buf.update_priorities([0], [np.nan])
    with pytest.raises(IndexError):
        buf.update_priorities([3], [0.5])


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_three_to_one_ratio(alpha):
    buf = filled(PrioritizedReplayBuffer, 2, alpha=alpha, seed=3)
    buf.update_priorities([0, 1], [1.0, (1 / 3) ** (1 / alpha)])
    counts = np.bincount(buf.sample(400_000).indices, minlength=2)
    assert counts[0] / counts[1] == pytest.approx(3.0, rel=0.02)


def test_priority_floor_keeps_records_reachable():
    buf = filled(PrioritizedReplayBuffer, 4, min_priority=1e-6)
    buf.update_priorities(np.arange(4), [0.0, 0.0, 0.0, 1.0])
    assert np.all(buf.tree.leaves[:3] == 1e-6)
    assert np.all(buf.probabilities() > 0)


def test_every_record_sampled_eventually():
    buf = filled(PrioritizedReplayBuffer, 20, seed=5)
    buf.update_priorities(np.arange(20), np.geomspace(1e-3, 1.0, 20))
    seen = np.zeros(20, dtype=bool)
    for _ in range(200):
        seen[buf.sample(32).indices] = True
    assert seen.all()


def test_beta_schedule():
    assert beta_schedule(0) == 0.4
    assert beta_schedule(50_000) == pytest.approx(0.7)
    assert beta_schedule(10**7) == 1.0


def test_nstep_example():
    steps = [tr(0, 1.0), tr(1, 1.0), tr(2, 1.0), tr(3, 0.0, True)]
    recs = assemble_nstep(steps, 3, 0.9)
    assert recs[0].reward == pytest.approx(2.71)
    assert recs[0].n_used == 3 and not recs[0].done
    assert recs[0].bootstrap_discount(0.9) == pytest.approx(0.729)
    assert [r.n_used for r in recs] == [3, 3, 2, 1]
    assert all(r.done for r in recs[1:])


def test_nstep_short_episode():
    recs = assemble_nstep([tr(0, 1.0), tr(1, 2.0, True)], 3, 0.5)
    assert [(r.reward, r.n_used, r.done) for r in recs] == [(2.0, 2, True), (2.0, 1, True)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.booleans()), min_size=1, max_size=25),
       st.integers(1, 5))
def test_nstep_matches_window_oracle(steps, n):
    # close the stream with a terminal so every window is flushed
    rewards = [r for r, _ in steps]
    dones = [d for _, d in steps[:-1]] + [True]
    stream = [tr(i, r, d) for i, (r, d) in enumerate(zip(rewards, dones))]
    recs = assemble_nstep(stream, n, 0.9)
    ref = nstep_windows(rewards, dones, n, 0.9)
    assert len(recs) == len(ref)
    for rec, (s, used, done) in zip(recs, ref):
        assert rec.reward == pytest.approx(s, abs=1e-12)
        assert (rec.n_used, rec.done) == (used, done)


def test_nstep_one_is_identity():
    asm = NStepAssembler(1, 0.99)
    out = asm.push(tr(0, 3.0))
    assert len(out) == 1 and out[0].reward == 3.0 and out[0].n_used == 1
    with pytest.raises(ValueError):
        NStepAssembler(0, 0.9)
