"""Batch losses returning the value, the gradient w.r.t. predictions and per-sample terms.

Targets are constants: nothing is propagated into them.  An optional
``weights`` vector (importance-sampling weights) scales each sample before
the batch mean.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np


class LossResult(NamedTuple):
    value: float
    grad: np.ndarray
    per_sample: np.ndarray


def _weights(weights, B):
    return np.ones(B) if weights is None else np.asarray(weights, dtype=np.float64)


def mse(pred, target, weights=None) -> LossResult:
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - np.asarray(target, dtype=np.float64)
    B = pred.shape[0]
    w = _weights(weights, B)
    per = diff ** 2
    return LossResult(float(np.mean(w * per)), 2.0 * w * diff / B, per)


def huber(pred, target, weights=None, delta: float = 1.0) -> LossResult:
    """Smooth L1: ``0.5 d^2`` for ``|d| <= delta``, ``delta (|d| - 0.5 delta)`` beyond."""
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - np.asarray(target, dtype=np.float64)
    B = pred.shape[0]
    w = _weights(weights, B)
    small = np.abs(diff) <= delta
    per = np.where(small, 0.5 * diff ** 2, delta * (np.abs(diff) - 0.5 * delta))
    g = np.where(small, diff, delta * np.sign(diff))
    return LossResult(float(np.mean(w * per)), w * g / B, per)


def kl_to_target(logp, target, weights=None) -> LossResult:
    """``KL(target || exp(logp))`` per row, over the last axis.

    ``logp`` are predicted log-probabilities ``[B, N]``.  A target atom with
    mass where the prediction is ``-inf`` gives an infinite loss.
    """
    logp = np.asarray(logp, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    B = logp.shape[0]
    w = _weights(weights, B)
    has = target > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(has, target * (np.log(np.where(has, target, 1.0)) - logp), 0.0)
    per = terms.reshape(B, -1).sum(axis=1)
    per = np.where(np.any((has & np.isneginf(logp)).reshape(B, -1), axis=1), np.inf, per)
    grad = -target * (w / B).reshape((B,) + (1,) * (logp.ndim - 1))
    return LossResult(float(np.mean(w * per)), grad, per)


def quantile_regression(atoms, target_atoms, weights=None, taus=None) -> LossResult:
    """Pinball loss of predicted atoms ``[B, N]`` against target samples ``[B, M]``.

    Per sample: ``(1/M) sum_j sum_i rho_{tau_i}(y_j - zeta_i)`` with
    ``rho_tau(u) = u (tau - 1[u < 0])``, so atom ``i`` is pulled to the
    ``tau_i`` quantile of the targets.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    target_atoms = np.asarray(target_atoms, dtype=np.float64)
    B, N = atoms.shape
    M = target_atoms.shape[1]
    if taus is None:
        taus = (2 * np.arange(N) + 1) / (2.0 * N)
    w = _weights(weights, B)
    u = target_atoms[:, None, :] - atoms[:, :, None]        # [B, N, M]
    ind = (u < 0).astype(np.float64)
    coef = taus[None, :, None] - ind
    per = (u * coef).sum(axis=(1, 2)) / M
    grad = -coef.sum(axis=2) / M * (w / B)[:, None]
    return LossResult(float(np.mean(w * per)), grad, per)


def clipped_ppo(new_logp, old_logp, adv, clip: float = 0.1, weights=None) -> LossResult:
    """Negated clipped surrogate ``-mean min(r A, clip(r, 1-eps, 1+eps) A)``.

    The gradient is w.r.t. ``new_logp``; it vanishes for samples where the
    clipped branch is the active minimum.
    """
    new_logp = np.asarray(new_logp, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    B = new_logp.shape[0]
    w = _weights(weights, B)
    r = np.exp(new_logp - np.asarray(old_logp, dtype=np.float64))
    unclipped = r * adv
    clipped = np.clip(r, 1.0 - clip, 1.0 + clip) * adv
    obj = np.minimum(unclipped, clipped)
    active = unclipped <= clipped
    grad = -np.where(active, unclipped, 0.0) * w / B
    return LossResult(float(-np.mean(w * obj)), grad, -obj)


def entropy(logp, weights=None) -> LossResult:
    """Mean policy entropy ``-sum_a p log p`` (a quantity to maximise, not a loss)."""
    logp = np.asarray(logp, dtype=np.float64)
    B = logp.shape[0]
    w = _weights(weights, B)
    p = np.exp(logp)
    plogp = np.where(p > 0, p * logp, 0.0)
    per = -plogp.sum(axis=-1)
    grad = -(plogp + p) * (w / B)[:, None]
    return LossResult(float(np.mean(w * per)), grad, per)


LOSSES = {
    "mse": mse,
    "huber": huber,
    "kl_to_target": kl_to_target,
    "quantile_regression": quantile_regression,
    "clipped_ppo": clipped_ppo,
    "entropy": entropy,
}


def loss(kind: str, *args, **kwargs) -> LossResult:
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss kind {kind!r}") from None
    return fn(*args, **kwargs)
