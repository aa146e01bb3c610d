"""Discrete return distributions and the metrics/projections acting on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp.tabular import TabularMDP


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution with a sorted support and matching probabilities."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64).ravel()
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if support.shape != probs.shape or support.size == 0:
            raise ValueError("support and probs must be non-empty and equally long")
        if np.any(np.diff(support) < 0):
            raise ValueError("support must be sorted")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_atoms(cls, atoms, probs=None) -> "DiscreteDistribution":
        """Build from unsorted atoms, merging duplicates; equal weights by default."""
        atoms = np.asarray(atoms, dtype=np.float64).ravel()
        if probs is None:
            probs = np.full(atoms.size, 1.0 / atoms.size)
        probs = np.asarray(probs, dtype=np.float64).ravel()
        values, inverse = np.unique(atoms, return_inverse=True)
        merged = np.zeros(values.size)
        np.add.at(merged, inverse, probs)
        return cls(values, merged / merged.sum())

    @classmethod
    def point(cls, x: float) -> "DiscreteDistribution":
        return cls(np.array([float(x)]), np.array([1.0]))

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def cdf(self, x) -> np.ndarray:
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(self.support, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, omega) -> np.ndarray:
        """``F^{-1}(w) = inf{x : F(x) >= w}``."""
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(omega, dtype=np.float64), side="left")
        return self.support[np.minimum(idx, self.support.size - 1)]


def support_grid(v_min: float, v_max: float, num_atoms: int) -> np.ndarray:
    """Uniform grid ``z_i = v_min + i/(A-1) * (v_max - v_min)``."""
    if num_atoms < 2 or not v_min < v_max:
        raise ValueError("need num_atoms >= 2 and v_min < v_max")
    return v_min + np.arange(num_atoms) / (num_atoms - 1) * (v_max - v_min)


def project_onto_grid(atoms: np.ndarray, probs: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Split every atom's mass between its two bracketing grid points.

    Works on batches: ``atoms``/``probs`` have shape ``[..., K]`` and the
    result has shape ``[..., len(grid)]``.  Mass outside the grid goes to the
    nearest end point.
    """
    grid = np.asarray(grid, dtype=np.float64)
    atoms = np.asarray(atoms, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    G = grid.size
    lead = atoms.shape[:-1]
    flat_atoms = np.clip(atoms.reshape(-1, atoms.shape[-1]), grid[0], grid[-1])
    flat_probs = np.broadcast_to(probs, atoms.shape).reshape(flat_atoms.shape)
    out = np.zeros((flat_atoms.shape[0], G))
    if G == 1:
        out[:, 0] = flat_probs.sum(axis=1)
        return out.reshape(*lead, G)
    upper = np.clip(np.searchsorted(grid, flat_atoms, side="right"), 1, G - 1)
    lower = upper - 1
    width = grid[upper] - grid[lower]
    w_upper = (flat_atoms - grid[lower]) / width
    w_upper = np.clip(w_upper, 0.0, 1.0)
    rows = np.repeat(np.arange(flat_atoms.shape[0]), flat_atoms.shape[1])
    np.add.at(out, (rows, lower.ravel()), (flat_probs * (1.0 - w_upper)).ravel())
    np.add.at(out, (rows, upper.ravel()), (flat_probs * w_upper).ravel())
    return out.reshape(*lead, G)


def categorical_projection(src: DiscreteDistribution, grid) -> DiscreteDistribution:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    probs = project_onto_grid(src.support, src.probs, grid)
    return DiscreteDistribution(grid, probs / probs.sum())


def _merged_quantile_pieces(p: DiscreteDistribution, q: DiscreteDistribution):
    """Interval lengths on [0, 1] and the constant quantile values of p and q on each."""
    cp = np.cumsum(p.probs)
    cq = np.cumsum(q.probs)
    cp[-1] = cq[-1] = 1.0
    levels = np.unique(np.concatenate([[0.0], cp, cq]))
    levels = levels[(levels >= 0.0) & (levels <= 1.0)]
    lengths = np.diff(levels)
    mids = 0.5 * (levels[:-1] + levels[1:])
    return lengths, p.quantile(mids), q.quantile(mids)


def wasserstein(p: DiscreteDistribution, q: DiscreteDistribution, order=1.0) -> float:
    """Exact ``W_p`` between two discrete distributions (``order=np.inf`` for the sup)."""
    lengths, xp, xq = _merged_quantile_pieces(p, q)
    gaps = np.abs(xp - xq)
    if np.isinf(order):
        return float(gaps[lengths > 0].max(initial=0.0))
    if order < 1:
        raise ValueError("order must be >= 1")
    return float(np.dot(lengths, gaps ** order) ** (1.0 / order))


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """``KL(p || q)`` over the union of supports; ``inf`` when p has mass where q has none."""
    support = np.union1d(p.support, q.support)
    pp = np.zeros(support.size)
    qq = np.zeros(support.size)
    pp[np.searchsorted(support, p.support)] += p.probs
    qq[np.searchsorted(support, q.support)] += q.probs
    mask = pp > 0
    if np.any(qq[mask] == 0):
        return float("inf")
    return float(np.sum(pp[mask] * (np.log(pp[mask]) - np.log(qq[mask]))))


def cramer(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Cramer (l2) distance: ``sqrt(int (F_p - F_q)^2 dx)``."""
    xs = np.union1d(p.support, q.support)
    if xs.size < 2:
        return 0.0
    diff = p.cdf(xs[:-1]) - q.cdf(xs[:-1])
    return float(np.sqrt(np.dot(np.diff(xs), diff ** 2)))


def divergences(p: DiscreteDistribution, q: DiscreteDistribution) -> dict:
    return {"kl": kl_divergence(p, q), "cramer": cramer(p, q)}


def quantile_levels(num_atoms: int) -> np.ndarray:
    """Midpoint quantile levels ``tau_i = (2i + 1) / (2A)``."""
    if num_atoms < 1:
        raise ValueError("num_atoms must be >= 1")
    return (2 * np.arange(num_atoms) + 1) / (2.0 * num_atoms)


def quantile_projection(src: DiscreteDistribution, num_atoms: int) -> np.ndarray:
    """Atoms ``F^{-1}(tau_i)``: the W1-closest equal-weight ``num_atoms``-atom distribution."""
    return src.quantile(quantile_levels(num_atoms))


# --- tables of distributions -------------------------------------------------

def point_mass_table(mdp: TabularMDP, grid: np.ndarray, value: float = 0.0) -> np.ndarray:
    """``[S, A, G]`` table with every cell the projection of a point mass at ``value``."""
    row = project_onto_grid(np.array([value]), np.array([1.0]), grid)
    return np.broadcast_to(row, (mdp.num_states, mdp.num_actions, len(grid))).copy()


def distributional_policy_eval_backup(z: np.ndarray, policy: np.ndarray, mdp: TabularMDP,
                                      grid: np.ndarray) -> np.ndarray:
    """One exact projected application of ``Z(s,a) <- r(s') + gamma Z(s',a')``.

    ``z`` holds grid probabilities of shape ``[S, A, G]``.  The mixture over
    ``s'`` and ``a'`` is formed exactly, then projected onto ``grid``.
    Entering a terminal state contributes a point mass at ``r(s')``.
    Terminal cells are set to the projected point mass at 0.
    """
    grid = np.asarray(grid, dtype=np.float64)
    S, A, G = z.shape
    # mixture over a' of next-state distributions, per s'
    next_mix = np.einsum("ta,tag->tg", policy, z)
    out = np.zeros_like(z)
    for s2 in range(S):
        if mdp.terminal[s2]:
            shifted = np.full(G, mdp.rewards[s2])
            mixed = project_onto_grid(shifted[:1], np.ones(1), grid)
        else:
            shifted = mdp.rewards[s2] + mdp.gamma * grid
            mixed = project_onto_grid(shifted, next_mix[s2], grid)
        out += mdp.P[:, :, s2, None] * mixed
    out[mdp.terminal] = project_onto_grid(np.zeros(1), np.ones(1), grid)
    return out


def table_means(z: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return z @ grid


def max_wasserstein(z1: np.ndarray, z2: np.ndarray, grid: np.ndarray, order=1.0) -> float:
    """``sup_{s,a} W_p(Z1(s,a), Z2(s,a))`` for tables on a common grid."""
    S, A, _ = z1.shape
    best = 0.0
    for s in range(S):
        for a in range(A):
            d = wasserstein(_on_grid(z1[s, a], grid), _on_grid(z2[s, a], grid), order)
            best = max(best, d)
    return best


def _on_grid(probs, grid) -> DiscreteDistribution:
    probs = np.clip(probs, 0.0, None)
    return DiscreteDistribution(grid, probs / probs.sum())
