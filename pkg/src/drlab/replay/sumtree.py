"""Array-backed sum tree for proportional sampling."""
from __future__ import annotations

import numpy as np


class SumTree:
    """Complete binary tree of partial sums over ``capacity`` leaves.

    Node ``1`` is the root, node ``k`` has children ``2k`` and ``2k + 1``, and
    leaf ``i`` lives at node ``cap + i`` where ``cap`` is ``capacity`` rounded
    up to a power of two.  Updates recompute parents from their children
    (rather than adding deltas) so internal nodes never drift from the
    exact sum of their children.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._cap = 1 << max(0, (self.capacity - 1).bit_length())
        self.tree = np.zeros(2 * self._cap)
        self.depth = self._cap.bit_length() - 1

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def __getitem__(self, idx):
        return self.tree[self._cap + np.asarray(idx)]

    @property
    def leaves(self) -> np.ndarray:
        return self.tree[self._cap:self._cap + self.capacity]

    def update(self, idx, values) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), idx.shape)
        if np.any(idx < 0) or np.any(idx >= self.capacity):
            raise IndexError("leaf index out of range")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("leaf values must be finite and nonnegative")
        nodes = idx + self._cap
        # later duplicates win, matching sequential assignment
        self.tree[nodes] = values
        nodes = np.unique(nodes)
        while nodes[0] > 1:
            nodes = np.unique(nodes // 2)
            self.tree[nodes] = self.tree[2 * nodes] + self.tree[2 * nodes + 1]

    def find(self, mass) -> np.ndarray:
        """Leaf indices whose cumulative-sum interval contains each ``mass``."""
        mass = np.array(mass, dtype=np.float64, ndmin=1)
        node = np.ones(mass.shape, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * node
            lv = self.tree[left]
            go_right = mass >= lv
            mass = np.where(go_right, mass - lv, mass)
            node = np.where(go_right, left + 1, left)
        leaf = node - self._cap
        # floating round-off can push a draw just past the last filled leaf
        bad = (leaf >= self.capacity) | (self.tree[node] <= 0)
        if np.any(bad):
            nz = np.flatnonzero(self.leaves > 0)
            if nz.size:
                pos = np.searchsorted(nz, leaf[bad], side="right") - 1
                leaf[bad] = nz[np.clip(pos, 0, nz.size - 1)]
        return leaf

    def audit(self) -> float:
        """Largest ``|parent - (left + right)|`` over all internal nodes."""
        if self._cap == 1:
            return 0.0
        k = np.arange(1, self._cap)
        return float(np.max(np.abs(self.tree[k] - (self.tree[2 * k] + self.tree[2 * k + 1]))))
