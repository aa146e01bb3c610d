"""Named random streams split from one master seed.

Each stream is keyed by its name, so switching a feature that consumes
(say) exploration noise never shifts the numbers seen by replay sampling.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RngStreams:
    def __init__(self, seed: int = 0, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self._cache = {}

    def get(self, name: str) -> np.random.Generator:
        if name not in self._cache:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (_key(name),))
            self._cache[name] = np.random.default_rng(ss)
        return self._cache[name]

    def child(self, name: str) -> "RngStreams":
        return RngStreams(self.seed, self.path + (_key(name),))

    def env_seed(self, index: int) -> int:
        """Integer seed for environment instance ``index``."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (_key("env"), index))
        return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def as_streams(rngs) -> RngStreams:
    if isinstance(rngs, RngStreams):
        return rngs
    return RngStreams(0 if rngs is None else int(rngs))
