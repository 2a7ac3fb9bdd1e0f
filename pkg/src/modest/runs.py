"""Shared pieces of the learning runs: checkpoint grids, error tracking, sampling."""
from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .estimation import Counters, empirical_model
from .mdp import TabularMdp, Trajectory
from .objectives import errors


def geometric_grid(n: int, ratio: float = 1.25) -> list[int]:
    """{ceil(n ratio^-j)} for j = 0, 1, ... down to 1, ascending."""
    pts, x = set(), float(n)
    while x >= 1.0:
        pts.add(int(np.ceil(x)))
        x /= ratio
    pts.add(1)
    return sorted(p for p in pts if 1 <= p <= n)


def log_grid(n: int, points: int = 40, start: int = 100) -> list[int]:
    """``points`` geometrically spaced checkpoints from ``start`` to ``n``."""
    if n <= start:
        return [int(n)]
    grid = np.unique(np.round(np.geomspace(start, n, points)).astype(int))
    grid[-1] = n
    return sorted(set(grid.tolist()))


@dataclass
class RunResult:
    algo: str
    seed: int
    curve: list = field(default_factory=list)  # (t, error_avg, error_max)
    log: list = field(default_factory=list)
    counters: Counters | None = None
    trajectory: Trajectory | None = None

    @property
    def final(self):
        return self.curve[-1]

    def write_log(self, path):
        """One JSON record per episode."""
        with open(path, "w") as f:
            for rec in self.log:
                f.write(json.dumps(rec, default=_plain) + "\n")


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


class ErrorTracker:
    """Records (t, E, W) of the plug-in estimate whenever t hits a checkpoint."""

    def __init__(self, mdp: TabularMdp, checkpoints):
        self.p = mdp.p
        self.points = sorted(set(int(c) for c in checkpoints))
        self.next = 0
        self.curve = []

    def due(self, t: int) -> bool:
        return self.next < len(self.points) and t >= self.points[self.next]

    def record(self, t: int, counters: Counters):
        while self.due(t):
            self.next += 1
        E, W = errors(empirical_model(counters).p_hat, self.p)
        self.curve.append((t, E, W))


class Sampler:
    """Buffered uniform stream driving inverse-CDF draws; deterministic per seed."""

    def __init__(self, mdp: TabularMdp, rng: np.random.Generator, block: int = 8192):
        self.rng = rng
        self.block = block
        self.buf = rng.random(block).tolist()
        self.i = 0
        self.cdf = mdp.cdf.tolist()
        self.S = mdp.num_states

    def uniform(self) -> float:
        if self.i == self.block:
            self.buf = self.rng.random(self.block).tolist()
            self.i = 0
        u = self.buf[self.i]
        self.i += 1
        return u

    def next_state(self, s: int, a: int) -> int:
        return min(bisect_right(self.cdf[s][a], self.uniform()), self.S - 1)

    @staticmethod
    def policy_cdf(probs: np.ndarray) -> list:
        c = np.cumsum(probs, axis=1)
        c[:, -1] = 1.0
        return c.tolist()

    def action(self, pcdf: list, s: int) -> int:
        row = pcdf[s]
        return min(bisect_right(row, self.uniform()), len(row) - 1)


class TrajectoryRecorder:
    def __init__(self, n: int, enabled: bool):
        self.enabled = enabled
        size = n if enabled else 0
        self.s = np.zeros(size, dtype=np.int32)
        self.a = np.zeros(size, dtype=np.int32)
        self.s2 = np.zeros(size, dtype=np.int32)
        self.k = 0

    def add(self, s, a, s2):
        if self.enabled:
            k = self.k
            self.s[k], self.a[k], self.s2[k] = s, a, s2
            self.k += 1

    def build(self, seed) -> Trajectory | None:
        if not self.enabled:
            return None
        return Trajectory(self.s[:self.k].copy(), self.a[:self.k].copy(), self.s2[:self.k].copy(), seed)
