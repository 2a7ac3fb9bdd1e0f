"""Tabular MDPs, the benchmark environments and exact stationary distributions."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components


class InvalidSpecError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


class NonUniqueStationaryError(ValueError):
    pass


ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite MDP given by its full transition tensor ``p[s, a, s']``."""

    p: np.ndarray
    name: str = "mdp"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise InvalidSpecError(f"transition tensor must have shape (S, A, S), got {p.shape}")
        if (p < 0).any():
            raise InvalidSpecError("negative transition probability")
        if np.abs(p.sum(-1) - 1.0).max() > ROW_TOL:
            raise InvalidSpecError("transition rows must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def num_states(self) -> int:
        return self.p.shape[0]

    @property
    def num_actions(self) -> int:
        return self.p.shape[1]

    S = num_states
    A = num_actions

    @cached_property
    def support_size(self) -> np.ndarray:
        """Gamma(s, a): number of reachable next states."""
        return (self.p > 0).sum(-1)

    @property
    def max_support(self) -> int:
        return int(self.support_size.max())

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.p, axis=-1)
        c[..., -1] = 1.0
        return c

    def is_communicating(self) -> bool:
        """Strong connectivity of the graph with an edge s -> s' when some action reaches s'."""
        adj = (self.p > 0).any(axis=1)
        n, _ = connected_components(adj.astype(np.int8), directed=True, connection="strong")
        return n == 1

    def to_json(self) -> str:
        return json.dumps(self.p.tolist())

    @classmethod
    def from_json(cls, text: str, name: str = "mdp") -> "TabularMdp":
        return cls(np.array(json.loads(text), dtype=float), name=name)


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    probs: np.ndarray  # (S, A)

    def __post_init__(self):
        pi = np.asarray(self.probs, dtype=float)
        if pi.ndim != 2 or (pi < 0).any() or np.abs(pi.sum(1) - 1.0).max() > ROW_TOL:
            raise ValueError("policy rows must be probability vectors")
        object.__setattr__(self, "probs", pi)

    @classmethod
    def uniform(cls, S: int, A: int) -> "StationaryPolicy":
        return cls(np.full((S, A), 1.0 / A))

    @classmethod
    def deterministic(cls, actions, A: int) -> "StationaryPolicy":
        actions = np.asarray(actions, dtype=int)
        pi = np.zeros((len(actions), A))
        pi[np.arange(len(actions)), actions] = 1.0
        return cls(pi)


@dataclass
class Trajectory:
    """Visited transitions as three aligned integer arrays."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    seed: int | None = None

    def __len__(self):
        return len(self.states)

    @property
    def steps(self):
        return list(zip(self.states.tolist(), self.actions.tolist(), self.next_states.tolist()))

    def is_chained(self) -> bool:
        return bool(np.all(self.next_states[:-1] == self.states[1:]))


# --- environments -----------------------------------------------------------

RIGHT, LEFT, A_EVEN, A_ODD = 0, 1, 2, 3
W_LEFT, W_RIGHT, W_SELF, W_CENTER, W_NOISY = 0, 1, 2, 3, 4
W_SPIN = W_NOISY  # at the center the last action spins the wheel


def build_noisy_riverswim(size: int, swap_teleport: bool = False) -> TabularMdp:
    """RiverSwim chain with two extra teleport actions.

    States are 0-indexed; state ``i`` carries the 1-based label ``i + 1``, whose
    parity selects the teleport action (odd label: ``A_ODD`` teleports and
    ``A_EVEN`` self-loops, even label the reverse).
    """
    S = int(size)
    if S < 2:
        raise InvalidSpecError("NoisyRiverSwim needs at least 2 states")
    p = np.zeros((S, 4, S))
    for s in range(S):
        p[s, LEFT, max(s - 1, 0)] = 1.0
        if s == 0:
            p[s, RIGHT, 1] = 0.6
            p[s, RIGHT, 0] = 0.4
        elif s == S - 1:
            p[s, RIGHT, s] = 0.6
            p[s, RIGHT, s - 1] = 0.4
        else:
            p[s, RIGHT, s + 1] = 0.35
            p[s, RIGHT, s] = 0.6
            p[s, RIGHT, s - 1] = 0.05
        odd_label = (s + 1) % 2 == 1
        teleport, stay = (A_ODD, A_EVEN) if odd_label != swap_teleport else (A_EVEN, A_ODD)
        p[s, teleport, :] = 1.0 / S
        p[s, stay, s] = 1.0
    return TabularMdp(p, name=f"noisyriverswim:{S}")


def build_wheel(size: int) -> TabularMdp:
    """Wheel-of-Fortune: center state 0 plus a ring of ``size - 1`` states."""
    S = int(size)
    if S < 3:
        raise InvalidSpecError("Wheel needs at least 3 states")
    ring = S - 1
    p = np.zeros((S, 5, S))
    p[0, :, 0] = 1.0
    p[0, W_SPIN, :] = 0.0
    p[0, W_SPIN, 1:] = 1.0 / ring
    for n in range(1, S):
        left = (n - 2) % ring + 1
        right = n % ring + 1
        outcomes = {W_LEFT: left, W_RIGHT: right, W_SELF: n, W_CENTER: 0}
        for a, nxt in outcomes.items():
            p[n, a, nxt] = 1.0
            p[n, W_NOISY, nxt] += 0.25
    return TabularMdp(p, name=f"wheel:{S}")


def build_garnet(S: int, A: int, b: int, seed: int, max_retries: int = 100) -> TabularMdp:
    """Random Garnet instance G(S, A, b), regenerated until communicating."""
    if S < 2 or A < 1:
        raise InvalidSpecError("Garnet needs S >= 2 and A >= 1")
    if not 1 <= b <= S:
        raise InvalidSpecError(f"branching factor b={b} outside [1, {S}]")
    for attempt in range(max_retries):
        rng = np.random.default_rng([int(seed), attempt])
        p = np.zeros((S, A, S))
        for s in range(S):
            for a in range(A):
                k = int(rng.integers(1, b + 1))
                support = rng.choice(S, size=k, replace=False)
                p[s, a, support] = rng.dirichlet(np.ones(k))
        # Dirichlet draws sum to one only up to rounding
        p /= p.sum(-1, keepdims=True)
        mdp = TabularMdp(p, name=f"garnet:{S}x{A}x{b}:{seed}")
        if mdp.is_communicating():
            return mdp
    raise GenerationError(f"no communicating Garnet G({S},{A},{b}) for seed {seed} in {max_retries} tries")


@dataclass(frozen=True)
class EnvSpec:
    kind: str  # "noisyriverswim" | "wheel" | "garnet"
    size: int
    num_actions: int | None = None
    branching: int | None = None
    seed: int = 0
    options: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("noisyriverswim", "wheel", "garnet"):
            raise InvalidSpecError(f"unknown environment kind {self.kind!r}")
        if self.size < 2:
            raise InvalidSpecError("environments need at least 2 states")
        if self.kind == "garnet":
            if self.num_actions is None or self.branching is None:
                raise InvalidSpecError("garnet needs A and b")
            if not 1 <= self.branching <= self.size:
                raise InvalidSpecError(f"branching factor outside [1, {self.size}]")

    @property
    def env_id(self) -> str:
        if self.kind == "garnet":
            return f"garnet:{self.size}x{self.num_actions}x{self.branching}:{self.seed}"
        return f"{self.kind}:{self.size}"

    def build(self) -> TabularMdp:
        if self.kind == "noisyriverswim":
            return build_noisy_riverswim(self.size, **self.options)
        if self.kind == "wheel":
            return build_wheel(self.size)
        return build_garnet(self.size, self.num_actions, self.branching, self.seed)


_ENV_RE = {
    "noisyriverswim": re.compile(r"^noisyriverswim:(\d+)$"),
    "wheel": re.compile(r"^wheel:(\d+)$"),
    "garnet": re.compile(r"^garnet:(\d+)x(\d+)x(\d+)(?::(-?\d+))?$"),
}


def parse_env_id(env_id: str) -> EnvSpec:
    """Parse ``noisyriverswim:<S>``, ``wheel:<S>`` or ``garnet:<S>x<A>x<b>:<seed>``."""
    text = env_id.strip().lower()
    kind = text.split(":", 1)[0]
    pattern = _ENV_RE.get(kind)
    m = pattern.match(text) if pattern else None
    if m is None:
        raise InvalidSpecError(f"cannot parse environment id {env_id!r}")
    if kind == "garnet":
        S, A, b, seed = m.groups()
        return EnvSpec("garnet", int(S), int(A), int(b), int(seed or 0))
    return EnvSpec(kind, int(m.group(1)))


def make_env(env_id: str) -> TabularMdp:
    return parse_env_id(env_id).build()


# --- dynamics ---------------------------------------------------------------

def step(mdp: TabularMdp, s: int, a: int, rng: np.random.Generator) -> int:
    """Draw s' ~ p(.|s, a) by inverse CDF on one uniform draw."""
    u = rng.random()
    return int(min(np.searchsorted(mdp.cdf[s, a], u, side="right"), mdp.num_states - 1))


def policy_matrix(mdp: TabularMdp, policy: StationaryPolicy) -> np.ndarray:
    """State-to-state kernel P_pi[s, s'] = sum_a pi(a|s) p(s'|s, a)."""
    return np.einsum("sa,sat->st", policy.probs, mdp.p)


def recurrent_classes(P: np.ndarray) -> list[np.ndarray]:
    n, labels = connected_components((P > 0).astype(np.int8), directed=True, connection="strong")
    classes = []
    for c in range(n):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(len(P)), members)
        if not (P[np.ix_(members, outside)] > 0).any():
            classes.append(members)
    return classes


def stationary_distribution(mdp: TabularMdp, policy: StationaryPolicy, tol: float = 1e-10) -> np.ndarray:
    """State-action stationary distribution lam(s, a) = nu(s) pi(a|s) of ``policy``."""
    P = policy_matrix(mdp, policy)
    if len(recurrent_classes(P)) != 1:
        raise NonUniqueStationaryError("policy induces more than one recurrent class")
    S = mdp.num_states
    M = P.T - np.eye(S)
    M[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    nu = np.linalg.solve(M, rhs)
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    resid = np.abs(nu @ P - nu).sum()
    if resid > tol:
        raise ArithmeticError(f"stationary residual {resid:.2e} exceeds {tol:.0e}")
    return nu[:, None] * policy.probs


def flow_residual(mdp: TabularMdp, lam: np.ndarray) -> float:
    """Max violation of sum_b lam(s,b) = sum_{s',a} p(s|s',a) lam(s',a)."""
    inflow = np.einsum("sa,sat->t", lam, mdp.p)
    return float(np.abs(lam.sum(1) - inflow).max())


def transitional_noise(mdp: TabularMdp) -> np.ndarray:
    """V(s, a) = sum_{s'} sqrt(p (1 - p)) / sqrt(S) for every pair."""
    p = mdp.p
    return np.sqrt(p * (1.0 - p)).sum(-1) / np.sqrt(mdp.num_states)
