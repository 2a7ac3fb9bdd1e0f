"""Visit counters, the empirical model and Bernstein-style confidence bounds."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mdp import TabularMdp, transitional_noise


class InvalidConfigError(ValueError):
    pass


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidConfigError(f"delta must lie in (0, 1), got {delta}")


def _log_floor(x):
    # keeps log terms >= 1 for tiny arguments
    return np.maximum(np.log(x), 1.0)


@dataclass
class Counters:
    T: np.ndarray   # (S, A)
    T3: np.ndarray  # (S, A, S)
    t: int = 0

    @classmethod
    def empty(cls, S: int, A: int) -> "Counters":
        return cls(np.zeros((S, A), dtype=np.int64), np.zeros((S, A, S), dtype=np.int64), 0)

    @property
    def shape(self):
        return self.T.shape

    def update(self, s: int, a: int, s_next: int) -> "Counters":
        self.T[s, a] += 1
        self.T3[s, a, s_next] += 1
        self.t += 1
        return self

    def replay(self, states, actions, next_states) -> "Counters":
        np.add.at(self.T, (states, actions), 1)
        np.add.at(self.T3, (states, actions, next_states), 1)
        self.t += len(states)
        return self

    def copy(self) -> "Counters":
        return Counters(self.T.copy(), self.T3.copy(), self.t)

    @property
    def frequency(self) -> np.ndarray:
        """Empirical state-action frequency T / t (uniform before the first step)."""
        if self.t == 0:
            return np.full(self.T.shape, 1.0 / self.T.size)
        return self.T / self.t

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "T": self.T.tolist(), "T3": self.T3.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Counters":
        d = json.loads(text)
        return cls(np.array(d["T"], dtype=np.int64), np.array(d["T3"], dtype=np.int64), int(d["t"]))


@dataclass
class EmpiricalModel:
    """Plug-in estimate. Unvisited pairs get a uniform row and are flagged."""

    p_hat: np.ndarray      # (S, A, S)
    sigma2_hat: np.ndarray  # (S, A, S); zero on unvisited pairs
    unvisited: np.ndarray  # (S, A) bool

    def to_json(self) -> str:
        return json.dumps({
            "p_hat": self.p_hat.tolist(),
            "sigma2_hat": self.sigma2_hat.tolist(),
            "unvisited": self.unvisited.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalModel":
        d = json.loads(text)
        return cls(np.array(d["p_hat"]), np.array(d["sigma2_hat"]), np.array(d["unvisited"], dtype=bool))


def empirical_model(counters: Counters) -> EmpiricalModel:
    S = counters.T3.shape[-1]
    t_plus = np.maximum(counters.T, 1)[..., None]
    freq = counters.T3 / t_plus
    sigma2 = freq * (1.0 - freq)
    unvisited = counters.T == 0
    p_hat = freq.copy()
    p_hat[unvisited] = 1.0 / S
    return EmpiricalModel(p_hat, sigma2, unvisited)


@dataclass
class ConfidenceSet:
    B: np.ndarray  # (S, A, S) half-widths
    delta: float
    t: int

    def bounds(self, p_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise interval [p_hat - B, p_hat + B] clipped to [0, 1]."""
        return np.clip(p_hat - self.B, 0.0, 1.0), np.clip(p_hat + self.B, 0.0, 1.0)

    def contains(self, p: np.ndarray, p_hat: np.ndarray, tol: float = 0.0) -> bool:
        return bool((np.abs(p - p_hat) <= self.B + tol).all())


def bernstein_halfwidths(counters: Counters, model: EmpiricalModel, delta: float) -> ConfidenceSet:
    """B = 2 sqrt(sigma2 l / T+) + 6 l / T+ with l = log(6 S A T+ / delta)."""
    _check_delta(delta)
    S, A = counters.T.shape
    t_plus = np.maximum(counters.T, 1).astype(float)
    ell = _log_floor(6.0 * S * A * t_plus / delta)[..., None]
    tp = t_plus[..., None]
    B = 2.0 * np.sqrt(model.sigma2_hat * ell / tp) + 6.0 * ell / tp
    return ConfidenceSet(B, delta, counters.t)


@dataclass
class NoiseBound:
    V_plus: np.ndarray  # (S, A)
    slack: np.ndarray   # (S, A) part coming from the concentration term


def noise_upper_bound(counters: Counters, model: EmpiricalModel, delta: float) -> NoiseBound:
    """Optimistic transitional noise

    V+(s,a) = S^{-1/2} sum_{s'} [sqrt(sigma2_hat) + sqrt(2 l' / T+)],
    l' = log(4 S^2 A T+^2 / delta).
    """
    _check_delta(delta)
    S, A = counters.T.shape
    t_plus = np.maximum(counters.T, 1).astype(float)
    ell = _log_floor(4.0 * S**2 * A * t_plus**2 / delta)
    slack = S * np.sqrt(2.0 * ell / t_plus) / np.sqrt(S)
    V_plus = np.sqrt(model.sigma2_hat).sum(-1) / np.sqrt(S) + slack
    return NoiseBound(V_plus, slack)


def true_transitional_noise(mdp: TabularMdp, s: int | None = None, a: int | None = None):
    V = transitional_noise(mdp)
    if s is None:
        return V
    return float(V[s, a])
