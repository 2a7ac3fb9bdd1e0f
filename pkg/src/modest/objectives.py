"""Estimation errors, the convex surrogates and the (weighted) entropies.

Every occupancy-like argument is an (S, A) array. ``Objective`` wraps all the
variants behind a single minimisation contract: entropies are returned negated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .estimation import InvalidConfigError


class DomainError(ValueError):
    pass


# --- errors -----------------------------------------------------------------

def _l1_rows(p_hat, p):
    p_hat, p = np.asarray(p_hat, float), np.asarray(p, float)
    if p_hat.shape != p.shape:
        raise ValueError(f"shape mismatch {p_hat.shape} vs {p.shape}")
    return np.abs(p_hat - p).sum(-1)


def error_avg(p_hat, p) -> float:
    return float(_l1_rows(p_hat, p).mean())


def error_max(p_hat, p) -> float:
    return float(_l1_rows(p_hat, p).max())


def errors(p_hat, p) -> tuple[float, float]:
    d = _l1_rows(p_hat, p)
    return float(d.mean()), float(d.max())


# --- surrogates -------------------------------------------------------------

def surrogate_F(V, T, S: int):
    """F(s,a; T) = V / sqrt(T + 1) + S / (T + 1)."""
    T = np.asarray(T, dtype=float)
    return np.asarray(V) / np.sqrt(T + 1.0) + S / (T + 1.0)


def g_n(V, lam, n: int, S: int):
    x = np.asarray(lam, dtype=float) + 1.0 / n
    return np.asarray(V) / np.sqrt(x) + S / (np.sqrt(n) * x)


def g_n_grad(V, lam, n: int, S: int):
    """Elementwise derivative of g_n in lam."""
    x = np.asarray(lam, dtype=float) + 1.0 / n
    return -0.5 * np.asarray(V) * x**-1.5 - S / (np.sqrt(n) * x**2)


def loss_avg(V, lam, n: int, S: int) -> float:
    return float(np.mean(g_n(V, lam, n, S)))


def loss_worst(V, lam, n: int, S: int) -> float:
    return float(np.max(g_n(V, lam, n, S)))


def loss_lse_worst(V, lam, n: int, S: int) -> float:
    return float(logsumexp(g_n(V, lam, n, S)))


def loss_asymptotic_avg(V, lam) -> float:
    return float(np.mean(_v_over_sqrt(V, lam)))


def loss_asymptotic_worst(V, lam) -> float:
    return float(np.max(_v_over_sqrt(V, lam)))


def _v_over_sqrt(V, lam):
    V, lam = np.asarray(V, float), np.asarray(lam, float)
    if ((lam <= 0) & (V > 0)).any():
        raise DomainError("zero mass on a pair with positive noise")
    out = np.zeros_like(V)
    pos = V > 0
    out[pos] = V[pos] / np.sqrt(lam[pos])
    return out


# --- entropies --------------------------------------------------------------

def weighted_entropy(w, lam) -> float:
    """H_w = -sum w lam log lam, with 0 log 0 = 0."""
    lam = np.asarray(lam, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, lam * np.log(lam), 0.0)
    return float(-(np.asarray(w) * terms).sum())


def smoothed_weighted_entropy(w, lam, mu: float) -> float:
    lam = np.asarray(lam, float)
    return float((np.asarray(w) * lam * -np.log(lam + mu)).sum())


def smoothed_weighted_entropy_grad(w, lam, mu: float):
    if mu <= 0:
        raise DomainError("smoothed entropy gradient needs mu > 0")
    lam = np.asarray(lam, float)
    if (lam < 0).any():
        raise DomainError("negative occupancy")
    x = lam + mu
    return -np.asarray(w) * (np.log(x) + lam / x)


def modest_weights(V, S: int, delta: float):
    """w = V / sqrt(S L) with L = log(S A / delta)."""
    if not 0.0 < delta < 1.0:
        raise InvalidConfigError(f"delta must lie in (0, 1), got {delta}")
    V = np.asarray(V, float)
    A = V.shape[-1]
    return V / np.sqrt(S * np.log(S * A / delta))


def entropy_nonnegativity_cap(S: int, A: int) -> float:
    """Largest mu for which the smoothed entropy gradient stays elementwise >= 0."""
    return 1.0 / np.e - 1.0 / (S * A)


# --- unified objective ------------------------------------------------------

KINDS = ("avg", "lse", "asym-avg", "weighted-entropy", "entropy")


@dataclass
class Objective:
    """Function to *minimise* over occupancy measures.

    kind:
      avg               L_n^E with noise ``V``
      lse               log-sum-exp smoothing of L_n^W
      asym-avg          (1/SA) sum V / sqrt(lam)
      weighted-entropy  -H_{w, mu}
      entropy           -H_{1, mu}
    """

    kind: str
    V: np.ndarray | None = None
    weights: np.ndarray | None = None
    n: int = 1
    mu: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.kind in ("avg", "lse", "asym-avg") and self.V is None:
            raise ValueError(f"{self.kind} needs the noise V")
        if self.kind == "weighted-entropy":
            if self.weights is None or (np.asarray(self.weights) < 0).any():
                raise ValueError("weighted entropy needs non-negative weights")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def _w(self, lam):
        return np.ones_like(lam) if self.kind == "entropy" else np.asarray(self.weights, float)

    def _check(self, lam):
        lam = np.asarray(lam, float)
        if self.kind in ("avg", "lse") and (lam < self.eta / 2).any():
            raise DomainError(f"occupancy below eta/2 = {self.eta / 2:g}")
        if (lam < 0).any():
            raise DomainError("negative occupancy")
        return lam

    def value(self, lam) -> float:
        lam = self._check(lam)
        S = lam.shape[0]
        if self.kind == "avg":
            return loss_avg(self.V, lam, self.n, S)
        if self.kind == "lse":
            return loss_lse_worst(self.V, lam, self.n, S)
        if self.kind == "asym-avg":
            return loss_asymptotic_avg(self.V, lam)
        w = self._w(lam)
        if self.mu == 0:
            return -weighted_entropy(w, lam)
        return -smoothed_weighted_entropy(w, lam, self.mu)

    def grad(self, lam) -> np.ndarray:
        lam = self._check(lam)
        S = lam.shape[0]
        if self.kind == "avg":
            return g_n_grad(self.V, lam, self.n, S) / lam.size
        if self.kind == "lse":
            weights = softmax(g_n(self.V, lam, self.n, S), axis=None)
            return weights * g_n_grad(self.V, lam, self.n, S)
        if self.kind == "asym-avg":
            V = np.asarray(self.V, float)
            if ((lam <= 0) & (V > 0)).any():
                raise DomainError("zero mass on a pair with positive noise")
            out = np.zeros_like(lam)
            pos = V > 0
            out[pos] = -0.5 * V[pos] * lam[pos] ** -1.5
            return out / lam.size
        return -smoothed_weighted_entropy_grad(self._w(lam), lam, self.mu)
