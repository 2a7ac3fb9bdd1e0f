"""Extended value iteration for average-reward MDPs with interval confidence sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import StationaryPolicy


class EviError(RuntimeError):
    pass


@dataclass
class EviResult:
    policy: StationaryPolicy
    actions: np.ndarray
    gain: float
    sweeps: int
    values: np.ndarray


def optimistic_transitions(lo: np.ndarray, hi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Maximise p . u over {lo <= p <= hi, sum p = 1} for every (s, a) row.

    Rows start from their lower bounds; the free mass is poured onto next
    states in decreasing order of ``u`` until each hits its upper bound.
    """
    order = np.argsort(-u, kind="stable")
    lo_o = lo[..., order]
    room = hi[..., order] - lo_o
    free = 1.0 - lo_o.sum(-1, keepdims=True)
    before = np.cumsum(room, axis=-1) - room
    p_o = lo_o + np.clip(free - before, 0.0, room)
    p = np.empty_like(p_o)
    p[..., order] = p_o
    return p


def evi(reward, p_hat, B, eps: float, max_sweeps: int = 100_000, aperiodicity: float = 0.9) -> EviResult:
    """Optimistic average-reward value iteration.

    ``aperiodicity`` mixes each optimistic kernel with the identity
    (p <- tau p + (1 - tau) e_s), which leaves gains and optimal policies
    unchanged while ruling out periodic oscillation of the iterates. Stops when
    span(u' - u) <= eps and returns the greedy deterministic policy.
    """
    r = np.asarray(reward, float)
    p_hat = np.asarray(p_hat, float)
    S, A = r.shape
    if (np.asarray(B) < 0).any():
        raise ValueError("confidence half-widths must be non-negative")
    lo = np.clip(p_hat - B, 0.0, 1.0)
    hi = np.clip(p_hat + B, 0.0, 1.0)
    tau = float(aperiodicity)
    u = np.zeros(S)
    for sweep in range(1, max_sweeps + 1):
        p = optimistic_transitions(lo, hi, u)
        q = r + tau * (p @ u) + (1.0 - tau) * u[:, None]
        u_new = q.max(1)
        diff = u_new - u
        span = diff.max() - diff.min()
        u = u_new - u_new.min()
        if span <= eps:
            actions = q.argmax(1)
            return EviResult(StationaryPolicy.deterministic(actions, A), actions,
                             float(0.5 * (diff.max() + diff.min())), sweeps=sweep, values=u)
    raise EviError(f"EVI did not reach span {eps:g} within {max_sweeps} sweeps")
