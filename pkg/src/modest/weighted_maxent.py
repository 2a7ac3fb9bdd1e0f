"""Weighted-MaxEnt exploration, the MaxEnt variant and the uniform-policy baseline.

The learner runs optimistic extended value iteration on the gradient of the
smoothed weighted entropy, then follows the greedy policy until either the
gradient has drifted by more than ``Q = 2 log(1/mu)`` in accumulated l2 norm
or the current pair's within-episode count reaches its count before the
episode (floored at one).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import Counters, bernstein_halfwidths, empirical_model, noise_upper_bound
from .evi import evi
from .mdp import StationaryPolicy, TabularMdp, transitional_noise
from .objectives import DomainError, modest_weights, smoothed_weighted_entropy_grad
from .runs import ErrorTracker, RunResult, Sampler, TrajectoryRecorder, log_grid

WEIGHT_MODES = ("optimistic", "known", "unit")


def default_mu(n: int, S: int) -> float:
    return 1.0 / (n ** (1.0 / 3.0) * S ** (2.0 / 3.0))


@dataclass
class WmeConfig:
    n: int
    delta: float = 0.1
    mu: float | None = None
    weight_mode: str = "optimistic"
    strict_all_pairs: bool = False
    initial_state: int = 0
    evi_aperiodicity: float = 0.9

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("budget n must be >= 1")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.mu is not None and self.mu <= 0:
            raise DomainError("the learner needs mu > 0")

    def resolve_mu(self, S: int) -> float:
        return default_mu(self.n, S) if self.mu is None else self.mu


def episode_weights(mode: str, counters: Counters, mdp: TabularMdp, delta: float) -> np.ndarray:
    S, A = counters.T.shape
    if mode == "unit":
        return np.ones((S, A))
    if mode == "known":
        return modest_weights(transitional_noise(mdp), S, delta)
    model = empirical_model(counters)
    return modest_weights(noise_upper_bound(counters, model, delta).V_plus, S, delta)


def optimistic_weighted_entropy_gradient(counters: Counters, mu: float, delta: float, lam=None) -> np.ndarray:
    """Gradient of the optimistic smoothed weighted entropy at ``lam``.

    Weights are V+ / sqrt(S log(SA / delta)); ``lam`` defaults to the
    empirical frequency.
    """
    if mu <= 0:
        raise DomainError("gradient unbounded at mu = 0")
    S, _ = counters.T.shape
    model = empirical_model(counters)
    w = modest_weights(noise_upper_bound(counters, model, delta).V_plus, S, delta)
    lam = counters.frequency if lam is None else np.asarray(lam, float)
    return smoothed_weighted_entropy_grad(w, lam, mu)


def weighted_maxent_run(mdp: TabularMdp, config: WmeConfig, seed: int, checkpoints=None,
                        record_trajectory: bool = False, algo: str | None = None) -> RunResult:
    S, A = mdp.num_states, mdp.num_actions
    n = config.n
    mu = config.resolve_mu(S)
    Q = 2.0 * np.log(1.0 / mu)
    rng = np.random.default_rng(seed)
    sampler = Sampler(mdp, rng)
    counters = Counters.empty(S, A)
    tracker = ErrorTracker(mdp, log_grid(n) if checkpoints is None else checkpoints)
    recorder = TrajectoryRecorder(n, record_trajectory)
    result = RunResult(algo or ("maxent" if config.weight_mode == "unit" else "weighted-maxent"), seed)

    T, T3 = counters.T, counters.T3
    counts = np.zeros(S * A)  # float copy of T for the per-step gradient
    s = config.initial_state
    t, k = 0, 0
    while t < n:
        k += 1
        t_k = t
        w = episode_weights(config.weight_mode, counters, mdp, config.delta)
        model = empirical_model(counters)
        conf = bernstein_halfwidths(counters, model, config.delta)
        lam = counters.frequency
        theta_ref = smoothed_weighted_entropy_grad(w, lam, mu)
        plan = evi(theta_ref, model.p_hat, conf.B, eps=1.0 / np.sqrt(max(t_k, 1)),
                   aperiodicity=config.evi_aperiodicity)
        actions = plan.actions.tolist()
        threshold = np.maximum(T, 1).tolist()
        nu = [[0] * A for _ in range(S)]
        w_flat = w.ravel()
        ref_flat = theta_ref.ravel()
        phi = 0.0
        reason = "budget"
        while t < n:
            a = actions[s]
            if phi > Q:
                reason = "drift"
                break
            if nu[s][a] >= threshold[s][a]:
                reason = "doubling"
                break
            s2 = sampler.next_state(s, a)
            T[s, a] += 1
            T3[s, a, s2] += 1
            counts[s * A + a] += 1.0
            nu[s][a] += 1
            t += 1
            counters.t = t
            recorder.add(s, a, s2)
            x = counts / t
            y = x + mu
            d = -w_flat * (np.log(y) + x / y) - ref_flat
            phi += float(np.sqrt(d @ d))
            if tracker.due(t):
                tracker.record(t, counters)
            reached = nu[s][a] >= threshold[s][a]
            s = s2
            # only the pair just updated can newly reach its threshold
            if config.strict_all_pairs and reached and t < n:
                reason = "doubling"
                break
        result.log.append({
            "k": k, "t_k": t_k, "steps": t - t_k, "stop": reason, "Q": Q, "phi": phi,
            "evi_sweeps": plan.sweeps, "gain": plan.gain,
        })
    result.curve = tracker.curve
    result.counters = counters
    result.trajectory = recorder.build(seed)
    return result


def maxent_run(mdp: TabularMdp, n: int, seed: int, delta: float = 0.1, mu: float | None = None,
               checkpoints=None, **kw) -> RunResult:
    cfg = WmeConfig(n=n, delta=delta, mu=mu, weight_mode="unit")
    return weighted_maxent_run(mdp, cfg, seed, checkpoints, algo="maxent", **kw)


def uniform_baseline_run(mdp: TabularMdp, n: int, seed: int, checkpoints=None,
                         record_trajectory: bool = False, initial_state: int = 0) -> RunResult:
    S, A = mdp.num_states, mdp.num_actions
    if n < 1:
        raise ValueError("budget n must be >= 1")
    rng = np.random.default_rng(seed)
    sampler = Sampler(mdp, rng)
    pcdf = Sampler.policy_cdf(StationaryPolicy.uniform(S, A).probs)
    counters = Counters.empty(S, A)
    T, T3 = counters.T, counters.T3
    tracker = ErrorTracker(mdp, log_grid(n) if checkpoints is None else checkpoints)
    recorder = TrajectoryRecorder(n, record_trajectory)
    s = initial_state
    for t in range(1, n + 1):
        a = sampler.action(pcdf, s)
        s2 = sampler.next_state(s, a)
        T[s, a] += 1
        T3[s, a, s2] += 1
        counters.t = t
        recorder.add(s, a, s2)
        if tracker.due(t):
            tracker.record(t, counters)
        s = s2
    result = RunResult("uniform", seed, tracker.curve, [], counters, recorder.build(seed))
    return result
