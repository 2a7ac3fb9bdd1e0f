"""FW-ModEst: episodic Frank-Wolfe over empirical visit frequencies.

Each episode the optimistic surrogate (noise replaced by its upper confidence
bound) is linearised at the current frequency; the extended LP picks the best
occupancy measure over every model in the confidence set, and the induced
stationary policy is executed for the episode. The Frank-Wolfe averaging
happens through the empirical frequencies themselves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import Counters, bernstein_halfwidths, empirical_model, noise_upper_bound
from .lp import LpInfeasibleError, extract_occupancy, extract_policy, solve_extended_lp
from .mdp import StationaryPolicy, TabularMdp, transitional_noise
from .objectives import Objective
from .runs import ErrorTracker, RunResult, Sampler, TrajectoryRecorder, log_grid


@dataclass
class FwConfig:
    n: int
    eta: float = 1e-4
    delta: float = 0.1
    objective: str = "avg"          # "avg" or "lse"
    schedule: str | int = "cubic"   # "cubic" or a fixed episode length
    initial_state: int = 0
    oracle: bool = False            # true noise, true model, zero-width intervals
    lp_method: str = "auto"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("budget n must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.objective not in ("avg", "lse"):
            raise ValueError("objective must be 'avg' or 'lse'")
        if self.schedule != "cubic" and not (isinstance(self.schedule, int) and self.schedule >= 1):
            raise ValueError("schedule must be 'cubic' or a positive episode length")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    def check(self, S: int, A: int):
        if self.eta * S * A > 1:
            raise LpInfeasibleError(f"eta={self.eta} too large for {S * A} pairs")


def episode_length(k: int, schedule="cubic") -> int:
    """3k^2 - 3k + 1 for the cubic schedule, so that episodes 1..K last K^3 steps."""
    if k < 1:
        raise ValueError("episodes are numbered from 1")
    if schedule == "cubic":
        return 3 * k * k - 3 * k + 1
    return int(schedule)


def optimistic_gradient(counters: Counters, config: FwConfig, noise=None):
    """Reward r_k = -grad of the optimistic surrogate at the clipped frequency.

    Returns ``(reward, objective_value, clipped)``; ``noise`` overrides V+.
    """
    S, _ = counters.T.shape
    if noise is None:
        noise = noise_upper_bound(counters, empirical_model(counters), config.delta).V_plus
    lam = counters.frequency
    floor = config.eta / 2
    clipped = bool((lam < floor).any())
    lam = np.maximum(lam, floor)
    obj = Objective(config.objective, V=noise, n=config.n, eta=config.eta)
    return -obj.grad(lam), obj.value(lam), clipped


def plan_episode(counters: Counters, config: FwConfig, mdp: TabularMdp | None = None):
    """Solve the extended LP for the next policy, lowering eta when infeasible."""
    if config.oracle:
        noise = transitional_noise(mdp)
        p_hat, B = mdp.p, np.zeros_like(mdp.p)
    else:
        model = empirical_model(counters)
        noise = noise_upper_bound(counters, model, config.delta).V_plus
        p_hat, B = model.p_hat, bernstein_halfwidths(counters, model, config.delta).B
    reward, value, clipped = optimistic_gradient(counters, config, noise)
    scale = np.abs(reward).max()
    reward = reward / scale if scale > 0 else reward
    eta, downgrades = config.eta, []
    while True:
        q, res = solve_extended_lp(reward, p_hat, B, eta, config.lp_method)
        if res.ok:
            break
        if eta == 0.0:
            raise LpInfeasibleError("extended LP infeasible even at eta = 0")
        downgrades.append(eta)
        eta = eta / 10 if eta > 1e-12 else 0.0
    phi = extract_occupancy(q)
    info = {
        "lp_status": res.status, "eta_used": eta, "eta_downgrades": downgrades,
        "objective": value, "lp_value": -res.value * scale, "clipped": clipped,
    }
    return extract_policy(phi), phi, info


def fw_modest_run(mdp: TabularMdp, config: FwConfig, seed: int, checkpoints=None,
                  record_trajectory: bool = False) -> RunResult:
    S, A = mdp.num_states, mdp.num_actions
    config.check(S, A)
    n = config.n
    rng = np.random.default_rng(seed)
    sampler = Sampler(mdp, rng)
    counters = Counters.empty(S, A)
    T, T3 = counters.T, counters.T3
    tracker = ErrorTracker(mdp, log_grid(n) if checkpoints is None else checkpoints)
    recorder = TrajectoryRecorder(n, record_trajectory)
    result = RunResult(f"fw-modest" if config.objective == "avg" else "fw-modest-lse", seed)

    s, t, k = config.initial_state, 0, 0
    while t < n:
        k += 1
        tau = episode_length(k, config.schedule)
        t_k = t
        if k == 1:
            policy = StationaryPolicy.uniform(S, A)
            info = {"lp_status": "skipped", "eta_used": config.eta, "eta_downgrades": [],
                    "objective": None, "lp_value": None, "clipped": False}
        else:
            policy, _, info = plan_episode(counters, config, mdp)
        pcdf = Sampler.policy_cdf(policy.probs)
        for _ in range(min(tau, n - t)):
            a = sampler.action(pcdf, s)
            s2 = sampler.next_state(s, a)
            T[s, a] += 1
            T3[s, a, s2] += 1
            t += 1
            counters.t = t
            recorder.add(s, a, s2)
            if tracker.due(t):
                tracker.record(t, counters)
            s = s2
        result.log.append({"k": k, "t_k": t_k, "tau_k": tau, **info})
    result.curve = tracker.curve
    result.counters = counters
    result.trajectory = recorder.build(seed)
    return result
