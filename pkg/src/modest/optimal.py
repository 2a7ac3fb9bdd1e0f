"""Offline optimal allocations under a known model, and the sampled-error protocol."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .lp import LpInfeasibleError, solve_known_model_lp
from .mdp import StationaryPolicy, TabularMdp, flow_residual, stationary_distribution, transitional_noise
from .objectives import Objective, error_avg, modest_weights

MU_GUARD = 1e-12
OBJECTIVES = ("entropy", "weighted-entropy", "avg", "lse", "asym-avg")


@dataclass
class OptimalAllocation:
    lam_star: np.ndarray
    kind: str
    value: float
    iterations: int
    gap: float
    mu: float = 0.0
    eta: float = 0.0
    weight_max: float = 1.0

    @property
    def entropy_bias_bound(self) -> float:
        """mu S A max(w) bound on the smoothing bias of the entropy (0 for surrogates)."""
        S, A = self.lam_star.shape
        return self.mu * S * A * self.weight_max if self.kind.endswith("entropy") else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            for row in self.lam_star:
                w.writerow([f"{x:.10g}" for x in row])


def make_objective(mdp: TabularMdp, kind: str, n: int = 1, mu: float = 0.0, eta: float = 0.0,
                   delta: float = 0.1) -> Objective:
    """Objective under the true model; entropies get the mu guard when mu = 0."""
    if kind not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    V = transitional_noise(mdp)
    if kind == "entropy":
        return Objective("entropy", mu=max(mu, MU_GUARD))
    if kind == "weighted-entropy":
        w = modest_weights(V, mdp.num_states, delta)
        return Objective("weighted-entropy", weights=w, mu=max(mu, MU_GUARD))
    return Objective(kind, V=V, n=n, eta=eta)


def _initial_point(mdp: TabularMdp, eta: float, method: str) -> np.ndarray:
    S, A = mdp.num_states, mdp.num_actions
    try:
        lam = stationary_distribution(mdp, StationaryPolicy.uniform(S, A))
    except Exception:
        lam = None
    if lam is not None and lam.min() >= eta:
        return lam
    # any feasible vertex will do
    return solve_known_model_lp(mdp, np.zeros((S, A)), eta, method)


def _line_search(objective: Objective, lam, d, gmax: float) -> float:
    def f(x):
        # a full away step can undershoot zero by rounding
        return objective.value(np.maximum(lam + x * d, 0.0))

    res = minimize_scalar(f, bounds=(0.0, gmax), method="bounded",
                          options={"xatol": 1e-12 * max(gmax, 1e-12)})
    x = float(res.x)
    # the bounded search never lands exactly on the end point
    if f(gmax) <= f(x):
        x = gmax
    return x


def exact_fw(mdp: TabularMdp, objective: Objective, eta: float = 0.0, iterations: int = 10_000,
             method: str = "auto", kind: str | None = None, tol: float = 0.0,
             variant: str = "vanilla") -> OptimalAllocation:
    """Frank-Wolfe over Lambda_eta(p) with the known-model LP as oracle.

    ``vanilla`` uses the step 2/(k+2). ``pairwise`` keeps the active set of
    LP vertices and moves mass from the worst active vertex to the new one
    with an exact line search, which converges much faster on polytopes.
    Returns the best iterate seen and its duality gap <grad f(lam), lam - phi>.
    Stops early once the gap drops below ``tol``.
    """
    if variant not in ("vanilla", "pairwise"):
        raise ValueError("variant must be 'vanilla' or 'pairwise'")
    S, A = mdp.num_states, mdp.num_actions
    if eta < 0 or eta * S * A > 1:
        raise LpInfeasibleError(f"eta={eta} infeasible for {S * A} pairs")
    if variant == "vanilla":
        lam = _initial_point(mdp, eta, method)
    else:
        lam = solve_known_model_lp(mdp, np.zeros((S, A)), eta, method)
        active = {lam.round(12).tobytes(): [lam.copy(), 1.0]}
    best, best_val = lam.copy(), objective.value(lam)
    k = 0
    for k in range(iterations):
        g = objective.grad(lam)
        phi = solve_known_model_lp(mdp, -g, eta, method)
        gap = float(np.sum(g * (lam - phi)))
        if gap <= tol:
            break
        if variant == "vanilla":
            beta = 2.0 / (k + 2.0)
            lam = (1.0 - beta) * lam + beta * phi
        else:
            away = max(active, key=lambda key: float(np.sum(g * active[key][0])))
            v, wv = active[away]
            step = _line_search(objective, lam, phi - v, wv)
            lam = np.maximum(lam + step * (phi - v), 0.0)
            key = phi.round(12).tobytes()
            if key in active:
                active[key][1] += step
            else:
                active[key] = [phi, step]
            active[away][1] -= step
            if active[away][1] <= 1e-15:
                del active[away]
        val = objective.value(lam)
        if val < best_val:
            best, best_val = lam.copy(), val
    g = objective.grad(best)
    phi = solve_known_model_lp(mdp, -g, eta, method)
    gap = max(float(np.sum(g * (best - phi))), 0.0)
    W = float(np.max(objective.weights)) if objective.weights is not None else 1.0
    return OptimalAllocation(best, kind or objective.kind, float(best_val), k + 1, gap,
                             mu=objective.mu, eta=eta, weight_max=W)


def optimal_allocation(mdp: TabularMdp, kind: str, n: int = 2_000_000, eta: float = 1e-4,
                       mu: float = 0.0, iterations: int = 10_000, method: str = "auto",
                       delta: float = 0.1, variant: str = "vanilla", tol: float = 0.0) -> OptimalAllocation:
    """lambda* for one of the objectives; entropies run over Lambda(p) without the floor."""
    entropic = kind.endswith("entropy")
    obj = make_objective(mdp, kind, n=n, mu=mu, eta=eta, delta=delta)
    res = exact_fw(mdp, obj, eta=0.0 if entropic else eta, iterations=iterations, method=method, kind=kind,
                   variant=variant, tol=tol)
    if flow_residual(mdp, res.lam_star) > 1e-7:
        raise RuntimeError("optimal allocation lost flow feasibility")
    return res


def maxent_allocation(mdp: TabularMdp, mu: float = 0.0, iterations: int = 10_000, **kw) -> OptimalAllocation:
    return optimal_allocation(mdp, "entropy", mu=mu, iterations=iterations, **kw)


def weighted_maxent_allocation(mdp: TabularMdp, mu: float = 0.0, iterations: int = 10_000, **kw) -> OptimalAllocation:
    return optimal_allocation(mdp, "weighted-entropy", mu=mu, iterations=iterations, **kw)


def modest_allocation(mdp: TabularMdp, eta: float = 1e-4, iterations: int = 10_000, **kw) -> OptimalAllocation:
    """Asymptotic average surrogate mean V / sqrt(lam) restricted to lam >= eta."""
    return optimal_allocation(mdp, "asym-avg", eta=eta, iterations=iterations, **kw)


def table1_error(mdp: TabularMdp, lam_star, n: int, seed: int) -> float:
    """E of the plug-in model from max(floor(n lam), 1) i.i.d. samples per pair."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = mdp.p
    counts = np.maximum(np.floor(n * np.asarray(lam_star, float)), 1).astype(np.int64)
    S, A = counts.shape
    p_hat = np.empty_like(p)
    for s in range(S):
        for a in range(A):
            p_hat[s, a] = rng.multinomial(counts[s, a], p[s, a]) / counts[s, a]
    return error_avg(p_hat, p)


def table1_mean_error(mdp: TabularMdp, lam_star, n: int, seeds=range(10)) -> float:
    return float(np.mean([table1_error(mdp, lam_star, n, s) for s in seeds]))
