"""Linear programming: a dense two-phase simplex and the occupancy-measure LPs.

``solve_lp`` minimises ``c @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub``
and ``x >= lb``. The builders below phrase the MDP problems as maximisations
and negate internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .mdp import StationaryPolicy, TabularMdp

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration_limit"
NUMERICAL = "numerical"  # tableau drifted away from the original rows
PIVOT_TOL = 1e-9
HARRIS_SLACK = 1e-9  # primal feasibility slack in the ratio test
PERTURB = 1e-7  # relative size of the right-hand-side perturbation against degeneracy

# above this many tableau entries the "auto" method hands over to HiGHS
AUTO_SIMPLEX_MAX_ENTRIES = 60_000


class LpInfeasibleError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        arrays = (self.c, self.A_eq, self.b_eq, self.A_ub, self.b_ub, self.lb)
        if self.lb.shape != (n,) or not all(np.isfinite(x).all() for x in arrays):
            raise ValueError("LP data must be finite with consistent dimensions")

    @property
    def num_vars(self) -> int:
        return self.c.size

    def violation(self, x) -> float:
        """Largest constraint violation of ``x``."""
        x = np.asarray(x, float)
        v = [np.max(self.lb - x, initial=0.0)]
        if len(self.b_eq):
            v.append(np.abs(self.A_eq @ x - self.b_eq).max())
        if len(self.b_ub):
            v.append(np.max(self.A_ub @ x - self.b_ub, initial=0.0))
        return float(max(v))

    def dump(self) -> str:
        """Plain-text standard form: objective line then one constraint per line."""
        fmt = lambda row: " ".join(f"{v:.17g}" for v in row)
        lines = [f"min {fmt(self.c)}"]
        lines += [f"eq {fmt(a)} = {b:.17g}" for a, b in zip(self.A_eq, self.b_eq)]
        lines += [f"ub {fmt(a)} <= {b:.17g}" for a, b in zip(self.A_ub, self.b_ub)]
        lines.append(f"lb {fmt(self.lb)}")
        return "\n".join(lines) + "\n"


def _rows(A, b, n):
    if A is None or len(A) == 0:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.size, n):
        raise ValueError(f"constraint block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpResult:
    x: np.ndarray | None
    value: float
    status: str
    iterations: int = 0
    method: str = "simplex"

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# --- dense simplex ----------------------------------------------------------

def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])
    basis[row] = col


def _primal(T, basis, allowed, tol, max_iter):
    """Minimise the objective row of ``T`` in place (primal simplex).

    Columns -2 and -1 hold the true and the perturbed right-hand side; the
    ratio test reads the perturbed one. Entering column by Bland's rule. The
    leaving row uses a two-pass (Harris) ratio test: among rows whose ratio
    is within a small slack of the minimum, take the largest pivot.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        d = T[-1, :allowed]
        entering = np.flatnonzero(d < -tol)
        if entering.size == 0:
            return OPTIMAL, it
        j = entering[0]
        col = T[:m, j]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED, it
        rhs = np.maximum(T[pos, -1], 0.0)
        bound = ((rhs + HARRIS_SLACK) / col[pos]).min()
        cand = np.flatnonzero(rhs / col[pos] <= bound)
        big = col[pos[cand]]
        cand = cand[big >= big.max() * (1 - 1e-12)]
        _pivot(T, basis, pos[cand[np.argmin(basis[pos[cand]])]], j)
    return ITERATION_LIMIT, max_iter


def _dual(T, basis, allowed, tol, feas_tol, max_iter):
    """Dual simplex on the true right-hand side, starting dual feasible.

    Used after a phase solved on the perturbed right-hand side: the final
    basis is optimal but may be slightly infeasible for the true one.
    """
    m = T.shape[0] - 1
    T[:, -1] = T[:, -2]
    for it in range(max_iter):
        r = int(np.argmin(T[:m, -1]))
        if T[r, -1] >= -feas_tol:
            return OPTIMAL, it
        row = T[r, :allowed]
        neg = np.flatnonzero(row < -PIVOT_TOL)
        if neg.size == 0:
            return INFEASIBLE, it
        d = np.maximum(T[-1, neg], 0.0)
        ratios = d / -row[neg]
        best = ratios.min()
        cand = neg[ratios <= best + tol]
        _pivot(T, basis, r, cand[np.argmax(-T[r, cand])])
    return ITERATION_LIMIT, max_iter


def _phase(T, basis, allowed, tol, max_iter, rng, scale):
    """One simplex phase on a perturbed right-hand side, then cleanup."""
    m = T.shape[0] - 1
    T[:m, -1] = T[:m, -2] + PERTURB * scale * (1.0 + rng.random(m))
    T[-1, -1] = T[-1, -2]
    status, it = _primal(T, basis, allowed, tol, max_iter)
    if status != OPTIMAL:
        return status, it
    status, it2 = _dual(T, basis, allowed, tol, 1e-12 * scale, max_iter)
    return (OPTIMAL if status == OPTIMAL and (T[-1, :allowed] >= -tol).all() else
            NUMERICAL if status == OPTIMAL else status), it + it2


def _simplex(lp: LinearProgram, tol: float = 1e-10, max_iter: int = 50_000) -> LpResult:
    n = lp.num_vars
    m_eq, m_ub = len(lp.b_eq), len(lp.b_ub)
    b_eq = lp.b_eq - lp.A_eq @ lp.lb
    b_ub = lp.b_ub - lp.A_ub @ lp.lb
    A = np.zeros((m_eq + m_ub, n + m_ub))
    A[:m_eq, :n] = lp.A_eq
    A[m_eq:, :n] = lp.A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    m, N = A.shape
    if m == 0:
        if (lp.c < -tol).any():
            return LpResult(None, -np.inf, UNBOUNDED)
        return LpResult(lp.lb.copy(), float(lp.c @ lp.lb), OPTIMAL)

    # slack columns serve as the starting basis where possible
    basis = np.full(m, -1)
    for i in range(m_eq, m):
        if not flip[i]:
            basis[i] = n + (i - m_eq)
    need_art = np.flatnonzero(basis < 0)
    n_art = need_art.size
    # two right-hand-side columns: true values, then a perturbed copy
    T = np.zeros((m + 1, N + n_art + 2))
    T[:m, :N] = A
    T[:m, -2] = b
    for k, i in enumerate(need_art):
        T[i, N + k] = 1.0
        basis[i] = N + k
    scale = max(1.0, np.abs(b).max())
    rng = np.random.default_rng(0)
    iters = 0
    if n_art:
        T[-1, N:N + n_art] = 1.0
        for i in need_art:
            T[-1] -= T[i]
        status, it = _phase(T, basis, N + n_art, tol, max_iter, rng, scale)
        iters += it
        if status != OPTIMAL:
            return LpResult(None, np.nan, status, iters)
        if -T[-1, -2] > 1e-8 * scale:
            return LpResult(None, np.nan, INFEASIBLE, iters)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if basis[i] >= N:
                j = int(np.argmax(np.abs(T[i, :N])))
                if abs(T[i, j]) > PIVOT_TOL:
                    # the artificial is zero up to phase-1 tolerance; pivoting on its
                    # residue would spread it (amplified) over the other rows
                    T[i, -2:] = 0.0
                    _pivot(T, basis, i, j)
                else:
                    keep[i] = False
        T = T[keep]
        basis = basis[keep[:-1]]
        T = np.delete(T, np.s_[N:N + n_art], axis=1)
    m = T.shape[0] - 1
    c = np.concatenate([lp.c, np.zeros(m_ub)])
    T[-1, :] = 0.0
    T[-1, :N] = c
    for i in range(m):
        T[-1] -= c[basis[i]] * T[i]
    status, it = _phase(T, basis, N, tol, max_iter, rng, scale)
    iters += it
    if status != OPTIMAL:
        return LpResult(None, -np.inf if status == UNBOUNDED else np.nan, status, iters)
    # refine the basic solution against the original rows
    y = np.zeros(N)
    sol, *_ = np.linalg.lstsq(A[:, basis], b, rcond=None)
    y[basis] = sol
    bscale = max(1.0, np.abs(b).max())
    if sol.min() < -1e-8 * bscale or np.abs(A @ y - b).max() > 1e-8 * bscale:
        return LpResult(None, np.nan, NUMERICAL, iters)
    y = np.clip(y, 0.0, None)
    x = y[:n] + lp.lb
    return LpResult(x, float(lp.c @ x), OPTIMAL, iters)


def _highs(lp: LinearProgram) -> LpResult:
    res = linprog(
        lp.c,
        A_ub=lp.A_ub if len(lp.b_ub) else None,
        b_ub=lp.b_ub if len(lp.b_ub) else None,
        A_eq=lp.A_eq if len(lp.b_eq) else None,
        b_eq=lp.b_eq if len(lp.b_eq) else None,
        bounds=[(lo, None) for lo in lp.lb],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, INFEASIBLE)
    if status != OPTIMAL:
        return LpResult(None, np.nan, status, int(getattr(res, "nit", 0)), "highs")
    x = np.maximum(res.x, lp.lb)
    return LpResult(x, float(lp.c @ x), OPTIMAL, int(res.nit), "highs")


def solve_lp(lp: LinearProgram, method: str = "auto") -> LpResult:
    """Solve ``lp``; ``method`` is "simplex", "highs" or "auto" (size based)."""
    if method == "auto":
        rows = len(lp.b_eq) + len(lp.b_ub)
        if (rows + 1) * (lp.num_vars + 2 * rows + 1) <= AUTO_SIMPLEX_MAX_ENTRIES:
            res = _simplex(lp)
            return res if res.status not in (NUMERICAL, ITERATION_LIMIT) else _highs(lp)
        method = "highs"
    if method == "simplex":
        return _simplex(lp)
    if method == "highs":
        return _highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


# --- occupancy LPs ----------------------------------------------------------

def known_model_lp(p: np.ndarray, reward: np.ndarray, eta: float = 0.0) -> LinearProgram:
    """max sum r lam over flow-feasible lam with lam >= eta."""
    S, A, _ = p.shape
    if eta * S * A > 1 + 1e-12:
        raise LpInfeasibleError(f"eta={eta} leaves no room on {S * A} pairs")
    # row s: sum_b lam(s, b) - sum_{s', a} p(s | s', a) lam(s', a)
    flow = np.zeros((S, S * A))
    for s in range(S):
        flow[s, s * A:(s + 1) * A] += 1.0
    flow -= p.reshape(S * A, S).T
    A_eq = np.vstack([flow, np.ones(S * A)])
    b_eq = np.concatenate([np.zeros(S), [1.0]])
    return LinearProgram(-np.asarray(reward, float).ravel(), A_eq, b_eq, lb=np.full(S * A, eta),
                         meta={"kind": "known", "shape": (S, A)})


def solve_known_model_lp(mdp: TabularMdp, reward, eta: float = 0.0, method: str = "auto") -> np.ndarray:
    """Occupancy in Lambda_eta(p) maximising ``reward``; returns an (S, A) array."""
    lp = known_model_lp(mdp.p, reward, eta)
    res = solve_lp(lp, method)
    if not res.ok:
        raise LpInfeasibleError(f"known-model LP {res.status} at eta={eta}")
    lam = res.x.reshape(mdp.num_states, mdp.num_actions)
    return lam / lam.sum()


def build_extended_lp(reward, p_hat, B, eta: float = 0.0) -> LinearProgram:
    """Extended LP over q(s, a, s') for all models inside the confidence set.

    Besides flow conservation, the interval rows tie q(s,a,j) to the pair mass
    sum_{s'} q(s,a,s') through [p_hat - B, p_hat + B] clipped to [0, 1]. Rows
    made vacuous by the clipping are left out. Total mass is fixed to one
    explicitly.
    """
    reward = np.asarray(reward, float)
    p_hat = np.asarray(p_hat, float)
    S, A, _ = p_hat.shape
    if eta * S * A > 1 + 1e-12:
        raise LpInfeasibleError(f"eta={eta} leaves no room on {S * A} pairs")
    lo = np.clip(p_hat - B, 0.0, 1.0)
    hi = np.clip(p_hat + B, 0.0, 1.0)
    nv = S * A * S
    idx = np.arange(nv).reshape(S, A, S)

    flow = np.zeros((S, nv))
    for j in range(S):
        flow[j, idx[j].ravel()] += 1.0
        flow[j, idx[:, :, j].ravel()] -= 1.0
    A_eq = np.vstack([flow, np.ones(nv)])
    b_eq = np.concatenate([np.zeros(S), [1.0]])

    ub_rows, b_ub = [], []
    for s in range(S):
        for a in range(A):
            block = idx[s, a]
            for j in range(S):
                if hi[s, a, j] < 1.0:
                    row = np.zeros(nv)
                    row[block] -= hi[s, a, j]
                    row[block[j]] += 1.0
                    ub_rows.append(row)
                    b_ub.append(0.0)
                if lo[s, a, j] > 0.0:
                    row = np.zeros(nv)
                    row[block] += lo[s, a, j]
                    row[block[j]] -= 1.0
                    ub_rows.append(row)
                    b_ub.append(0.0)
            if eta > 0:
                row = np.zeros(nv)
                row[block] = -1.0
                ub_rows.append(row)
                b_ub.append(-eta)
    c = -np.repeat(reward.ravel(), S)
    return LinearProgram(c, A_eq, b_eq, np.array(ub_rows) if ub_rows else None,
                         np.array(b_ub) if ub_rows else None,
                         meta={"kind": "extended", "shape": (S, A, S), "eta": eta})


def solve_extended_lp(reward, p_hat, B, eta: float = 0.0, method: str = "auto") -> tuple[np.ndarray, LpResult]:
    lp = build_extended_lp(reward, p_hat, B, eta)
    res = solve_lp(lp, method)
    if not res.ok:
        return None, res
    return res.x.reshape(lp.meta["shape"]), res


def extract_occupancy(q: np.ndarray) -> np.ndarray:
    """phi(s, a) = sum_{s'} q(s, a, s')."""
    return np.clip(np.asarray(q, float), 0.0, None).sum(-1)


def extract_policy(phi: np.ndarray) -> StationaryPolicy:
    """pi(a|s) proportional to phi(s, a); uniform where a state has no mass."""
    phi = np.clip(np.asarray(phi, float), 0.0, None)
    S, A = phi.shape
    mass = phi.sum(1, keepdims=True)
    pi = np.where(mass > 0, phi / np.where(mass > 0, mass, 1.0), 1.0 / A)
    pi /= pi.sum(1, keepdims=True)
    return StationaryPolicy(pi)
