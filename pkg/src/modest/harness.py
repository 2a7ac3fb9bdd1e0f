"""Seeded multi-run experiments, result CSVs, aggregates, plots and the simulation-lemma check."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .fw_modest import FwConfig, fw_modest_run
from .mdp import TabularMdp, make_env, transitional_noise
from .objectives import error_max
from .runs import RunResult, geometric_grid, log_grid
from .weighted_maxent import WmeConfig, maxent_run, uniform_baseline_run, weighted_maxent_run

ALGORITHMS = ("uniform", "maxent", "weighted-maxent", "fw-modest", "fw-modest-lse")
HEADER = ["env", "algo", "seed", "step", "error_avg", "error_max"]
AGG_HEADER = ["env", "algo", "step", "runs", "mean_avg", "std_avg", "mean_max", "std_max"]


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    """A learning run failed; the message carries env, algo and seed."""


class CsvFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.10g}"


@dataclass
class ExperimentConfig:
    envs: list
    algos: list
    n: int
    runs: int = 20
    delta: float = 0.1
    eta: float = 1e-4
    mu: float | None = None
    seed_base: int = 0
    checkpoints: str | list = "log"     # "log", "geometric" or explicit steps
    fw_schedule: str | int = "cubic"
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.envs, str):
            self.envs = [self.envs]
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        bad = [a for a in self.algos if a not in ALGORITHMS]
        if bad or not self.algos:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not self.envs:
            raise ConfigError("no environments given")
        if isinstance(self.checkpoints, str) and self.checkpoints not in ("log", "geometric"):
            raise ConfigError("checkpoints must be 'log', 'geometric' or a list of steps")
        for env in self.envs:
            make_env(env)  # fail early on bad ids
        # algorithm parameters are validated by the algorithm configs
        FwConfig(n=self.n, eta=self.eta, delta=self.delta, schedule=self.fw_schedule)
        WmeConfig(n=self.n, delta=self.delta, mu=self.mu)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def grid(self) -> list[int]:
        if self.checkpoints == "log":
            return log_grid(self.n)
        if self.checkpoints == "geometric":
            return geometric_grid(self.n)
        return sorted({int(c) for c in self.checkpoints if 1 <= int(c) <= self.n})

    def seeds(self) -> list[int]:
        return [self.seed_base + r for r in range(self.runs)]


@dataclass(frozen=True)
class ResultRow:
    env: str
    algo: str
    seed: int
    step: int
    error_avg: float
    error_max: float

    def cells(self) -> list[str]:
        return [self.env, self.algo, str(self.seed), str(self.step), _fmt(self.error_avg), _fmt(self.error_max)]

    @classmethod
    def parse(cls, cells) -> "ResultRow":
        if len(cells) != len(HEADER):
            raise CsvFormatError(f"expected {len(HEADER)} cells, got {len(cells)}")
        try:
            return cls(cells[0], cells[1], int(cells[2]), int(cells[3]), float(cells[4]), float(cells[5]))
        except ValueError as e:
            raise CsvFormatError(f"bad row {cells}: {e}") from None


def run_one(env_id: str, algo: str, n: int, seed: int, delta: float = 0.1, eta: float = 1e-4,
            mu: float | None = None, checkpoints=None, fw_schedule="cubic", mdp: TabularMdp | None = None) -> RunResult:
    mdp = make_env(env_id) if mdp is None else mdp
    if algo == "uniform":
        return uniform_baseline_run(mdp, n, seed, checkpoints)
    if algo == "maxent":
        return maxent_run(mdp, n, seed, delta=delta, mu=mu, checkpoints=checkpoints)
    if algo == "weighted-maxent":
        return weighted_maxent_run(mdp, WmeConfig(n=n, delta=delta, mu=mu), seed, checkpoints)
    if algo in ("fw-modest", "fw-modest-lse"):
        cfg = FwConfig(n=n, eta=eta, delta=delta, schedule=fw_schedule,
                       objective="avg" if algo == "fw-modest" else "lse")
        return fw_modest_run(mdp, cfg, seed, checkpoints)
    raise ConfigError(f"unknown algorithm {algo!r}")


def _job(args) -> list[ResultRow]:
    env_id, algo, seed, cfg = args
    try:
        res = run_one(env_id, algo, cfg.n, seed, cfg.delta, cfg.eta, cfg.mu, cfg.grid(), cfg.fw_schedule)
    except Exception as e:
        raise RunError(f"env={env_id} algo={algo} seed={seed}: {type(e).__name__}: {e}") from e
    # rows hold exactly what the CSV stores, so aggregates recompute bit-for-bit from disk
    return [ResultRow(env_id, algo, seed, t, float(_fmt(E)), float(_fmt(W))) for t, E, W in res.curve]


def collect_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    """Run every (env, algo, seed) job and return rows in (env, algo, seed, step) order."""
    jobs = [(env, algo, seed, cfg) for env in cfg.envs for algo in cfg.algos for seed in cfg.seeds()]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_job, jobs))
    else:
        chunks = [_job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    order = {e: i for i, e in enumerate(cfg.envs)}
    aorder = {a: i for i, a in enumerate(cfg.algos)}
    rows.sort(key=lambda r: (order[r.env], aorder[r.algo], r.seed, r.step))
    return rows


def write_results(rows, path, header_comment: str | None = None):
    stamp = header_comment or f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}"
    with open(path, "w", newline="") as f:
        f.write(stamp + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for r in rows:
            w.writerow(r.cells())


def read_results(path) -> list[ResultRow]:
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != HEADER:
        raise CsvFormatError(f"bad header {header}; expected {HEADER}")
    return [ResultRow.parse(cells) for cells in reader if cells]


def aggregate(rows) -> list[dict]:
    """Mean and std (ddof=1, 0 for a single run) per (env, algo, step), sorted by key."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.env, r.algo, r.step), []).append(r)
    out = []
    for (env, algo, step), grp in groups.items():
        E = np.array([r.error_avg for r in grp])
        W = np.array([r.error_max for r in grp])
        ddof = 1 if len(grp) > 1 else 0
        out.append({"env": env, "algo": algo, "step": step, "runs": len(grp),
                    "mean_avg": float(E.mean()), "std_avg": float(E.std(ddof=ddof)),
                    "mean_max": float(W.mean()), "std_max": float(W.std(ddof=ddof))})
    out.sort(key=lambda d: (d["env"], d["algo"], d["step"]))
    return out


def write_aggregate(agg, path, header_comment: str | None = None):
    stamp = header_comment or f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}"
    with open(path, "w", newline="") as f:
        f.write(stamp + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for d in agg:
            w.writerow([d["env"], d["algo"], d["step"], d["runs"]] +
                       [_fmt(d[k]) for k in ("mean_avg", "std_avg", "mean_max", "std_max")])


def read_aggregate(path) -> list[dict]:
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != AGG_HEADER:
        raise CsvFormatError(f"bad aggregate header {reader.fieldnames}")
    out = []
    for d in reader:
        out.append({"env": d["env"], "algo": d["algo"], "step": int(d["step"]), "runs": int(d["runs"]),
                    **{k: float(d[k]) for k in ("mean_avg", "std_avg", "mean_max", "std_max")}})
    return out


def aggregate_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_aggregate" + p.suffix)


def run_experiment(cfg: ExperimentConfig, out=None):
    """Run the experiment; writes raw and aggregate CSVs when an output path is set."""
    rows = collect_rows(cfg)
    agg = aggregate(rows)
    out = out or cfg.out
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_results(rows, out)
        write_aggregate(agg, aggregate_path(out))
    return rows, agg


def final_summary(agg) -> dict:
    """(env, algo) -> aggregate record at the last step."""
    last = {}
    for d in agg:
        key = (d["env"], d["algo"])
        if key not in last or d["step"] > last[key]["step"]:
            last[key] = d
    return last


def garnet_table(rows) -> list[dict]:
    """Per instance: sigma(V) and final mean/std of E and W for each algorithm."""
    last = final_summary(aggregate(rows))
    table = {}
    for (env, algo), d in last.items():
        rec = table.setdefault(env, {"env": env, "sigma_V": float(transitional_noise(make_env(env)).std())})
        rec[algo] = (d["mean_avg"], d["std_avg"], d["mean_max"], d["std_max"])
    return list(table.values())


def format_garnet_table(table, algos) -> str:
    head = ["env", "sigma(V)"] + [f"{a} E | W" for a in algos]
    lines = ["  ".join(head)]
    for rec in table:
        cells = [rec["env"], f"{rec['sigma_V']:.4f}"]
        for a in algos:
            mE, sE, mW, sW = rec[a]
            cells.append(f"{mE:.4f}±{sE:.4f} | {mW:.4f}±{sW:.4f}")
        lines.append("  ".join(cells))
    return "\n".join(lines)


# --- simulation lemma ------------------------------------------------------

def discounted_vi(reward, p, gamma: float, tol: float = 1e-10, max_iter: int = 1_000_000):
    """Discounted value iteration with a span stopping rule; returns the greedy actions."""
    v = np.zeros(reward.shape[0])
    for _ in range(max_iter):
        q = reward + gamma * (p @ v)
        v_new = q.max(1)
        d = v_new - v
        v = v_new
        if d.max() - d.min() <= tol:
            return q.argmax(1)
    raise RuntimeError("discounted value iteration did not converge")


def policy_value(reward, p, actions, gamma: float) -> np.ndarray:
    S = reward.shape[0]
    idx = np.arange(S)
    P = p[idx, actions]
    return np.linalg.solve(np.eye(S) - gamma * P, reward[idx, actions])


@dataclass
class SimLemmaReport:
    gamma: float
    eps: float
    ratios: list = field(default_factory=list)
    suboptimality: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


def simulation_lemma_check(mdp: TabularMdp, p_hat, gamma: float, trials: int, seed: int = 0) -> SimLemmaReport:
    """Suboptimality of the p_hat-optimal policy over random rewards in [0, 1]."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    p = mdp.p
    p_hat = np.asarray(p_hat, float)
    eps = error_max(p_hat, p)
    rng = np.random.default_rng(seed)
    rep = SimLemmaReport(gamma, eps)
    for _ in range(trials):
        r = rng.random(p.shape[:2])
        pi_star = discounted_vi(r, p, gamma)
        pi_hat = discounted_vi(r, p_hat, gamma)
        gap = float(np.max(policy_value(r, p, pi_star, gamma) - policy_value(r, p, pi_hat, gamma)))
        gap = max(gap, 0.0)
        rep.suboptimality.append(gap)
        rep.ratios.append(0.0 if eps == 0 else gap / (eps / (1.0 - gamma) ** 2))
    return rep


def sampled_model(mdp: TabularMdp, samples: int, seed: int) -> np.ndarray:
    """Plug-in model from ``samples`` i.i.d. draws per pair."""
    rng = np.random.default_rng(seed)
    S, A = mdp.num_states, mdp.num_actions
    p_hat = np.empty_like(mdp.p)
    for s in range(S):
        for a in range(A):
            p_hat[s, a] = rng.multinomial(samples, mdp.p[s, a]) / samples
    return p_hat


# --- plots -----------------------------------------------------------------

def emit_plot(csv_in, out):
    """Mean error vs step per (env, algo) with a +-1 std band, log y axis, SVG."""
    rows = read_results(csv_in)
    if not rows:
        raise CsvFormatError(f"{csv_in} holds no result rows")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "modest"
    agg = aggregate(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    curves = {}
    for d in agg:
        curves.setdefault((d["env"], d["algo"]), []).append(d)
    for (env, algo), pts in curves.items():
        t = np.array([d["step"] for d in pts])
        m = np.array([d["mean_avg"] for d in pts])
        s = np.array([d["std_avg"] for d in pts])
        label = algo if len({e for e, _ in curves}) == 1 else f"{env} {algo}"
        ax.plot(t, m, label=label)
        if pts[0]["runs"] > 1:
            ax.fill_between(t, np.clip(m - s, m * 1e-3, None), m + s, alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("average L1 error")
    ax.legend()
    fig.tight_layout()
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
