"""Command line entry point: run, optimal, plot, simlemma."""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .mdp import make_env
from .optimal import OBJECTIVES, optimal_allocation, table1_mean_error


def _cmd_run(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    out = args.out or cfg.out
    _, agg = harness.run_experiment(cfg, out)
    for (env, algo), d in harness.final_summary(agg).items():
        print(f"{env} {algo} step={d['step']} E={d['mean_avg']:.6g}±{d['std_avg']:.2g} "
              f"W={d['mean_max']:.6g}±{d['std_max']:.2g}")
    if out:
        print(f"wrote {out} and {harness.aggregate_path(out)}")


def _cmd_optimal(args):
    mdp = make_env(args.env)
    res = optimal_allocation(mdp, args.objective, n=args.n, eta=args.eta, mu=args.mu,
                             iterations=args.iterations, variant=args.variant, tol=args.tol)
    if args.out:
        res.to_csv(args.out)
    else:
        for row in res.lam_star:
            print(",".join(f"{x:.6g}" for x in row))
    E = table1_mean_error(mdp, res.lam_star, args.n, range(args.seeds))
    print(json.dumps({"objective": args.objective, "value": res.value, "gap": res.gap,
                      "iterations": res.iterations, "E": E, "bias_bound": res.entropy_bias_bound}))


def _cmd_plot(args):
    harness.emit_plot(args.inp, args.out)
    print(f"wrote {args.out}")


def _cmd_simlemma(args):
    mdp = make_env(args.env)
    p_hat = harness.sampled_model(mdp, args.samples, args.seed)
    rep = harness.simulation_lemma_check(mdp, p_hat, args.gamma, args.trials, args.seed)
    print(json.dumps({"env": args.env, "gamma": args.gamma, "eps": rep.eps, "trials": args.trials,
                      "max_ratio": rep.max_ratio, "max_suboptimality": max(rep.suboptimality, default=0.0)}))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modest", description="Model-estimation exploration experiments.",
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="seeded multi-run experiment from a JSON config",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                       description="Config keys (defaults): envs, algos, n, runs (20), delta (0.1), "
                                   "eta (1e-4), mu (1/(n^(1/3) S^(2/3))), seed_base (0), "
                                   "checkpoints ('log': 40 points from 100 to n), fw_schedule ('cubic'), "
                                   "workers (1), out.")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="raw CSV path; the aggregate goes next to it")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("optimal", help="offline optimal allocation and its sampled error",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--env", required=True)
    p.add_argument("--objective", required=True, choices=OBJECTIVES)
    p.add_argument("--n", type=int, default=2_000_000)
    p.add_argument("--eta", type=float, default=1e-4)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--variant", choices=("vanilla", "pairwise"), default="vanilla")
    p.add_argument("--tol", type=float, default=0.0, help="stop once the FW gap is below this")
    p.add_argument("--seeds", type=int, default=10, help="evaluation seeds for the sampled error")
    p.add_argument("--out", default=None, help="write lambda* as CSV instead of printing it")
    p.set_defaults(fn=_cmd_optimal)

    p = sub.add_parser("plot", help="render a results CSV as an SVG learning-curve plot")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("simlemma", help="empirical simulation-lemma ratio",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--env", required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--samples", type=int, default=200, help="samples per pair for the estimated model")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_simlemma)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except Exception as e:  # reported as one machine-readable line
        print("error: " + json.dumps({"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
