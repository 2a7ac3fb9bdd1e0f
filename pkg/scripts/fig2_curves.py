"""Learning curves for the four explorers; writes raw/aggregate CSVs and an SVG plot.

    python3 scripts/fig2_curves.py scripts/configs/fig2_riverswim.json
"""
import argparse
import time
from pathlib import Path

from modest.harness import ExperimentConfig, emit_plot, final_summary, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--runs", type=int, default=None, help="override the number of runs")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    if args.runs:
        cfg.runs = args.runs
    cfg.workers = args.workers
    t0 = time.time()
    _, agg = run_experiment(cfg)
    for (env, algo), d in sorted(final_summary(agg).items(), key=lambda kv: kv[1]["mean_avg"]):
        se = d["std_avg"] / d["runs"] ** 0.5
        print(f"{env:20s} {algo:16s} E={d['mean_avg']:.5f} (se {se:.5f})  W={d['mean_max']:.4f}")
    svg = str(Path(cfg.out).with_suffix(".svg"))
    emit_plot(cfg.out, svg)
    print(f"wrote {cfg.out}, {svg} in {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
