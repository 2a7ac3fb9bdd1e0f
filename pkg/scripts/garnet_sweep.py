"""Garnet G(S, A, b) sweep: final E and W (mean and std over runs) per instance and algorithm."""
import argparse

from modest.harness import ExperimentConfig, format_garnet_table, garnet_table, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="scripts/configs/garnet_555.json")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    cfg.workers = args.workers
    rows, _ = run_experiment(cfg)
    table = garnet_table(rows)
    print(format_garnet_table(table, cfg.algos))
    if {"maxent", "weighted-maxent"} <= set(cfg.algos):
        wins = sum(rec["weighted-maxent"][0] <= rec["maxent"][0] for rec in table)
        print(f"weighted-maxent E <= maxent E on {wins}/{len(table)} instances")


if __name__ == "__main__":
    main()
