import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modest import cli
from modest.harness import (AGG_HEADER, HEADER, ConfigError, CsvFormatError, ExperimentConfig, ResultRow, RunError,
                            aggregate, aggregate_path, collect_rows, discounted_vi, emit_plot, final_summary,
                            format_garnet_table, garnet_table, policy_value, read_aggregate, read_results,
                            run_experiment, sampled_model, simulation_lemma_check, write_results)
from modest.mdp import TabularMdp, make_env

from conftest import random_mdp


def _cfg(**kw):
    base = dict(envs=["wheel:5"], algos=["uniform", "fw-modest"], n=300, runs=2, checkpoints=[10, 100, 300])
    base.update(kw)
    return ExperimentConfig(**base)


def _body(path):
    return [ln for ln in open(path).read().splitlines() if not ln.startswith("#")]


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(runs=0)
    with pytest.raises(ConfigError):
        _cfg(algos=["greedy"])
    with pytest.raises(ConfigError):
        _cfg(checkpoints="linear")
    with pytest.raises(ValueError):
        _cfg(envs=["riverswim:3"])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"envs": ["wheel:5"], "algos": ["uniform"], "n": 10, "colour": 1})
    assert _cfg(seed_base=5, runs=3).seeds() == [5, 6, 7]
    assert _cfg(checkpoints="log", n=10_000).grid()[-1] == 10_000


def test_small_uniform_run_is_deterministic():
    cfg = _cfg(algos=["uniform"], n=10, runs=1, checkpoints="geometric")
    a, b = collect_rows(cfg), collect_rows(cfg)
    assert a == b and 1 <= len(a) <= 10
    assert [r.step for r in a] == sorted({r.step for r in a})


def test_csv_byte_identical_rerun(tmp_path):
    cfg = _cfg(algos=["uniform", "maxent", "weighted-maxent", "fw-modest"])
    run_experiment(cfg, tmp_path / "a.csv")
    run_experiment(cfg, tmp_path / "b.csv")
    assert _body(tmp_path / "a.csv") == _body(tmp_path / "b.csv")
    assert _body(tmp_path / "a_aggregate.csv") == _body(tmp_path / "b_aggregate.csv")
    assert open(tmp_path / "a.csv").readline().startswith("# generated ")
    assert _body(tmp_path / "a.csv")[0] == ",".join(HEADER)


def test_parallel_merge_matches_serial(tmp_path):
    cfg = _cfg(runs=3)
    assert collect_rows(cfg) == collect_rows(_cfg(runs=3, workers=2))


def test_round_trip_and_aggregate_recompute(tmp_path):
    cfg = _cfg(runs=3)
    rows, agg = run_experiment(cfg, tmp_path / "r.csv")
    back = read_results(tmp_path / "r.csv")
    for r, b in zip(rows, back):
        assert (r.env, r.algo, r.seed, r.step) == (b.env, b.algo, b.seed, b.step)
        assert abs(r.error_avg - b.error_avg) <= 1e-9 * max(r.error_avg, 1e-300)
    on_disk = read_aggregate(aggregate_path(tmp_path / "r.csv"))
    recomputed = aggregate(back)
    assert [(d["env"], d["algo"], d["step"], d["runs"]) for d in on_disk] == \
           [(d["env"], d["algo"], d["step"], d["runs"]) for d in recomputed]
    for d, e in zip(on_disk, recomputed):
        for k in ("mean_avg", "std_avg", "mean_max", "std_max"):
            assert f"{d[k]:.10g}" == f"{e[k]:.10g}"
    assert open(aggregate_path(tmp_path / "r.csv")).read().splitlines()[1] == ",".join(AGG_HEADER)


@given(st.text(alphabet="abcdefgh:-", min_size=1, max_size=12), st.sampled_from(["uniform", "maxent"]),
       st.integers(0, 10**6), st.integers(1, 10**9), st.floats(0, 2, allow_nan=False),
       st.floats(0, 2, allow_nan=False))
def test_row_round_trip_property(env, algo, seed, step, e, w):
    row = ResultRow(env, algo, seed, step, e, w)
    back = ResultRow.parse(row.cells())
    assert back.cells() == row.cells()
    assert abs(back.error_avg - e) <= 1e-9 * max(e, 1e-300)


def test_bad_csv(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("env,algo\nx,y\n")
    with pytest.raises(CsvFormatError):
        read_results(p)
    with pytest.raises(CsvFormatError):
        ResultRow.parse(["a", "b", "c", "1", "0.1", "0.2"])


def test_run_error_carries_context():
    cfg = _cfg(algos=["fw-modest"], eta=0.05)
    with pytest.raises(RunError, match="env=wheel:5 algo=fw-modest seed=0"):
        collect_rows(cfg)


def test_summaries():
    rows = collect_rows(ExperimentConfig(envs=["garnet:4x2x2:0", "garnet:4x2x2:1"], algos=["uniform", "maxent"],
                                         n=200, runs=2, checkpoints=[200]))
    table = garnet_table(rows)
    assert len(table) == 2 and {"uniform", "maxent"} <= table[0].keys()
    assert "maxent" in format_garnet_table(table, ["uniform", "maxent"])
    fs = final_summary(aggregate(rows))
    assert all(d["step"] == 200 and d["runs"] == 2 for d in fs.values())


def test_plot(tmp_path):
    rows, _ = run_experiment(_cfg(), tmp_path / "r.csv")
    svg = tmp_path / "out" / "r.svg"
    emit_plot(tmp_path / "r.csv", svg)
    text = svg.read_text()
    assert text.startswith("<?xml") and "<svg" in text and "uniform" in text and "fw-modest" in text
    emit_plot(tmp_path / "r.csv", tmp_path / "again.svg")
    assert (tmp_path / "again.svg").read_text() == text
    single = tmp_path / "one.csv"
    write_results([r for r in rows if r.algo == "uniform" and r.seed == 0], single)
    emit_plot(single, tmp_path / "one.svg")
    assert (tmp_path / "one.svg").exists()


def test_plot_empty_csv_writes_nothing(tmp_path):
    empty = tmp_path / "e.csv"
    write_results([], empty)
    with pytest.raises(CsvFormatError):
        emit_plot(empty, tmp_path / "e.svg")
    assert not (tmp_path / "e.svg").exists()


def test_discounted_vi_matches_policy_enumeration():
    import itertools
    mdp = random_mdp(3, 2, 3)
    r = np.random.default_rng(0).random((3, 2))
    best = max(policy_value(r, mdp.p, np.array(a), 0.9).sum() for a in itertools.product(range(2), repeat=3))
    acts = discounted_vi(r, mdp.p, 0.9)
    assert abs(policy_value(r, mdp.p, acts, 0.9).sum() - best) <= 1e-8


def test_simlemma_exact_model():
    mdp = make_env("wheel:5")
    rep = simulation_lemma_check(mdp, mdp.p, 0.9, 10)
    assert rep.eps == 0 and rep.max_ratio == 0 and max(rep.suboptimality) == 0
    with pytest.raises(ValueError):
        simulation_lemma_check(mdp, mdp.p, 1.0, 1)


@pytest.mark.parametrize("seed", range(3))
def test_simlemma_ratio_random_mdps(seed):
    mdp = random_mdp(5, 3, seed, dense=False)
    rep = simulation_lemma_check(mdp, sampled_model(mdp, 50, seed), 0.9, 100, seed)
    assert rep.eps > 0 and rep.max_ratio <= 2


# --- CLI --------------------------------------------------------------------

def test_cli_run_and_plot(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"envs": ["wheel:5"], "algos": ["uniform"], "n": 200, "runs": 2}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == 0
    assert "wheel:5 uniform" in capsys.readouterr().out
    assert cli.main(["plot", "--in", str(tmp_path / "r.csv"), "--out", str(tmp_path / "r.svg")]) == 0
    assert (tmp_path / "r.svg").exists() and (tmp_path / "r_aggregate.csv").exists()


def test_cli_optimal_and_simlemma(capsys):
    assert cli.main(["optimal", "--env", "wheel:5", "--objective", "weighted-entropy", "--iterations", "50",
                     "--variant", "pairwise", "--seeds", "2"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    summary = json.loads(out[-1])
    assert len(out) == 6 and summary["gap"] >= 0 and summary["E"] > 0
    assert cli.main(["simlemma", "--env", "garnet:5x3x3:0", "--trials", "5"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["max_ratio"] <= 2


def test_cli_error_line(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "modest.cli", "optimal", "--env", "nowhere:1",
                           "--objective", "entropy"], capture_output=True, text=True)
    assert proc.returncode != 0
    line = proc.stderr.strip().splitlines()[-1]
    assert line.startswith("error: ") and json.loads(line[len("error: "):])["type"] == "InvalidSpecError"
