import numpy as np
import pytest
from hypothesis import given, strategies as st

from modest.estimation import Counters
from modest.fw_modest import FwConfig, episode_length, fw_modest_run, optimistic_gradient, plan_episode
from modest.lp import LpInfeasibleError
from modest.mdp import TabularMdp, make_env
from modest.objectives import Objective

from conftest import random_mdp
from test_weighted_maxent import _det_cycle, _unvisited_error


def test_episode_lengths():
    assert [episode_length(k) for k in (1, 2, 3)] == [1, 7, 19]
    assert all(episode_length(k, 50) == 50 for k in range(1, 10))
    with pytest.raises(ValueError):
        episode_length(0)


@given(st.integers(1, 500))
def test_cubic_schedule_telescopes(K):
    assert sum(episode_length(k) for k in range(1, K + 1)) == K**3


def test_config_validation():
    for bad in (dict(n=0), dict(n=10, eta=-1), dict(n=10, objective="max"), dict(n=10, schedule=0),
                dict(n=10, schedule="linear"), dict(n=10, delta=1.0)):
        with pytest.raises(ValueError):
            FwConfig(**bad)
    with pytest.raises(LpInfeasibleError):
        fw_modest_run(make_env("wheel:5"), FwConfig(n=10, eta=0.05), 0)


def _counters(S, A, T3):
    T3 = np.asarray(T3, np.int64)
    return Counters(T3.sum(-1), T3, int(T3.sum()))


def test_gradient_symmetry_and_monotonicity():
    cfg = FwConfig(n=1000)
    c = _counters(2, 2, np.full((2, 2, 2), 5))
    r, _, _ = optimistic_gradient(c, cfg, noise=np.zeros((2, 2)))
    assert np.ptp(r) == 0
    noise = np.array([[0.1, 0.2], [0.1, 0.1]])
    r, _, _ = optimistic_gradient(c, cfg, noise=noise)
    assert r[0, 1] > r[0, 0]


def test_gradient_finite_differences():
    rng = np.random.default_rng(0)
    cfg = FwConfig(n=5000, eta=1e-3)
    for kind in ("avg", "lse"):
        cfg.objective = kind
        for _ in range(20):
            c = _counters(3, 2, rng.integers(5, 60, size=(3, 2, 3)))
            noise = rng.uniform(0.1, 1.0, (3, 2))
            r, val, _ = optimistic_gradient(c, cfg, noise=noise)
            obj = Objective(kind, V=noise, n=cfg.n, eta=cfg.eta)
            lam, h = c.frequency, 1e-6
            for idx in np.ndindex(lam.shape):
                e = np.zeros_like(lam)
                e[idx] = h
                fd = (obj.value(lam + e) - obj.value(lam - e)) / (2 * h)
                assert abs(-fd - r[idx]) <= 1e-4 * np.abs(r).max()
            assert abs(val - obj.value(lam)) < 1e-12


def test_gradient_clipping_flag():
    cfg = FwConfig(n=100, eta=0.01)
    T3 = np.zeros((2, 2, 2), np.int64)
    T3[0, 0, 0] = 10
    r, _, clipped = optimistic_gradient(_counters(2, 2, T3), cfg, noise=np.ones((2, 2)))
    assert clipped and np.isfinite(r).all()


def test_budget_one():
    res = fw_modest_run(make_env("noisyriverswim:12"), FwConfig(n=1), 0)
    assert res.counters.t == 1 and len(res.curve) == 1 and len(res.log) == 1


def test_first_episode_uniform_and_log():
    res = fw_modest_run(make_env("wheel:5"), FwConfig(n=2000), 0)
    assert res.log[0]["lp_status"] == "skipped" and res.log[0]["tau_k"] == 1
    assert all(rec["lp_status"] == "optimal" for rec in res.log[1:])
    assert [rec["t_k"] for rec in res.log[:4]] == [0, 1, 8, 27]
    assert res.algo == "fw-modest"


def test_log_written_as_json_lines(tmp_path):
    import json
    res = fw_modest_run(make_env("wheel:5"), FwConfig(n=500, objective="lse"), 0)
    res.write_log(tmp_path / "log.jsonl")
    recs = [json.loads(line) for line in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert len(recs) == len(res.log) and {"k", "t_k", "tau_k", "lp_status", "eta_downgrades"} <= recs[0].keys()
    assert res.algo == "fw-modest-lse"


def test_determinism_and_frequency_identity():
    mdp = make_env("garnet:5x5x5:2")
    a = fw_modest_run(mdp, FwConfig(n=3000, schedule=100), 4, record_trajectory=True)
    b = fw_modest_run(mdp, FwConfig(n=3000, schedule=100), 4, record_trajectory=True)
    assert a.curve == b.curve
    np.testing.assert_array_equal(a.trajectory.actions, b.trajectory.actions)
    tr = a.trajectory
    c = Counters.empty(5, 5).replay(tr.states, tr.actions, tr.next_states)
    np.testing.assert_allclose(a.counters.frequency, c.T / 3000)
    assert tr.is_chained()


def test_deterministic_cycle_error():
    mdp = _det_cycle()
    n = 20_000
    res = fw_modest_run(mdp, FwConfig(n=n), 0, checkpoints=[100, 1000, n], record_trajectory=True)
    tr = res.trajectory
    for t, E, _ in res.curve:
        c = Counters.empty(4, 2).replay(tr.states[:t], tr.actions[:t], tr.next_states[:t])
        assert abs(E - _unvisited_error(mdp, c.T)) <= 1e-12
    assert res.final[1] <= 10 * 4 / (n / 8)


def test_eta_downgrade_when_floor_is_infeasible():
    # state 1 can never be re-entered, so no stationary distribution gives it mass
    p = np.zeros((2, 2, 2))
    p[:, :, 0] = 1.0
    mdp = TabularMdp(p)
    c = _counters(2, 2, [[[3, 0], [3, 0]], [[1, 0], [1, 0]]])
    policy, phi, info = plan_episode(c, FwConfig(n=100, eta=1e-4, oracle=True), mdp)
    downs = info["eta_downgrades"]
    assert downs[0] == 1e-4 and np.allclose(np.array(downs[1:]) * 10, downs[:-1])
    # floors at solver-tolerance scale count as feasible
    assert info["eta_used"] <= 1e-8 and info["lp_status"] == "optimal"
    assert phi[1].sum() <= 1e-8


def _oracle_lp_values(mdp, seed=0):
    res = fw_modest_run(mdp, FwConfig(n=20_000, oracle=True), seed)
    return np.array([rec["lp_value"] for rec in res.log[1:]])


ORACLE_CORPUS = [random_mdp(3, 2, 0), random_mdp(4, 3, 1), make_env("wheel:5")]


@pytest.mark.xfail(strict=True, reason="per-episode LP value oscillates; only the trend decreases")
@pytest.mark.parametrize("idx", range(len(ORACLE_CORPUS)))
def test_oracle_lp_value_non_increasing(idx):
    v = _oracle_lp_values(ORACLE_CORPUS[idx])
    assert (np.diff(v) <= 1e-12).all()


@pytest.mark.parametrize("idx", range(len(ORACLE_CORPUS)))
def test_oracle_lp_value_trend(idx):
    v = _oracle_lp_values(ORACLE_CORPUS[idx])
    q = len(v) // 4
    assert v[-q:].max() < v[:q].min()
