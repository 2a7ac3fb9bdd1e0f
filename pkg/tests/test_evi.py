import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from modest.estimation import Counters, bernstein_halfwidths, empirical_model
from modest.evi import EviError, evi, optimistic_transitions
from modest.mdp import StationaryPolicy, stationary_distribution

from conftest import random_mdp, small_corpus


def best_gain(mdp, reward):
    A = mdp.num_actions
    gains = {}
    for acts in itertools.product(range(A), repeat=mdp.num_states):
        lam = stationary_distribution(mdp, StationaryPolicy.deterministic(list(acts), A))
        gains[acts] = float((reward * lam).sum())
    return max(gains.values()), gains


@pytest.mark.parametrize("idx", range(12))
def test_zero_width_matches_policy_enumeration(idx):
    mdp = small_corpus()[idx]
    rng = np.random.default_rng(idx)
    for _ in range(5):
        r = rng.uniform(0, 1, (mdp.num_states, mdp.num_actions))
        res = evi(r, mdp.p, np.zeros_like(mdp.p), eps=1e-9)
        g_star, gains = best_gain(mdp, r)
        assert abs(res.gain - g_star) <= 1e-6
        assert abs(gains[tuple(res.actions)] - g_star) <= 1e-6


def test_constant_reward():
    mdp = random_mdp(3, 2, 0)
    res = evi(np.full((3, 2), 0.7), mdp.p, np.zeros_like(mdp.p), eps=1e-10)
    assert abs(res.gain - 0.7) <= 1e-9


@settings(max_examples=100)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_inner_max_matches_lp(S, seed):
    rng = np.random.default_rng(seed)
    p_hat = rng.dirichlet(np.ones(S))
    B = rng.uniform(0, 0.4, S)
    lo, hi = np.clip(p_hat - B, 0, 1), np.clip(p_hat + B, 0, 1)
    u = rng.normal(size=S)
    p = optimistic_transitions(lo[None], hi[None], u)[0]
    ref = linprog(-u, A_eq=np.ones((1, S)), b_eq=[1.0], bounds=list(zip(lo, hi)), method="highs")
    assert abs(p.sum() - 1) <= 1e-12 and (p >= lo - 1e-12).all() and (p <= hi + 1e-12).all()
    assert abs(p @ u + ref.fun) <= 1e-10


def test_optimism_under_coverage():
    """Whenever the confidence set holds the truth, EVI's gain is at least the best true gain - eps."""
    delta, eps = 0.1, 1e-3
    checked = 0
    for seed in range(30):
        mdp = random_mdp(3, 2, seed)
        rng = np.random.default_rng(seed)
        T = rng.integers(5, 200, size=(3, 2))
        T3 = np.stack([[rng.multinomial(T[s, a], mdp.p[s, a]) for a in range(2)] for s in range(3)])
        c = Counters(T, T3, int(T.sum()))
        model = empirical_model(c)
        conf = bernstein_halfwidths(c, model, delta)
        if not conf.contains(mdp.p, model.p_hat):
            continue
        checked += 1
        r = rng.uniform(0, 1, (3, 2))
        res = evi(r, model.p_hat, conf.B, eps=eps)
        assert res.gain >= best_gain(mdp, r)[0] - eps
    assert checked >= 27


def test_sweep_cap():
    mdp = random_mdp(3, 2, 1)
    with pytest.raises(EviError):
        evi(np.random.default_rng(0).uniform(size=(3, 2)), mdp.p, np.zeros_like(mdp.p), eps=1e-14, max_sweeps=3)
    with pytest.raises(ValueError):
        evi(np.zeros((3, 2)), mdp.p, -np.ones_like(mdp.p), eps=0.1)
