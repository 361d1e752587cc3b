import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_spectral.model import RankOneInstance
from adaptive_spectral.sampling import InstanceSampler, NullSampler, exact_estimator
from adaptive_spectral.spectral import EstimatorMethod
from adaptive_spectral.topk import (
    BudgetTooSmallError,
    Mode,
    TopKConfig,
    halving_ranking,
    halving_schedule,
    nonadaptive_topk,
    rank_items,
    sequential_halving_topk,
)


@pytest.mark.parametrize("T, n, r, t", [(64, 16, 0, 2), (256, 64, 0, 1), (256, 64, 1, 2)])
def test_halving_schedule_frozen(T, n, r, t):
    assert halving_schedule(T, n, r) == t


def test_halving_schedule_bounds():
    with pytest.raises(ValueError):
        halving_schedule(16, 4, 0)  # n = sqrt(T): no rounds
    with pytest.raises(ValueError):
        halving_schedule(256, 64, 2)


def test_config_defaults_follow_mode():
    assert TopKConfig(100, 2).estimator is EstimatorMethod.SPLIT_SVD
    assert TopKConfig(100, 2).reuse_samples is False
    p = TopKConfig(100, 2, Mode.PRACTICAL)
    assert p.estimator is EstimatorMethod.COLUMN_SUM and p.reuse_samples is True
    with pytest.raises(ValueError):
        TopKConfig(100, 0)


def test_rank_items_ties_go_to_smaller_id():
    np.testing.assert_array_equal(rank_items([5, 2, 9], [1.0, 1.0, 2.0]), [9, 2, 5])
    np.testing.assert_array_equal(rank_items([5, 2, 9], [1.0, 1.0, 2.0], orientation=-1), [2, 5, 9])


def test_empty_loop_degenerates_to_cleanup():
    hist = []
    s = NullSampler(4, budget=16)
    u = np.array([0.1, 0.9, 0.5, 0.3])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = sequential_halving_topk(s, TopKConfig(16, 1), exact_estimator(u), hist)
    assert out.tolist() == [1]
    assert len(hist) == 1 and hist[0].columns == 2
    assert s.ledger.consumed == 8


def test_theory_accounting_and_halving_law():
    n, T, k = 64, 2048, 2
    u = np.random.default_rng(0).uniform(size=n)
    hist = []
    s = NullSampler(n, budget=T)
    sequential_halving_topk(s, TopKConfig(T, k), exact_estimator(u), hist)
    sizes = [h.items.size for h in hist]
    for a, b in zip(sizes, sizes[1:]):
        assert b == math.ceil(a / 2)
    rounds = sum(h.items.size * h.columns for h in hist[:-1])
    cleanup = hist[-1].items.size * hist[-1].columns
    assert rounds <= T / 2 and cleanup <= T / 2
    assert s.ledger.consumed == rounds + cleanup


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 120), st.integers(1, 3), st.integers(0, 10**6), st.sampled_from(list(Mode)))
def test_exact_estimator_finds_top_k(n, k, seed, mode):
    rng = np.random.default_rng(seed)
    u = rng.permutation(n) / n
    T = max(n * n // 2, int(n * math.log(n)) + 1, (2 * k + 1) ** 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = NullSampler(n, budget=T)
        got = sequential_halving_topk(s, TopKConfig(T, k, mode), exact_estimator(u))
    np.testing.assert_array_equal(got, np.argsort(-u)[:k])
    assert s.ledger.consumed <= T
    s = NullSampler(n, budget=T)
    np.testing.assert_array_equal(nonadaptive_topk(s, T, k, exact_estimator(u)), np.argsort(-u)[:k])
    assert s.ledger.consumed == n * (T // n)


def test_practical_reuses_columns_and_respects_m_max():
    n, T = 40, 4000
    u = np.linspace(0, 1, n)
    hist = []
    s = NullSampler(n, budget=T)
    cfg = TopKConfig(T, 2, Mode.PRACTICAL, m_max=60)
    ranking = halving_ranking(s, cfg, exact_estimator(u), hist)
    assert sum(h.columns for h in hist) <= 60
    assert ranking[:2].tolist() == [n - 1, n - 2]
    assert s.ledger.consumed <= T


def test_practical_final_set_has_at_least_2k_items():
    hist = []
    halving_ranking(NullSampler(100, budget=10**5), TopKConfig(10**5, 5, Mode.PRACTICAL), exact_estimator(np.arange(100.0)), hist)
    assert hist[-1].items.size >= 10
    assert math.ceil(hist[-1].items.size / 2) < 10


def test_budget_too_small():
    with pytest.raises(BudgetTooSmallError):
        nonadaptive_topk(NullSampler(10), 5, 1, exact_estimator(np.arange(10.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(BudgetTooSmallError):
            sequential_halving_topk(NullSampler(1000, budget=1100), TopKConfig(1100, 1), exact_estimator(np.arange(1000.0)))


def test_requires_fresh_ledger_and_enough_items():
    s = NullSampler(10)
    s.draw([0], 1)
    with pytest.raises(ValueError):
        sequential_halving_topk(s, TopKConfig(100, 2), exact_estimator(np.arange(10.0)))
    with pytest.raises(ValueError):
        sequential_halving_topk(NullSampler(3), TopKConfig(100, 2), exact_estimator(np.arange(3.0)))


def test_deterministic_given_seed():
    inst = RankOneInstance.raw(np.random.default_rng(3).uniform(0.5, 1, 200), np.full(10**5, 0.8), c_lower=0.5)

    def run():
        s = InstanceSampler(inst, seed=21, budget=40000)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return sequential_halving_topk(s, TopKConfig(40000, 3))

    np.testing.assert_array_equal(run(), run())


def test_adaptive_success_grows_with_budget():
    rng = np.random.default_rng(5)
    u = np.r_[np.full(5, 0.9), rng.uniform(0.5, 0.7, 995)]
    rates = []
    for T in (20000, 100000, 500000):
        wins = 0
        for t in range(40):
            inst = RankOneInstance.raw(u, np.full(T, 0.8), c_lower=0.5)
            s = InstanceSampler(inst, seed=t, budget=T)
            got = sequential_halving_topk(s, TopKConfig(T, 5, Mode.PRACTICAL))
            wins += set(got.tolist()) == set(range(5))
        rates.append(wins / 40)
    assert rates[0] <= rates[1] <= rates[2]
    assert rates[2] > 0.9
