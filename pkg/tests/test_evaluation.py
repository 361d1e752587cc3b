import math

import numpy as np
import pytest

from adaptive_spectral.evaluation import (
    ADAPTIVE,
    NONADAPTIVE,
    CurvePoint,
    Experiment,
    TrialSetup,
    aggregate,
    alignment_experiment,
    instance_hardness,
    metrics,
    pool_from_collisions,
    run_crowd_threshold,
    run_experiment,
    run_trials,
    sandwich_ok,
    smallest_budget,
)
from adaptive_spectral.model import RankOneInstance
from adaptive_spectral.sampling import InstanceSampler, NullSampler, exact_estimator, spectral_estimator


def test_hardness_worked_example():
    h = instance_hardness([0.4, 0.9, 0.5, 0.8], 2)
    np.testing.assert_allclose(h.gaps[2:], [-0.3, -0.4])
    assert h.H2 == pytest.approx(100 / 3)
    assert h.positive_gap == pytest.approx(0.3)


def test_hardness_single_term_when_k_is_n_minus_1():
    u = np.array([0.7, 0.2, 0.9])
    h = instance_hardness(u, 2)
    assert h.H2 == pytest.approx(3 / 0.5**2)


def test_hardness_sandwich_on_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        k = int(rng.integers(1, n))
        h = instance_hardness(rng.uniform(size=n), k)
        d = h.positive_gap
        assert (k + 1) / d**2 <= h.H2 * (1 + 1e-12)
        assert h.H2 <= n / d**2 * (1 + 1e-12)


def test_hardness_rejects_boundary_tie():
    with pytest.raises(ValueError):
        instance_hardness([0.9, 0.5, 0.5, 0.1], 2)
    with pytest.raises(ValueError):
        instance_hardness([0.9, 0.5], 2)


@pytest.mark.parametrize(
    "k_ids, two_k_ids, truth, want",
    [
        ([3, 1], [1, 3, 0, 2], [1, 3], (1, 1.0)),
        ([3, 0], [3, 0, 5, 6], [1, 3], (0, 0.5)),
        ([4, 5], [4, 5, 6, 7], [1, 3], (0, 0.0)),
    ],
)
def test_metrics_examples(k_ids, two_k_ids, truth, want):
    assert metrics(k_ids, two_k_ids, truth) == want


def test_metrics_input_checks():
    with pytest.raises(ValueError):
        metrics([1], [1], [1, 2])
    with pytest.raises(ValueError):
        metrics([1, 2], [1, 2, 3, 4, 5], [1, 2])


def test_curve_point_standard_error():
    p = CurvePoint(ADAPTIVE, 100, 25, 0.2, 1.0, 100.0, 0)
    assert p.se == pytest.approx(math.sqrt(0.2 * 0.8 / 25))
    assert math.isnan(CurvePoint(ADAPTIVE, 100, 25, math.nan, 1.0, 100.0, 0).se)


def _oracle_experiment(k=3, n=40):
    def setup(seed):
        u = np.random.default_rng(seed).permutation(n) / n
        return TrialSetup(lambda budget: NullSampler(n, budget=budget), np.argsort(-u)[:k]), u

    cache = {}

    def trial_setup(seed):
        ts, u = setup(seed)
        cache["u"] = u
        return ts

    def estimator(batch):
        return exact_estimator(cache["u"])(batch)

    return Experiment("oracle", k, trial_setup, estimator)


def test_oracle_estimator_gives_zero_error():
    pts = run_experiment(_oracle_experiment(), [2000, 4000], trials=5, root_seed=1)
    assert len(pts) == 4
    for p in pts:
        assert p.exact_topk_error_rate == 0.0 and p.top2k_recall_mean == 1.0
        assert p.mean_pulls_consumed <= p.budget


def test_trial_prefix_is_stable_when_trials_grow():
    inst = RankOneInstance.raw(np.random.default_rng(2).uniform(0.5, 1, 60), np.full(10**4, 0.8), c_lower=0.5)
    truth = np.argsort(-inst.u)[:2]

    def setup(seed):
        return TrialSetup(lambda b: InstanceSampler(inst, seed, budget=b), truth)

    exp = Experiment("prefix", 2, setup, spectral_estimator())
    short = run_trials(exp, [3000], 4, root_seed=9)
    long = run_trials(exp, [3000], 8, root_seed=9)
    assert long[: len(short)] == short


def test_aggregate_and_smallest_budget():
    pts = aggregate(run_trials(_oracle_experiment(), [1000, 3000], 3, 0), 0)
    assert [(p.algorithm, p.budget) for p in pts] == [
        (ADAPTIVE, 1000),
        (NONADAPTIVE, 1000),
        (ADAPTIVE, 3000),
        (NONADAPTIVE, 3000),
    ]
    assert smallest_budget(pts, ADAPTIVE, lambda p: p.top2k_recall_mean >= 1.0) == 1000
    assert smallest_budget(pts, ADAPTIVE, lambda p: False) is None


def test_alignment_experiment_on_planted_collisions():
    rng = np.random.default_rng(3)
    js = np.r_[np.full(3, 0.6), rng.uniform(0.0, 0.2, 37)]
    Y = (rng.random((40, 3000)) < js[:, None]).astype(np.uint8)
    cal = np.zeros(48, dtype=bool)
    cal[40:] = True
    Y = np.vstack([Y, np.zeros((8, 3000), dtype=np.uint8)])
    pool = pool_from_collisions(Y, cal, [0, 1, 2])
    pts = run_experiment(alignment_experiment(pool, 3), [12000], 5, 0)
    for p in pts:
        assert p.top2k_recall_mean == 1.0
        assert p.mean_pulls_consumed <= 12000


def test_sandwich_ok():
    u = np.array([0.9, 0.55, 0.2])
    assert sandwich_ok([0], u, 0.5, 0.65)
    assert sandwich_ok([0, 1], u, 0.5, 0.65)
    assert not sandwich_ok([1], u, 0.5, 0.65)
    assert not sandwich_ok([0, 2], u, 0.5, 0.65)


def test_crowd_threshold_runs_and_reports_budget():
    pts = run_crowd_threshold(60, 0.5, 0.8, [1e6], trials=2, root_seed=0, n_calibration=10)
    assert {p.algorithm for p in pts} == {ADAPTIVE, NONADAPTIVE}
    for p in pts:
        assert 0.0 <= p.error_rate <= 1.0 and p.trials == 2
