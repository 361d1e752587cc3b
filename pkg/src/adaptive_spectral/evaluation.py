"""Instance hardness, success metrics and the Monte-Carlo experiment harness."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._seeding import derive_seed
from .minhash import collision_matrix, draw_seeds
from .sampling import Estimator, InstanceSampler, MatrixSampler, Sampler, spectral_estimator
from .spectral import EstimatorMethod, SpectralConfig, VNormSource
from .synthdata import PlantedReadSet, default_layout, gen_crowd_instance, gen_genome, gen_reads_with_overlaps
from .threshold import ThresholdConfig, adaptive_threshold, nonadaptive_threshold
from .topk import Mode, TopKConfig, halving_ranking, nonadaptive_ranking

ADAPTIVE = "adaptive"
NONADAPTIVE = "nonadaptive"


@dataclass(frozen=True, eq=False)
class InstanceHardness:
    sorted_values: np.ndarray
    k: int
    gaps: np.ndarray
    positive_gap: float
    H2: float


def instance_hardness(u, k: int) -> InstanceHardness:
    """Gaps ``Delta_i = u_(i) - u_(k)`` and ``H2 = max_{i>k} i / Delta_i^2`` (1-based ranks)."""
    u = np.asarray(u, dtype=float).ravel()
    n = u.size
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n (k={k}, n={n})")
    s = np.sort(u)[::-1]
    if not s[k - 1] > s[k]:
        raise ValueError("values tie at the top-k boundary; the top-k set is not well defined")
    gaps = s - s[k - 1]
    ranks = np.arange(k + 1, n + 1)
    h2 = float(np.max(ranks / gaps[k:] ** 2))
    return InstanceHardness(s, k, gaps, float(s[k - 1] - s[k]), h2)


def metrics(returned_k, returned_2k, truth_topk) -> Tuple[int, float]:
    """``(exact success, top-2k recall)`` of one run."""
    truth = set(np.asarray(truth_topk).tolist())
    k = len(truth)
    if len(np.asarray(truth_topk)) != k:
        raise ValueError("truth has repeated ids")
    got_k = set(np.asarray(returned_k).tolist())
    if len(got_k) != k:
        raise ValueError(f"returned_k has {len(got_k)} ids, truth has {k}")
    got_2k = set(np.asarray(returned_2k).tolist())
    if len(got_2k) > 2 * k:
        raise ValueError("returned_2k holds more than 2k ids")
    return int(got_k == truth), len(truth & got_2k) / k


@dataclass(frozen=True)
class CurvePoint:
    algorithm: str
    budget: int
    trials: int
    exact_topk_error_rate: float
    top2k_recall_mean: float
    mean_pulls_consumed: float
    seed: int

    @property
    def se(self) -> float:
        p = self.exact_topk_error_rate
        if math.isnan(p):
            return math.nan
        return math.sqrt(p * (1.0 - p) / self.trials)


@dataclass(frozen=True)
class TrialResult:
    algorithm: str
    budget: int
    trial: int
    exact_success: Optional[int]
    top2k_recall: Optional[float]
    pulls: int


@dataclass(frozen=True)
class TrialSetup:
    """What one trial needs: a fresh sampler per run and the true top-k ids."""

    new_sampler: Callable[[int], Sampler]
    truth_topk: np.ndarray


@dataclass
class Experiment:
    """Descriptor for :func:`run_experiment`.

    ``setup(trial_seed)`` builds a trial. Every run in a trial (each algorithm,
    budget and metric) gets a sampler from the same seed, so the algorithms
    see common random numbers.
    """

    name: str
    k: int
    setup: Callable[[int], TrialSetup]
    estimator: Estimator
    algorithms: Tuple[str, ...] = (ADAPTIVE, NONADAPTIVE)
    mode: Mode = Mode.PRACTICAL
    m_max_factor: Optional[float] = 10.0
    measure_exact: bool = True
    measure_top2k: bool = True
    column_cap: Optional[int] = None

    def topk_config(self, budget: int, k: int) -> TopKConfig:
        m_max = None if self.m_max_factor is None else max(1, int(self.m_max_factor * math.sqrt(budget)))
        if self.column_cap is not None:
            m_max = self.column_cap if m_max is None else min(m_max, self.column_cap)
        return TopKConfig(budget, k, self.mode, m_max=m_max)

    def ranking(self, algorithm: str, sampler: Sampler, budget: int, k: int) -> np.ndarray:
        if algorithm == ADAPTIVE:
            return halving_ranking(sampler, self.topk_config(budget, k), self.estimator)
        if algorithm == NONADAPTIVE:
            return nonadaptive_ranking(sampler, budget, k, self.estimator)
        raise ValueError(f"unknown algorithm {algorithm!r}")


def _run_trial(exp: Experiment, budgets: Sequence[int], trial: int, root_seed: int) -> List[TrialResult]:
    setup = exp.setup(derive_seed(root_seed, trial))
    k = exp.k
    truth = np.asarray(setup.truth_topk)
    out = []
    for budget in budgets:
        for alg in exp.algorithms:
            exact = recall = None
            pulls = 0
            if exp.measure_exact:
                s = setup.new_sampler(budget)
                got = exp.ranking(alg, s, budget, k)[:k]
                exact, _ = metrics(got, got, truth)
                pulls = s.ledger.consumed
            if exp.measure_top2k:
                s = setup.new_sampler(budget)
                got2 = exp.ranking(alg, s, budget, 2 * k)[: 2 * k]
                recall = len(set(truth.tolist()) & set(got2.tolist())) / k
                if not exp.measure_exact:
                    pulls = s.ledger.consumed
            out.append(TrialResult(alg, int(budget), trial, exact, recall, int(pulls)))
    return out


def run_trials(
    exp: Experiment, budgets: Sequence[int], trials: int, root_seed: int, threads: int = 1
) -> List[TrialResult]:
    """Per-trial results ordered by (trial, budget, algorithm); trial ``t`` uses seed ``[root, t]``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    budgets = [int(b) for b in budgets]
    if not budgets:
        raise ValueError("need at least one budget")
    if threads <= 1:
        chunks = [_run_trial(exp, budgets, t, root_seed) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda t: _run_trial(exp, budgets, t, root_seed), range(trials)))
    return [r for chunk in chunks for r in chunk]


def aggregate(results: Sequence[TrialResult], root_seed: int) -> List[CurvePoint]:
    """One point per (budget, algorithm) in first-seen order."""
    groups: Dict[Tuple[int, str], List[TrialResult]] = {}
    for r in sorted(results, key=lambda r: r.trial):
        groups.setdefault((r.budget, r.algorithm), []).append(r)
    points = []
    for (budget, alg), rs in groups.items():
        exact = [r.exact_success for r in rs if r.exact_success is not None]
        rec = [r.top2k_recall for r in rs if r.top2k_recall is not None]
        points.append(
            CurvePoint(
                alg,
                budget,
                len(rs),
                1.0 - float(np.mean(exact)) if exact else math.nan,
                float(np.mean(rec)) if rec else math.nan,
                float(np.mean([r.pulls for r in rs])),
                root_seed,
            )
        )
    return points


def run_experiment(
    exp: Experiment, budgets: Sequence[int], trials: int, root_seed: int, threads: int = 1
) -> List[CurvePoint]:
    return aggregate(run_trials(exp, budgets, trials, root_seed, threads), root_seed)


def smallest_budget(points: Sequence[CurvePoint], algorithm: str, ok: Callable[[CurvePoint], bool]) -> Optional[int]:
    """Smallest budget at which ``algorithm``'s point satisfies ``ok``."""
    good = [p.budget for p in points if p.algorithm == algorithm and ok(p)]
    return min(good) if good else None


# crowdsourcing


def crowd_experiment(
    n: int = 1000,
    k: int = 5,
    *,
    n_calibration: int = 20,
    method: EstimatorMethod = EstimatorMethod.FULL_SVD,
    m_max_factor: Optional[float] = 10.0,
    beta_a: float = 1.0,
    beta_b: float = 5.0,
    measure_exact: bool = True,
    measure_top2k: bool = True,
    algorithms: Tuple[str, ...] = (ADAPTIVE, NONADAPTIVE),
) -> Experiment:
    """Fresh ``Beta(a, b)`` items and ``U(0, 1)`` workers every trial (symmetric channel).

    ``n_calibration`` gold questions with ``p = 1`` ride along with every
    worker; they fix the sign of the worker direction and are not billed to
    the budget.
    """

    def setup(trial_seed: int) -> TrialSetup:
        inst = gen_crowd_instance(n, derive_seed(trial_seed, 1), beta_a, beta_b)
        truth = np.argsort(-inst.item_params, kind="stable")[:k]
        sampler_seed = derive_seed(trial_seed, 2)

        def new_sampler(budget: int) -> Sampler:
            return InstanceSampler(
                inst, sampler_seed, budget=budget, v_norm_source=VNormSource.NONE, n_calibration=n_calibration
            )

        return TrialSetup(new_sampler, truth)

    est = spectral_estimator(SpectralConfig(v_hat_method=method, v_norm_source=VNormSource.NONE))
    return Experiment(
        "crowd-topk",
        k,
        setup,
        est,
        algorithms,
        m_max_factor=m_max_factor,
        measure_exact=measure_exact,
        measure_top2k=measure_top2k,
    )


# read alignment


@dataclass(frozen=True)
class AlignmentSetup:
    """Knobs of the synthetic read-overlap benchmark."""

    G: int = 20000
    n_reads: int = 300
    L: int = 1000
    kmer: int = 14
    k_top: int = 5
    noise_rate: float = 0.02
    n_calibration: int = 20
    n_hashes: int = 3000
    top_overlap: Tuple[float, float] = (0.45, 0.55)
    moderate_overlap: Tuple[float, float] = (0.2, 0.35)
    repeat_length: int = 300
    repeat_copies: int = 40
    repeat_divergence: Tuple[float, float] = (0.0, 0.3)
    repeat_anchor: Optional[int] = 600
    canonical: bool = False
    seed: int = 0


@dataclass(frozen=True, eq=False)
class CollisionPool:
    """Processed ``X = 1 - Y`` for the data reads plus calibration rows."""

    planted: Optional[PlantedReadSet]
    X: np.ndarray
    calibration: np.ndarray
    truth_topk: np.ndarray
    read_ids: List[str] = field(default_factory=list)


def planted_reads(cfg: AlignmentSetup) -> PlantedReadSet:
    genome = gen_genome(
        cfg.G,
        derive_seed(cfg.seed, 1),
        repeat_length=cfg.repeat_length,
        repeat_copies=cfg.repeat_copies,
        repeat_divergence=cfg.repeat_divergence,
        repeat_anchor=cfg.repeat_anchor if cfg.repeat_copies else None,
    )
    layout = default_layout(
        cfg.n_reads,
        cfg.G,
        cfg.L,
        cfg.k_top,
        derive_seed(cfg.seed, 2),
        top_overlap=cfg.top_overlap,
        moderate_overlap=cfg.moderate_overlap,
    )
    return gen_reads_with_overlaps(genome, cfg.L, layout, cfg.noise_rate, cfg.n_calibration, derive_seed(cfg.seed, 3))


def build_collision_pool(cfg: AlignmentSetup) -> CollisionPool:
    ps = planted_reads(cfg)
    seeds = draw_seeds(cfg.n_hashes, derive_seed(cfg.seed, 4))
    cm = collision_matrix(ps.reference, ps.reads, cfg.kmer, seeds, cfg.canonical)
    X = 1.0 - cm.Y.astype(float)
    cal = np.array([r.is_calibration for r in ps.reads])
    return CollisionPool(ps, X[~cal], X[cal], ps.top_k(cfg.k_top), cm.read_ids)


def pool_from_collisions(Y, calibration_mask, truth_topk, read_ids=None) -> CollisionPool:
    Y = np.asarray(Y)
    cal = np.asarray(calibration_mask, dtype=bool)
    X = 1.0 - Y.astype(float)
    return CollisionPool(None, X[~cal], X[cal], np.asarray(truth_topk), list(read_ids or []))


def alignment_experiment(
    pool: CollisionPool,
    k: int,
    *,
    method: EstimatorMethod = EstimatorMethod.COLUMN_SUM,
    m_max_factor: Optional[float] = 10.0,
    measure_exact: bool = True,
    measure_top2k: bool = True,
    algorithms: Tuple[str, ...] = (ADAPTIVE, NONADAPTIVE),
) -> Experiment:
    """Fixed read set; each trial relabels the reads and reorders the hash functions.

    Reads with a large overlap have *small* ``u = 1 - JS``, so the samplers
    run with orientation -1.
    """
    n = pool.X.shape[0]

    def setup(trial_seed: int) -> TrialSetup:
        perm = np.random.Generator(np.random.Philox(key=derive_seed(trial_seed, 1))).permutation(n)
        data = pool.X[perm]
        inverse = np.argsort(perm)
        truth = np.sort(inverse[pool.truth_topk])
        sampler_seed = derive_seed(trial_seed, 2)

        def new_sampler(budget: int) -> Sampler:
            return MatrixSampler(
                data,
                sampler_seed,
                budget=budget,
                calibration_rows=pool.calibration if pool.calibration.size else None,
                orientation=-1,
            )

        return TrialSetup(new_sampler, truth)

    est = spectral_estimator(SpectralConfig(v_hat_method=method, v_norm_source=VNormSource.NONE))
    return Experiment(
        "align-topk",
        k,
        setup,
        est,
        algorithms,
        m_max_factor=m_max_factor,
        measure_exact=measure_exact,
        measure_top2k=measure_top2k,
        column_cap=pool.X.shape[1],
    )


# thresholding


@dataclass(frozen=True)
class ThresholdPoint:
    algorithm: str
    budget: int
    trials: int
    error_rate: float
    mean_pulls: float
    seed: int

    @property
    def se(self) -> float:
        return math.sqrt(self.error_rate * (1.0 - self.error_rate) / self.trials)


def sandwich_ok(accepted, u, alpha: float, beta: float) -> bool:
    """``{u > beta}`` inside the output and nothing below ``alpha`` in it."""
    u = np.asarray(u, dtype=float)
    acc = np.zeros(u.size, dtype=bool)
    acc[np.asarray(accepted, dtype=np.int64)] = True
    return bool(np.all(acc[u > beta]) and not np.any(acc[u < alpha]))


def run_crowd_threshold(
    n: int,
    alpha_p: float,
    beta_p: float,
    scales: Sequence[float],
    trials: int,
    root_seed: int,
    *,
    n_calibration: int = 20,
    c_lower: float = 0.5,
    threads: int = 1,
) -> List[ThresholdPoint]:
    """Thresholding on fresh crowd instances, one point per (constant scale, algorithm).

    The band is given on ``p`` (fraction of perfect workers answering yes)
    and mapped to ``u = p - 1/2``. ``budget`` reports the pulls of the
    uniform baseline at that scale, ``n * ceil(t_C)``.
    """
    alpha, beta = alpha_p - 0.5, beta_p - 0.5

    def trial(t: int) -> List[Tuple[float, str, bool, int]]:
        ts = derive_seed(root_seed, t)
        inst = gen_crowd_instance(n, derive_seed(ts, 1))
        rows = []
        for scale in scales:
            spec = SpectralConfig(
                c_lower=c_lower, constant_scale=scale, v_norm_source=VNormSource.CALIBRATION
            )
            cfg = ThresholdConfig(alpha, beta, spectral=spec, seed=derive_seed(ts, 3))
            for alg, fn in ((ADAPTIVE, adaptive_threshold), (NONADAPTIVE, nonadaptive_threshold)):
                s = InstanceSampler(
                    inst,
                    derive_seed(ts, 2),
                    v_norm_source=VNormSource.CALIBRATION,
                    n_calibration=n_calibration,
                )
                acc = fn(s, cfg)
                rows.append((scale, alg, sandwich_ok(acc, inst.u, alpha, beta), s.ledger.consumed))
        return rows

    if threads <= 1:
        chunks = [trial(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(trial, range(trials)))
    points = []
    for scale in scales:
        spec = SpectralConfig(c_lower=c_lower, constant_scale=scale)
        budget = n * math.ceil(ThresholdConfig(alpha, beta, spectral=spec).cleanup_workers(n))
        for alg in (ADAPTIVE, NONADAPTIVE):
            rs = [r for c in chunks for r in c if r[0] == scale and r[1] == alg]
            err = 1.0 - float(np.mean([r[2] for r in rs]))
            points.append(ThresholdPoint(alg, budget, trials, err, float(np.mean([r[3] for r in rs])), root_seed))
    return points
