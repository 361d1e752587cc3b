"""Adaptive spectral bandits for rank-one response models.

Items have hidden values ``u``, workers (or hash functions) have hidden
reliabilities ``v`` and one pull reveals a binary entry whose expectation is
``u_i * v_j``. The package estimates ``u`` spectrally from partially observed
matrices and spends pulls adaptively to find the top-k items or the items
above a threshold.
"""

from .evaluation import (
    ADAPTIVE,
    NONADAPTIVE,
    AlignmentSetup,
    CurvePoint,
    Experiment,
    InstanceHardness,
    alignment_experiment,
    build_collision_pool,
    crowd_experiment,
    instance_hardness,
    metrics,
    run_experiment,
    smallest_budget,
)
from .minhash import (
    CollisionMatrix,
    Read,
    ReadSketch,
    calibrate_v_norm,
    collision_matrix,
    jaccard_exact,
    kmer_set,
    parse_fasta,
    sketch,
)
from .model import Channel, ObservationMatrix, RankOneInstance, expected_matrix, sample_observations
from .sampling import BudgetExceededError, BudgetLedger, InstanceSampler, MatrixSampler, spectral_estimator
from .spectral import (
    EstimatorMethod,
    SpectralConfig,
    SpectralEstimate,
    VNormSource,
    confidence_half_width,
    constants,
    estimate,
    estimate_split,
    leading_right_singular_vector,
)
from .synthdata import gen_crowd_instance, gen_genome, gen_reads_with_overlaps
from .threshold import ThresholdConfig, adaptive_threshold, nonadaptive_threshold
from .topk import Mode, TopKConfig, nonadaptive_topk, sequential_halving_topk

__version__ = "0.1.0"

__all__ = [
    "ADAPTIVE",
    "NONADAPTIVE",
    "AlignmentSetup",
    "BudgetExceededError",
    "BudgetLedger",
    "Channel",
    "CollisionMatrix",
    "CurvePoint",
    "EstimatorMethod",
    "Experiment",
    "InstanceHardness",
    "InstanceSampler",
    "MatrixSampler",
    "Mode",
    "ObservationMatrix",
    "RankOneInstance",
    "Read",
    "ReadSketch",
    "SpectralConfig",
    "SpectralEstimate",
    "ThresholdConfig",
    "TopKConfig",
    "VNormSource",
    "adaptive_threshold",
    "alignment_experiment",
    "build_collision_pool",
    "calibrate_v_norm",
    "collision_matrix",
    "confidence_half_width",
    "constants",
    "crowd_experiment",
    "estimate",
    "estimate_split",
    "expected_matrix",
    "gen_crowd_instance",
    "gen_genome",
    "gen_reads_with_overlaps",
    "instance_hardness",
    "jaccard_exact",
    "kmer_set",
    "leading_right_singular_vector",
    "metrics",
    "nonadaptive_threshold",
    "nonadaptive_topk",
    "parse_fasta",
    "run_experiment",
    "sample_observations",
    "sequential_halving_topk",
    "sketch",
    "smallest_budget",
    "spectral_estimator",
]
