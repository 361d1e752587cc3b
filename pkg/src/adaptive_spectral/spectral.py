"""Matched-filter spectral estimators for rank-one matrices.

The core estimator splits the rows of ``X`` into two halves, takes the leading
right singular vector of each half, and scores every row of one half against
the singular vector of the *other* half. Because the direction used to score a
row never saw that row, each score is a sum of independent terms and admits an
entrywise confidence interval (see :func:`confidence_half_width`).

Also here: the cheaper column-sum variant used in practice, a no-split
variant, the row-average baseline, and the constants behind the interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg


class EstimatorMethod(enum.Enum):
    SPLIT_SVD = "split_svd"
    COLUMN_SUM = "column_sum"
    FULL_SVD = "full_svd"


class VNormSource(enum.Enum):
    ORACLE = "oracle"
    CALIBRATION = "calibration"
    NONE = "none"


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class DegenerateMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralConfig:
    c_lower: float = 0.5
    power_tolerance: float = 1e-10
    power_max_iters: int = 1000
    v_hat_method: EstimatorMethod = EstimatorMethod.SPLIT_SVD
    v_norm_source: VNormSource = VNormSource.ORACLE
    constant_scale: float = 1.0
    # "auto" runs power iteration except on thin matrices, where the Gram
    # matrix of the short side is small enough to decompose directly
    solver: str = "auto"
    dense_cutoff: int = 128
    sign_rule: str = "entry_sum"

    def __post_init__(self):
        if not 0.0 < self.c_lower < 1.0:
            raise ValueError("c_lower must lie in (0, 1)")
        if self.power_tolerance <= 0:
            raise ValueError("power_tolerance must be positive")
        if self.constant_scale <= 0:
            raise ValueError("constant_scale must be positive")
        if self.solver not in ("auto", "power", "dense"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.sign_rule not in ("entry_sum", "row_average"):
            raise ValueError(f"unknown sign rule {self.sign_rule!r}")

    @property
    def c4_scaled(self) -> float:
        return self.constant_scale * constants(self.c_lower).C4


@dataclass(frozen=True)
class ConstantSet:
    c: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float


def constants(c: float) -> ConstantSet:
    """Constants of the entrywise error bound for entries bounded below by ``c``."""
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    c2 = c**4 / 48.0
    c3 = 4.0 / c**4 + 30.0 * math.sqrt(2.0)
    c4 = c**2 * min(1.0 / 18.0, c2 / 9.0)
    c1 = min(c4, (6.0 * c3 / c) ** -2)
    return ConstantSet(c=c, C1=c1, C2=c2, C3=c3, C4=c4, C5=c1 / 64.0)


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    u_hat: np.ndarray
    ci_half_width: Optional[float]
    m_used: int
    method: EstimatorMethod


_DEFAULT = SpectralConfig()


def _orient(vec: np.ndarray, reference: Optional[np.ndarray]) -> np.ndarray:
    if reference is not None:
        dot = float(vec @ reference)
        if dot < 0:
            return -vec
        if dot > 0:
            return vec
    s = float(vec.sum())
    if abs(s) > 1e-12 * max(1.0, float(np.abs(vec).sum())):
        return vec if s > 0 else -vec
    nz = np.flatnonzero(vec)
    if nz.size and vec[nz[0]] < 0:
        return -vec
    return vec


def _power_iteration(X: np.ndarray, tol: float, max_iters: int) -> np.ndarray:
    m = X.shape[1]
    v = np.full(m, 1.0 / math.sqrt(m))
    residual = math.inf
    for _ in range(max_iters):
        w = X.T @ (X @ v)
        lam = float(v @ w)
        wn = float(np.linalg.norm(w))
        if wn == 0.0 or lam <= 0.0:
            raise ConvergenceError("start vector is orthogonal to the row space", math.inf)
        residual = float(np.linalg.norm(w - lam * v)) / lam
        if residual <= tol:
            return w / wn
        v = w / wn
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations", residual)


def _dense_leading(X: np.ndarray) -> np.ndarray:
    n, m = X.shape
    if m <= n:
        gram = X.T @ X
        _, vecs = scipy.linalg.eigh(gram, subset_by_index=[m - 1, m - 1])
        return vecs[:, 0]
    gram = X @ X.T
    _, vecs = scipy.linalg.eigh(gram, subset_by_index=[n - 1, n - 1])
    v = X.T @ vecs[:, 0]
    return v / np.linalg.norm(v)


def leading_right_singular_vector(
    X, config: SpectralConfig = _DEFAULT, reference: Optional[np.ndarray] = None
) -> np.ndarray:
    """Unit leading right singular vector of ``X``.

    The sign is chosen so the entries sum to a nonnegative number (first
    nonzero entry positive on a tie), or so that the vector has nonnegative
    inner product with ``reference`` when one is given.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ValueError("X must be a nonempty 2-d array")
    if not np.any(X):
        raise DegenerateMatrixError("all-zero matrix has no leading singular vector")

    solver = config.solver
    if solver == "auto":
        solver = "dense" if min(X.shape) <= config.dense_cutoff else "power"
    if solver == "power":
        try:
            v = _power_iteration(X, config.power_tolerance, config.power_max_iters)
        except ConvergenceError:
            if config.solver == "power":
                raise
            v = _dense_leading(X)
    else:
        v = _dense_leading(X)
    v = v / np.linalg.norm(v)
    return _orient(v, reference)


def _support_stack(X: np.ndarray, support_rows: Optional[np.ndarray]) -> np.ndarray:
    if support_rows is None or len(support_rows) == 0:
        return X
    return np.vstack([X, np.asarray(support_rows, dtype=float)])


def _apply_sign_rule(u_hat: np.ndarray, X: np.ndarray, config: SpectralConfig, reference) -> np.ndarray:
    if config.sign_rule == "row_average" and reference is None:
        if float(u_hat @ row_average_scores(X)) < 0:
            return -u_hat
    return u_hat


def estimate_split(
    X,
    v_norm: Optional[float],
    config: SpectralConfig = _DEFAULT,
    *,
    reference: Optional[np.ndarray] = None,
    support_rows: Optional[np.ndarray] = None,
) -> SpectralEstimate:
    """Split-matrix matched-filter estimate of ``u`` (both halves cross-scored).

    Rows ``0..ceil(n/2)-1`` form half A, the rest half B. ``support_rows``
    (e.g. calibration questions) are appended to both halves when estimating
    the singular vectors but are never scored. With ``v_norm`` None the result
    is only order-valid and carries no confidence interval.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if n < 2:
        raise ValueError("split estimation needs at least two rows")
    if v_norm is not None and v_norm <= 0:
        raise ValueError("v_norm must be positive")
    half = (n + 1) // 2
    XA, XB = X[:half], X[half:]
    try:
        vA = leading_right_singular_vector(_support_stack(XA, support_rows), config, reference)
        vB = leading_right_singular_vector(_support_stack(XB, support_rows), config, reference)
    except DegenerateMatrixError as exc:
        raise DegenerateMatrixError(f"degenerate half in split estimate: {exc}") from None
    scale = 1.0 if v_norm is None else float(v_norm)
    u_hat = np.concatenate([XA @ vB, XB @ vA]) / scale
    u_hat = _apply_sign_rule(u_hat, X, config, reference)
    ci = None if v_norm is None else confidence_half_width(n, m, config=config, all_items=True)
    return SpectralEstimate(u_hat, ci, m, EstimatorMethod.SPLIT_SVD)


def estimate_full_svd(
    X,
    v_norm: Optional[float] = None,
    config: SpectralConfig = _DEFAULT,
    *,
    reference: Optional[np.ndarray] = None,
    support_rows: Optional[np.ndarray] = None,
) -> SpectralEstimate:
    """No-split variant: singular vector of all of ``X``, then ``X v_hat``.

    Rows are no longer independent of the direction that scores them, so no
    interval is attached even when ``v_norm`` is known.
    """
    X = np.asarray(X, dtype=float)
    v = leading_right_singular_vector(_support_stack(X, support_rows), config, reference)
    u_hat = X @ v
    if v_norm is not None:
        u_hat = u_hat / float(v_norm)
    u_hat = _apply_sign_rule(u_hat, X, config, reference)
    return SpectralEstimate(u_hat, None, X.shape[1], EstimatorMethod.FULL_SVD)


def estimate_column_sum(
    X,
    v_norm: Optional[float] = None,
    config: SpectralConfig = _DEFAULT,
    *,
    reference: Optional[np.ndarray] = None,
    support_rows: Optional[np.ndarray] = None,
) -> SpectralEstimate:
    """Column sums as the worker direction, then a matched filter on every row."""
    X = np.asarray(X, dtype=float)
    sums = _support_stack(X, support_rows).sum(axis=0)
    norm = float(np.linalg.norm(sums))
    if norm == 0.0:
        raise DegenerateMatrixError("column sums vanish")
    v = _orient(sums / norm, reference)
    u_hat = X @ v
    if v_norm is not None:
        u_hat = u_hat / float(v_norm)
    u_hat = _apply_sign_rule(u_hat, X, config, reference)
    return SpectralEstimate(u_hat, None, X.shape[1], EstimatorMethod.COLUMN_SUM)


def estimate(X, v_norm, config: SpectralConfig = _DEFAULT, **kwargs) -> SpectralEstimate:
    """Dispatch on ``config.v_hat_method``."""
    method = config.v_hat_method
    if method is EstimatorMethod.SPLIT_SVD:
        return estimate_split(X, v_norm, config, **kwargs)
    if method is EstimatorMethod.COLUMN_SUM:
        return estimate_column_sum(X, v_norm, config, **kwargs)
    return estimate_full_svd(X, v_norm, config, **kwargs)


def row_average_scores(X) -> np.ndarray:
    """Row means of ``X``.

    Order-preserving in expectation (``E = u_i * mean(v)``) but biased as an
    estimate of ``u_i`` itself, so only usable for ranking.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("X needs at least one column")
    return X.mean(axis=1)


def confidence_half_width(
    n: int,
    m: int,
    delta: Optional[float] = None,
    config: SpectralConfig = _DEFAULT,
    *,
    all_items: bool = False,
) -> float:
    """Uniform half-width ``Gamma`` for an ``n x m`` split estimate.

    Per item with failure probability ``delta``::

        Gamma = sqrt((log(1/delta) + log(m + n + 2)) / (C4' * min(m, n)))

    With ``all_items=True`` the numerator becomes ``3 log n + 2 log(m + n)``,
    which covers all ``n`` items simultaneously with probability ``1 - 1/n^2``.
    ``C4' = constant_scale * C4(c_lower)``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if all_items:
        numerator = 3.0 * math.log(n) + 2.0 * math.log(m + n)
    else:
        if delta is None or not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        numerator = math.log(1.0 / delta) + math.log(m + n + 2)
    return math.sqrt(numerator / (config.c4_scaled * min(m, n)))


def calibrate_constant_scale(
    sup_errors,
    n: int,
    m: int,
    config: SpectralConfig = _DEFAULT,
    *,
    delta: Optional[float] = None,
    coverage: Optional[float] = None,
    all_items: bool = True,
) -> float:
    """Largest ``constant_scale`` whose interval covers ``sup_errors`` often enough.

    ``sup_errors`` are observed ``max_i |u_hat_i - u_i|`` from trials on
    instances with known ground truth. The returned scale gives the tightest
    interval that still contains at least a ``coverage`` fraction of them
    (default ``1 - delta``, or ``1 - 1/n^2`` for the all-items form).
    """
    errs = np.asarray(sup_errors, dtype=float)
    if errs.size == 0:
        raise ValueError("need at least one trial")
    if coverage is None:
        coverage = 1.0 - (1.0 / n**2 if all_items else delta)
    unit = SpectralConfig(c_lower=config.c_lower, constant_scale=1.0)
    gamma_at_one = confidence_half_width(n, m, delta, unit, all_items=all_items)
    # Gamma(s) = gamma_at_one / sqrt(s); trial t is covered iff s <= (gamma_at_one / e_t)^2
    with np.errstate(divide="ignore"):
        admissible = np.sort((gamma_at_one / errs) ** 2)
    need = math.ceil(coverage * errs.size - 1e-9)
    return float(admissible[errs.size - need])
