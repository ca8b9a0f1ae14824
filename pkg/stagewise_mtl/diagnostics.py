"""
Theory-side diagnostics: sparse eigenvalues of the task designs, the correlation of
the designs with the noise at the true weights, and the stagewise parameter error
bound with the conditions it is stated under.

Where a formula needs a single sample size and tasks differ, the smallest n_i is used.
"""
import math
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Dict, List, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config.models import Settings
from .core import TaskDataset
from .exceptions import CombinatorialCapExceeded, ContractViolation
from .loggings import logger

SUPPORT_BATCH = 4096
DECAY_PER_STAGE = 0.8


@dataclass
class SparseEigenResult:
    k: int
    rho_plus_per_task: NDArray[np.float64]
    rho_minus_per_task: NDArray[np.float64]

    @property
    def rho_plus_max(self) -> float:
        return float(self.rho_plus_per_task.max())

    @property
    def rho_minus_min(self) -> float:
        return float(self.rho_minus_per_task.min())


@dataclass
class BoundReport:
    lambda_min: float
    theta_min: float
    conditions: Dict[str, bool]
    bound_per_stage: List[float]
    r_bar: int
    s: int
    eta: float
    sigma: float
    u: float
    rho_plus_max_1: float = 0.0
    rho_plus_max_r: float = 0.0
    rho_minus_min_2r_s: float = 0.0
    eigenvalue_ratios: List[float] = field(default_factory=list)

    @property
    def conditions_met(self) -> bool:
        return all(self.conditions.values())


def _support_cap(max_supports: Optional[int]) -> int:
    return max_supports if max_supports is not None else Settings().EIGEN_SUPPORT_CAP


def sparse_eigenvalues(data: TaskDataset, k: int, max_supports: Optional[int] = None) -> SparseEigenResult:
    """
    Extreme eigenvalues of (X_i)_S^T (X_i)_S / n_i over every support |S| = k, per task.

    Supports smaller than k never give a smaller minimum eigenvalue (principal
    submatrices interlace), so enumerating |S| = k covers the ||w||_0 <= k definition
    for both the largest and the smallest value.
    """
    d = data.dimension
    if not 1 <= k <= d:
        raise ContractViolation(f'k must lie in [1, {d}], got {k}')
    supports = math.comb(d, k)
    cap = _support_cap(max_supports)
    if supports > cap:
        raise CombinatorialCapExceeded(supports, cap)

    grams = [X.T @ X / n for X, n in zip(data.designs, data.sample_sizes)]
    rho_plus = np.full(data.task_count, -np.inf)
    rho_minus = np.full(data.task_count, np.inf)

    iterator = combinations(range(d), k)
    while True:
        batch = np.array(list(islice(iterator, SUPPORT_BATCH)), dtype=int)
        if batch.size == 0:
            break
        rows, cols = batch[:, :, None], batch[:, None, :]
        for i, gram in enumerate(grams):
            eigenvalues = np.linalg.eigvalsh(gram[rows, cols])
            rho_plus[i] = max(rho_plus[i], eigenvalues[:, -1].max())
            rho_minus[i] = min(rho_minus[i], eigenvalues[:, 0].min())

    # eigvalsh may return tiny negative values for singular supports
    rho_minus = np.maximum(rho_minus, 0.0)
    logger.debug(f'Sparse eigenvalues for k={k} over {supports} supports: '
                 f'rho+ max {rho_plus.max():.6g}, rho- min {rho_minus.min():.6g}')
    return SparseEigenResult(k=k, rho_plus_per_task=rho_plus, rho_minus_per_task=rho_minus)


def residual_correlation(data: TaskDataset, W_bar: ArrayLike) -> NDArray[np.float64]:
    """Column i is X_i^T (X_i w_i - y_i) / n_i."""
    W_bar = data.check_weights(W_bar, 'True weights')
    return np.column_stack([X.T @ r / n for X, r, n in
                            zip(data.designs, data.residuals(W_bar), data.sample_sizes)])


def residual_correlation_bound(sigma: float, rho_plus_max_1: float, d: int, m: int, n: int, eta: float) -> float:
    """Uniform bound on |residual correlation| holding with probability at least 1 - eta."""
    return sigma * math.sqrt(2.0 * rho_plus_max_1 * math.log(2.0 * d * m / eta) / n)


def lambda_lower_bound(sigma: float, rho_plus_max_1: float, d: int, m: int, n: int, eta: float) -> float:
    return 12.0 * residual_correlation_bound(sigma, rho_plus_max_1, d, m, n, eta)


def theta_lower_bound(lam: float, m: int, rho_minus: float) -> float:
    return 11.0 * m * lam / rho_minus if rho_minus > 0 else math.inf


def noise_level_term(sigma: float, rho_plus_max_r: float, r_bar: int, m: int, n: int, eta: float) -> float:
    """m sigma^2 rho+_max(r) (7.4 r + 2.7 ln(2/eta)) / n"""
    return m * sigma ** 2 * rho_plus_max_r * (7.4 * r_bar + 2.7 * math.log(2.0 / eta)) / n


def stage_bounds(lam: float, sigma: float, m: int, n: int, r_bar: int, eta: float,
                 rho_plus_max_r: float, rho_minus: float, stages: int) -> List[float]:
    """
    Parameter error bound after stages 1..L: a term shrinking by sqrt(0.8) per stage
    plus a noise floor.
    """
    if rho_minus <= 0:
        return [math.inf] * stages
    shrinking = 9.1 * m * lam * math.sqrt(r_bar) / rho_minus
    floor = 39.5 * m * sigma * math.sqrt(rho_plus_max_r * (7.4 * r_bar + 2.7 * math.log(2.0 / eta)) / n) / rho_minus
    return [DECAY_PER_STAGE ** (stage / 2.0) * shrinking + floor for stage in range(1, stages + 1)]


def error_bound_report(data: TaskDataset,
                       W_bar: ArrayLike,
                       sigma: float,
                       eta: float,
                       s: int,
                       lam: float,
                       theta: float,
                       stages: int,
                       max_supports: Optional[int] = None) -> BoundReport:
    """
    Evaluate the stagewise error bound for (lam, theta) and the four conditions it needs:

    - row_magnitude: every nonzero row of W_bar has l1 norm >= 2 theta
    - eigenvalue_ratio: rho+_i(s) / rho-_i(2r + 2s) <= 1 + s / (2r) for every task
    - lambda: lam >= lambda_min
    - theta: theta >= theta_min

    Sparsity levels above d are evaluated at d, where the sparse eigenvalues saturate.
    """
    W_bar = data.check_weights(W_bar, 'True weights')
    if not 0 < eta < 1:
        raise ContractViolation(f'eta must lie in (0, 1), got {eta}')
    if sigma < 0:
        raise ContractViolation(f'sigma must be nonnegative, got {sigma}')

    d, m = data.shape
    n = min(data.sample_sizes)
    row_norms = np.abs(W_bar).sum(axis=1)
    nonzero_rows = row_norms > 0
    r_bar = int(np.count_nonzero(nonzero_rows))
    if s < max(r_bar, 1):
        raise ContractViolation(f's must be at least the number of nonzero rows ({r_bar}) and positive, got {s}')

    def eig(k: int) -> SparseEigenResult:
        return sparse_eigenvalues(data, min(k, d), max_supports)

    rho_plus_1 = eig(1).rho_plus_max
    rho_plus_r = eig(r_bar).rho_plus_max if r_bar > 0 else 0.0
    rho_minus = eig(2 * r_bar + s).rho_minus_min
    plus_s = eig(s).rho_plus_per_task
    minus_2r_2s = eig(2 * r_bar + 2 * s).rho_minus_per_task

    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(minus_2r_2s > 0, plus_s / minus_2r_2s, np.inf)
    ratio_limit = 1.0 + s / (2.0 * r_bar) if r_bar > 0 else math.inf

    lambda_min = lambda_lower_bound(sigma, rho_plus_1, d, m, n, eta)
    theta_min = theta_lower_bound(lam, m, rho_minus)
    conditions = {
        'row_magnitude': bool(np.all(row_norms[nonzero_rows] >= 2.0 * theta)),
        'eigenvalue_ratio': bool(np.all(ratios <= ratio_limit)),
        'lambda': bool(lam >= lambda_min),
        'theta': bool(theta >= theta_min),
    }

    report = BoundReport(lambda_min=lambda_min,
                         theta_min=theta_min,
                         conditions=conditions,
                         bound_per_stage=stage_bounds(lam, sigma, m, n, r_bar, eta, rho_plus_r, rho_minus, stages),
                         r_bar=r_bar,
                         s=s,
                         eta=eta,
                         sigma=sigma,
                         u=noise_level_term(sigma, rho_plus_r, r_bar, m, n, eta),
                         rho_plus_max_1=rho_plus_1,
                         rho_plus_max_r=rho_plus_r,
                         rho_minus_min_2r_s=rho_minus,
                         eigenvalue_ratios=ratios.tolist())
    logger.info(f'Error bound report: r={r_bar}, s={s}, lambda_min={lambda_min:.6g}, theta_min={theta_min:.6g}, '
                f'conditions={conditions}')
    return report
