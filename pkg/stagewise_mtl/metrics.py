from typing import List, Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .exceptions import ContractViolation, DegenerateTargets, DimensionMismatch


def lpq_norm(M: ArrayLike, p: float, q: float, outer_axis: Literal['rows', 'columns'] = 'rows') -> float:
    """
    (sum_outer (sum_inner |entry|^q)^(p/q))^(1/p), with the usual limits for p or q = inf.

    With outer_axis='rows' the inner norm runs along each row, with 'columns' along
    each column.
    """
    if p < 1 or q < 1:
        raise ContractViolation(f'p and q must be >= 1, got p={p}, q={q}')
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ContractViolation(f'lpq_norm expects a matrix, got {M.ndim}-D input')
    if outer_axis not in ('rows', 'columns'):
        raise ContractViolation(f'outer_axis must be "rows" or "columns", got {outer_axis!r}')
    inner = np.linalg.norm(M, ord=q, axis=1 if outer_axis == 'rows' else 0)
    return float(np.linalg.norm(inner, ord=p))


def param_error_l21(W_hat: ArrayLike, W_bar: ArrayLike) -> float:
    """Sum over tasks (columns) of the Euclidean norm of the coefficient error."""
    W_hat = np.asarray(W_hat, dtype=np.float64)
    W_bar = np.asarray(W_bar, dtype=np.float64)
    if W_hat.shape != W_bar.shape:
        raise DimensionMismatch('Estimated weights', W_bar.shape, W_hat.shape)
    return lpq_norm(W_hat - W_bar, p=1, q=2, outer_axis='columns')


def _per_task(values, sizes: Optional[Sequence[int]]) -> List[np.ndarray]:
    if sizes is None:
        return [np.asarray(v, dtype=np.float64).reshape(-1) for v in values]
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if sum(sizes) != values.size:
        raise DimensionMismatch('Concatenated values', (sum(sizes),), values.shape)
    return np.split(values, np.cumsum(sizes)[:-1])


def _weighted_normalised_mse(predictions, actuals, sizes, normaliser, what: str) -> float:
    predictions = _per_task(predictions, sizes)
    actuals = _per_task(actuals, sizes)
    if len(predictions) != len(actuals):
        raise ContractViolation(f'{len(predictions)} prediction groups for {len(actuals)} target groups')

    total, count = 0.0, 0
    for i, (prediction, actual) in enumerate(zip(predictions, actuals)):
        if prediction.shape != actual.shape:
            raise DimensionMismatch(f'Predictions of task {i}', actual.shape, prediction.shape)
        if actual.size == 0:
            raise ContractViolation(f'Task {i} has no test samples')
        scale = normaliser(actual)
        if scale == 0:
            raise DegenerateTargets(f'Task {i} has {what}; the normalised error is undefined')
        total += actual.size * np.mean((prediction - actual) ** 2) / scale
        count += actual.size
    return float(total / count)


def nmse(predictions, actuals, sizes: Optional[Sequence[int]] = None) -> float:
    """
    Sample-size weighted mean over tasks of MSE_i / Var(y_i), population variance.

    *predictions* and *actuals* are per-task sequences, or flat arrays split by *sizes*.
    """
    return _weighted_normalised_mse(predictions, actuals, sizes, np.var, 'zero target variance')


def amse(predictions, actuals, sizes: Optional[Sequence[int]] = None) -> float:
    """Sample-size weighted mean over tasks of MSE_i / mean(y_i^2)."""
    return _weighted_normalised_mse(predictions, actuals, sizes, lambda y: np.mean(y ** 2), 'all-zero targets')
