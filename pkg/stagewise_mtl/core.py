"""
Problem data model for multi-task least squares: task datasets, the quadratic loss,
its gradient, penalised objectives and the Lipschitz constant used as FISTA step size.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Annotated, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, TypeAdapter

from .exceptions import (ContractViolation, DimensionMismatch, MissingDirtySplit,
                         PowerIterationDidNotConverge)
from .loggings import logger

# d x m, rows are features and columns are tasks
WeightMatrix = NDArray[np.float64]
# length-d nonnegative per-feature penalty weights
RegWeights = NDArray[np.float64]

POWER_ITERATION_TOL = 1e-6
POWER_ITERATION_MAX_ITER = 10_000
POWER_ITERATION_SEED = 0


@dataclass(frozen=True, eq=False)
class TaskDataset:
    """
    Design matrices X_i (n_i x d) and responses y_i (n_i) for m regression tasks.

    Arrays are copied to read-only float64 on construction. Every task needs at
    least one sample, all tasks share the column count d and no design matrix may
    have an all-zero column.
    """
    designs: Tuple[NDArray[np.float64], ...]
    responses: Tuple[NDArray[np.float64], ...]
    labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        designs = tuple(np.array(X, dtype=np.float64) for X in self.designs)
        responses = tuple(np.array(y, dtype=np.float64).reshape(-1) for y in self.responses)

        if not designs:
            raise ContractViolation('A TaskDataset needs at least one task')
        if len(designs) != len(responses):
            raise ContractViolation(f'{len(designs)} design matrices but {len(responses)} responses')

        d = designs[0].shape[1] if designs[0].ndim == 2 else -1
        for i, (X, y) in enumerate(zip(designs, responses)):
            if X.ndim != 2:
                raise ContractViolation(f'Design matrix of task {i} must be 2-D, got {X.ndim}-D')
            if X.shape[1] != d:
                raise DimensionMismatch(f'Design matrix of task {i}', (X.shape[0], d), X.shape)
            if X.shape[0] < 1:
                raise ContractViolation(f'Task {i} has no samples')
            if y.shape[0] != X.shape[0]:
                raise DimensionMismatch(f'Response of task {i}', (X.shape[0],), y.shape)
            if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
                raise ContractViolation(f'Task {i} contains non-finite values')
            zero_columns = np.flatnonzero(~X.any(axis=0))
            if zero_columns.size:
                raise ContractViolation(f'Design matrix of task {i} has all-zero columns '
                                        f'{zero_columns.tolist()}; remove them before fitting')
            X.setflags(write=False)
            y.setflags(write=False)

        labels = tuple(str(label) for label in self.labels) or tuple(str(i) for i in range(len(designs)))
        if len(labels) != len(designs):
            raise ContractViolation(f'{len(labels)} labels for {len(designs)} tasks')

        object.__setattr__(self, 'designs', designs)
        object.__setattr__(self, 'responses', responses)
        object.__setattr__(self, 'labels', labels)

    @classmethod
    def from_tasks(cls, tasks: Iterable[Tuple[ArrayLike, ArrayLike]],
                   labels: Sequence[str] = ()) -> 'TaskDataset':
        tasks = list(tasks)
        return cls(designs=tuple(X for X, _ in tasks), responses=tuple(y for _, y in tasks),
                   labels=tuple(labels))

    @property
    def dimension(self) -> int:
        return self.designs[0].shape[1]

    @property
    def task_count(self) -> int:
        return len(self.designs)

    @property
    def sample_sizes(self) -> Tuple[int, ...]:
        return tuple(X.shape[0] for X in self.designs)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.dimension, self.task_count

    @cached_property
    def _stacked(self) -> Optional[Tuple[NDArray[np.float64], NDArray[np.float64]]]:
        # (m, n, d) and (m, n) when every task has the same sample size
        if len(set(self.sample_sizes)) != 1:
            return None
        return np.stack(self.designs), np.stack(self.responses)

    def check_weights(self, W: ArrayLike, what: str = 'Weight matrix') -> WeightMatrix:
        W = np.asarray(W, dtype=np.float64)
        if W.shape != self.shape:
            raise DimensionMismatch(what, self.shape, W.shape)
        if not np.all(np.isfinite(W)):
            raise ContractViolation(f'{what} has non-finite entries')
        return W

    def residuals(self, W: ArrayLike) -> List[NDArray[np.float64]]:
        """X_i w_i - y_i for every task."""
        W = self.check_weights(W)
        if self._stacked is not None:
            X, Y = self._stacked
            return list(np.einsum('ind,di->in', X, W) - Y)
        return [X @ W[:, i] - y for i, (X, y) in enumerate(zip(self.designs, self.responses))]

    def predict(self, W: ArrayLike) -> List[NDArray[np.float64]]:
        W = self.check_weights(W)
        return [X @ W[:, i] for i, X in enumerate(self.designs)]

    def subset(self, indices: Sequence[ArrayLike]) -> 'TaskDataset':
        """Keep the given sample indices of every task."""
        if len(indices) != self.task_count:
            raise ContractViolation(f'{len(indices)} index sets for {self.task_count} tasks')
        return TaskDataset(designs=tuple(X[np.asarray(idx, dtype=int)] for X, idx in zip(self.designs, indices)),
                           responses=tuple(y[np.asarray(idx, dtype=int)] for y, idx in zip(self.responses, indices)),
                           labels=self.labels)


class CappedL1L1(BaseModel):
    kind: Literal['capped_l1_l1'] = 'capped_l1_l1'
    lam: PositiveFloat
    theta: PositiveFloat
    model_config = ConfigDict(frozen=True, extra='forbid')


class L1(BaseModel):
    kind: Literal['l1'] = 'l1'
    lam: PositiveFloat
    model_config = ConfigDict(frozen=True, extra='forbid')


class L12(BaseModel):
    kind: Literal['l12'] = 'l12'
    lam: PositiveFloat
    model_config = ConfigDict(frozen=True, extra='forbid')


class Dirty(BaseModel):
    kind: Literal['dirty'] = 'dirty'
    lam_s: PositiveFloat
    lam_b: PositiveFloat
    model_config = ConfigDict(frozen=True, extra='forbid')


RegularizerSpec = Annotated[Union[CappedL1L1, L1, L12, Dirty], Field(discriminator='kind')]
regularizer_adapter = TypeAdapter(RegularizerSpec)


def loss_value(data: TaskDataset, W: ArrayLike) -> float:
    """sum_i ||X_i w_i - y_i||^2 / (m n_i)"""
    m = data.task_count
    return float(sum(r @ r / (m * n) for r, n in zip(data.residuals(W), data.sample_sizes)))


def loss_gradient(data: TaskDataset, W: ArrayLike) -> WeightMatrix:
    m = data.task_count
    residuals = data.residuals(W)

    if data._stacked is not None:
        X, _ = data._stacked
        n = data.sample_sizes[0]
        return (2.0 / (m * n)) * np.einsum('ind,in->di', X, np.asarray(residuals))

    columns = [(2.0 / (m * n)) * (X.T @ r) for X, r, n in zip(data.designs, residuals, data.sample_sizes)]
    return np.column_stack(columns)


def penalty_value(W: ArrayLike,
                  reg: RegularizerSpec,
                  split: Optional[Tuple[ArrayLike, ArrayLike]] = None) -> float:
    W = np.asarray(W, dtype=np.float64)

    if isinstance(reg, CappedL1L1):
        return float(reg.lam * np.minimum(np.abs(W).sum(axis=1), reg.theta).sum())
    if isinstance(reg, L1):
        return float(reg.lam * np.abs(W).sum())
    if isinstance(reg, L12):
        return float(reg.lam * np.linalg.norm(W, axis=1).sum())
    if isinstance(reg, Dirty):
        if split is None:
            raise MissingDirtySplit()
        S, B = (np.asarray(part, dtype=np.float64) for part in split)
        if S.shape != W.shape or B.shape != W.shape:
            raise DimensionMismatch('Dirty split', W.shape, S.shape if S.shape != W.shape else B.shape)
        return float(reg.lam_s * np.abs(S).sum() + reg.lam_b * np.abs(B).max(axis=1).sum())
    raise ContractViolation(f'Unknown regularizer {reg!r}')


def objective_value(data: TaskDataset,
                    W: ArrayLike,
                    reg: RegularizerSpec,
                    split: Optional[Tuple[ArrayLike, ArrayLike]] = None) -> float:
    """
    Loss plus penalty. For the dirty model, *split* is the (S, B) pair with S + B = W.
    """
    W = data.check_weights(W)
    return loss_value(data, W) + penalty_value(W, reg, split)


def _largest_singular_value_squared(X: NDArray[np.float64], task: int, rng: np.random.Generator) -> float:
    # power iteration on the smaller Gram side
    A = X if X.shape[1] <= X.shape[0] else X.T
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0

    for iteration in range(1, POWER_ITERATION_MAX_ITER + 1):
        u = A.T @ (A @ v)
        new_estimate = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return 0.0
        v = u / norm_u
        if abs(new_estimate - estimate) <= POWER_ITERATION_TOL * new_estimate:
            return max(new_estimate, float(norm_u))
        estimate = new_estimate

    raise PowerIterationDidNotConverge(task, POWER_ITERATION_MAX_ITER, estimate)


def lipschitz_constant(data: TaskDataset) -> float:
    """
    max_i 2 sigma_max(X_i)^2 / (m n_i), a Lipschitz constant of ``loss_gradient``
    since the loss is separable over tasks.
    """
    rng = np.random.default_rng(POWER_ITERATION_SEED)
    m = data.task_count
    constants = [2.0 * _largest_singular_value_squared(X, i, rng) / (m * n)
                 for i, (X, n) in enumerate(zip(data.designs, data.sample_sizes))]
    L = max(constants)
    logger.debug(f'Lipschitz constant of the loss gradient: {L:.6g}')
    return L
