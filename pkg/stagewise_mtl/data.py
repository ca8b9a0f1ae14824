"""
Synthetic multi-task regression instances, CSV ingestion and per-task splitting.

Random draws use numpy's PCG64 through ``np.random.default_rng(seed)`` and one stream
per call, consumed in a fixed order (designs task by task, coefficients, zero rows,
within-row zeros, noise task by task), so an instance is a pure function of its seed.
"""
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from .config.models import SyntheticSpec
from .core import TaskDataset, WeightMatrix
from .exceptions import ContractViolation, DataParseError, InvalidSplit
from .loggings import logger


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    data: TaskDataset
    true_weights: WeightMatrix
    noise: Tuple[NDArray[np.float64], ...]


def _sample_true_weights(spec: SyntheticSpec, rng: np.random.Generator) -> WeightMatrix:
    W = rng.uniform(spec.coef_low, spec.coef_high, size=(spec.d, spec.m))

    zero_rows = rng.choice(spec.d, size=round_half_up(spec.zero_row_fraction * spec.d), replace=False)
    W[zero_rows] = 0.0
    surviving = np.setdiff1d(np.arange(spec.d), zero_rows)
    if surviving.size == 0:
        return W

    # one entry per surviving row is protected so the zero-row count stays exact
    protected = rng.integers(spec.m, size=surviving.size)
    mask = np.ones((surviving.size, spec.m), dtype=bool)
    mask[np.arange(surviving.size), protected] = False
    candidates = np.flatnonzero(mask)

    pool = surviving.size * spec.m
    quota = min(round_half_up(spec.within_row_zero_fraction * pool), pool - surviving.size)
    zeroed = rng.choice(candidates, size=quota, replace=False)
    rows, cols = np.unravel_index(zeroed, (surviving.size, spec.m))
    W[surviving[rows], cols] = 0.0
    return W


def generate_synthetic(spec: SyntheticSpec) -> SyntheticInstance:
    """
    X_i with i.i.d. N(0, 1) entries and normalised columns, sparse W_bar with entries
    uniform on [coef_low, coef_high] and y_i = X_i w_i + delta_i with N(0, sigma^2) noise.
    """
    rng = np.random.default_rng(spec.seed)
    column_length = 1.0 if spec.column_norm == 'unit' else math.sqrt(spec.n)

    designs = []
    for _ in range(spec.m):
        X = rng.standard_normal((spec.n, spec.d))
        designs.append(column_length * X / np.linalg.norm(X, axis=0))

    W = _sample_true_weights(spec, rng)
    noise = tuple(spec.sigma * rng.standard_normal(spec.n) for _ in range(spec.m))
    responses = tuple(X @ W[:, i] + delta for i, (X, delta) in enumerate(zip(designs, noise)))

    logger.debug(f'Synthetic instance m={spec.m} d={spec.d} n={spec.n} seed={spec.seed}: '
                 f'{np.count_nonzero(np.abs(W).sum(axis=1))} nonzero rows, {np.count_nonzero(W)} nonzero entries')
    return SyntheticInstance(data=TaskDataset(designs=tuple(designs), responses=responses),
                             true_weights=W,
                             noise=noise)


def _check_header(path: Path, header: List[str]):
    if len(header) < 3 or header[0] != 'task' or header[1] != 'y':
        raise DataParseError(path, 1, 'header must read task,y,x1,...,xd')
    expected = [f'x{j}' for j in range(1, len(header) - 1)]
    if header[2:] != expected:
        raise DataParseError(path, 1, f'feature columns must be named {",".join(expected)}')


def load_csv(path: Union[str, Path]) -> TaskDataset:
    """
    Read a long-format CSV with header ``task,y,x1,...,xd``, one sample per line.
    Tasks keep the order of their first appearance. Quoted cells and a UTF-8 byte
    order mark are accepted; blank lines are skipped.
    """
    path = Path(path)
    tasks = {}
    try:
        with path.open(encoding='utf-8-sig', newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise DataParseError(path, 1, 'file is empty')
            header = [cell.strip() for cell in header]
            _check_header(path, header)
            width = len(header)

            for cells in reader:
                line_number = reader.line_num
                if not any(cell.strip() for cell in cells):
                    continue
                cells = [cell.strip() for cell in cells]
                if len(cells) != width:
                    raise DataParseError(path, line_number, f'expected {width} columns, got {len(cells)}')
                if not cells[0]:
                    raise DataParseError(path, line_number, 'missing task label')
                try:
                    values = np.array([float(cell) for cell in cells[1:]])
                except ValueError as e:
                    raise DataParseError(path, line_number, f'non-numeric cell ({e})') from e
                if not np.all(np.isfinite(values)):
                    raise DataParseError(path, line_number, 'non-finite value')
                tasks.setdefault(cells[0], []).append(values)
    except OSError as e:
        raise DataParseError(path, 0, str(e)) from e
    except csv.Error as e:
        raise DataParseError(path, reader.line_num, str(e)) from e

    if not tasks:
        raise DataParseError(path, 2, 'no data rows after the header')

    labels = list(tasks)
    blocks = [np.vstack(rows) for rows in tasks.values()]
    logger.info(f'Loaded {path}: {len(labels)} tasks, d={width - 2}, sizes {[len(b) for b in blocks]}')
    return TaskDataset(designs=tuple(block[:, 1:] for block in blocks),
                       responses=tuple(block[:, 0] for block in blocks),
                       labels=tuple(labels))


def split_train_test(data: TaskDataset, train_ratio: float, seed: int) -> Tuple[TaskDataset, TaskDataset]:
    """Per-task random split with max(1, round(train_ratio * n_i)) training samples."""
    if not 0.0 < train_ratio < 1.0:
        raise ContractViolation(f'train_ratio must lie in (0, 1), got {train_ratio}')
    rng = np.random.default_rng(seed)

    train, test = [], []
    for i, n in enumerate(data.sample_sizes):
        if n < 2:
            raise InvalidSplit(f'Task {data.labels[i]} has {n} sample; at least 2 are needed to split')
        k = min(max(1, round_half_up(train_ratio * n)), n - 1)
        permutation = rng.permutation(n)
        train.append(np.sort(permutation[:k]))
        test.append(np.sort(permutation[k:]))
    return data.subset(train), data.subset(test)


def kfold_indices(n: int, k: int, seed: int) -> List[NDArray[np.int64]]:
    """k disjoint sorted folds of range(n) whose sizes differ by at most one."""
    if k < 2:
        raise ContractViolation(f'At least 2 folds are needed, got {k}')
    if n < k:
        raise InvalidSplit(f'Cannot split {n} samples into {k} folds')
    permutation = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(permutation, k)]
