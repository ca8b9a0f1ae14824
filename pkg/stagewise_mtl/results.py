"""
Result rows produced by the experiment harness and their CSV serialisation.
"""
import csv
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ResultsWriteError
from .loggings import logger

HEADER = ['experiment', 'seed', 'algorithm', 'stage', 'lambda', 'theta_or_ratio', 'metric', 'value', 'wall_ms']


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: Optional[int]
    algorithm: str
    stage: Optional[int]
    lam: Optional[float]
    theta_or_ratio: Optional[float]
    metric: str
    value: float
    wall_ms: float = 0.0

    def key(self) -> Tuple:
        return (self.experiment, self.algorithm, self.stage, self.lam, self.theta_or_ratio, self.metric)


@dataclass
class ExperimentResult:
    rows: List[ResultRow] = field(default_factory=list)
    summary: List[ResultRow] = field(default_factory=list)

    def values(self, **filters) -> List[float]:
        """Values of the per-seed rows whose fields match *filters*, in seed order."""
        selected = [row for row in self.rows if all(getattr(row, k) == v for k, v in filters.items())]
        return [row.value for row in sorted(selected, key=lambda row: row.seed if row.seed is not None else -1)]

    def summary_value(self, **filters) -> float:
        selected = [row for row in self.summary if all(getattr(row, k) == v for k, v in filters.items())]
        if len(selected) != 1:
            raise KeyError(f'{len(selected)} summary rows match {filters}')
        return selected[0].value


def group_over_seeds(rows: Iterable[ResultRow]) -> Dict[Tuple, List[ResultRow]]:
    groups = defaultdict(list)
    for row in rows:
        groups[row.key()].append(row)
    return groups


STATISTICS: Dict[str, Callable[[np.ndarray], float]] = {
    'mean': np.mean,
    # population convention: a single seed gives 0
    'std': np.std,
    'median': np.median,
}


def summarise(rows: Iterable[ResultRow], statistics: Sequence[str] = ('mean', 'std', 'median')) -> List[ResultRow]:
    """One row per key and statistic, aggregated over seeds, with metric '<metric>:<statistic>'."""
    summary = []
    for group in group_over_seeds(rows).values():
        values = np.array([row.value for row in group])
        wall_ms = float(np.mean([row.wall_ms for row in group]))
        for statistic in statistics:
            summary.append(replace(group[0],
                                   seed=None,
                                   metric=f'{group[0].metric}:{statistic}',
                                   value=float(STATISTICS[statistic](values)),
                                   wall_ms=wall_ms))
    return summary


def _sort_key(row: ResultRow):
    def optional(value):
        return (0, 0) if value is None else (1, value)

    return (row.experiment, optional(row.seed), row.algorithm, optional(row.stage), optional(row.lam),
            optional(row.theta_or_ratio), row.metric)


def _format(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.17g')


def emit_results(rows: Iterable[ResultRow], path: Union[str, Path]) -> Path:
    """Write rows as CSV, sorted by every key column, floats with 17 significant digits."""
    path = Path(path)
    ordered = sorted(rows, key=_sort_key)
    try:
        if path.parent:
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(HEADER)
            for row in ordered:
                writer.writerow([row.experiment, _format(row.seed), row.algorithm, _format(row.stage),
                                 _format(row.lam), _format(row.theta_or_ratio), row.metric,
                                 _format(row.value), _format(row.wall_ms)])
    except OSError as e:
        raise ResultsWriteError(str(path), str(e)) from e

    logger.info(f'Wrote {len(ordered)} rows to {path}')
    return path


def summary_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f'{path.stem}.summary{path.suffix or ".csv"}')


def emit_experiment_result(result: ExperimentResult, path: Union[str, Path]) -> Tuple[Path, Path]:
    return emit_results(result.rows, path), emit_results(result.summary, summary_path(path))
