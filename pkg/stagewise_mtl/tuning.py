"""
Cross-validated parameter selection as an optuna study over a fixed grid.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import optuna

from .algorithms import fit_algorithm
from .config.models import Algorithm, SolverConfig
from .core import TaskDataset
from .data import kfold_indices
from .exceptions import ContractViolation, StagewiseError
from .loggings import logger
from .metrics import nmse


@dataclass(frozen=True)
class Selection:
    alpha: float
    lam: float
    ratio: Optional[float]
    cv_nmse: float


def task_fold_seed(seed: int, task: int) -> int:
    return int(np.random.SeedSequence([seed, task]).generate_state(1)[0])


def task_folds(data: TaskDataset, folds: int, seed: int) -> List[List[np.ndarray]]:
    """folds[f][i] holds the validation indices of task i in fold f."""
    per_task = [kfold_indices(n, folds, task_fold_seed(seed, i)) for i, n in enumerate(data.sample_sizes)]
    return [[per_task[i][f] for i in range(data.task_count)] for f in range(folds)]


def cross_validated_nmse(algorithm: Algorithm,
                         data: TaskDataset,
                         lam: float,
                         ratio: float,
                         folds: List[List[np.ndarray]],
                         stages: int,
                         stage_stop_tol: float,
                         solver: SolverConfig) -> float:
    scores = []
    for validation in folds:
        training = [np.setdiff1d(np.arange(n), idx) for n, idx in zip(data.sample_sizes, validation)]
        train, held_out = data.subset(training), data.subset(validation)
        fit = fit_algorithm(algorithm, train, lam, ratio, stages=stages, stage_stop_tol=stage_stop_tol,
                            solver=solver)
        scores.append(nmse(held_out.predict(fit.weights), held_out.responses))
    return float(np.mean(scores))


def create_grid_study(search_space: Dict[str, Sequence[float]], name: Optional[str] = None) -> optuna.Study:
    optuna.logging.enable_propagation()
    optuna.logging.disable_default_handler()
    sampler = optuna.samplers.GridSampler({k: list(v) for k, v in search_space.items()}, seed=0)
    return optuna.create_study(study_name=name, sampler=sampler, direction='minimize')


def best_trial(study: optuna.Study) -> optuna.trial.FrozenTrial:
    """
    Lowest value among completed trials; ties go to the larger alpha (sparser model),
    then to the larger ratio, so the choice does not depend on the trial order.
    """
    completed = [t for t in study.trials
                 if t.state == optuna.trial.TrialState.COMPLETE and math.isfinite(t.value)]
    if not completed:
        raise ContractViolation(f'No grid point of study {study.study_name} could be evaluated')
    return min(completed, key=lambda t: (t.value, -t.params['alpha'], -t.params.get('ratio', 0.0)))


def tune(algorithm: Algorithm,
         data: TaskDataset,
         alphas: Sequence[float],
         ratios: Sequence[float],
         lambda_scale: float,
         folds: int,
         seed: int,
         stages: int = 10,
         stage_stop_tol: float = 1e-10,
         solver: SolverConfig = SolverConfig()) -> Selection:
    """
    Pick (alpha, ratio) by mean validation nMSE over *folds* per-task folds, with
    lambda = alpha * lambda_scale. The convex single-parameter baselines ignore *ratios*.
    """
    uses_ratio = algorithm in (Algorithm.MULTISTAGE, Algorithm.DIRTY)
    search_space = {'alpha': list(alphas)}
    if uses_ratio:
        search_space['ratio'] = list(ratios)
    partition = task_folds(data, folds, seed)

    def objective(trial: optuna.Trial) -> float:
        alpha = trial.suggest_categorical('alpha', search_space['alpha'])
        ratio = trial.suggest_categorical('ratio', search_space['ratio']) if uses_ratio else 1.0
        try:
            return cross_validated_nmse(algorithm, data, alpha * lambda_scale, ratio, partition,
                                        stages, stage_stop_tol, solver)
        except StagewiseError as e:
            logger.warning(f'{algorithm.value}: grid point alpha={alpha}, ratio={ratio} skipped ({e})')
            return math.inf

    study = create_grid_study(search_space, name=f'{algorithm.value}-cv-{seed}')
    n_trials = len(search_space['alpha']) * len(search_space.get('ratio', [None]))
    study.optimize(objective, n_trials=n_trials)

    best = best_trial(study)
    alpha = best.params['alpha']
    selection = Selection(alpha=alpha,
                          lam=alpha * lambda_scale,
                          ratio=best.params.get('ratio') if uses_ratio else None,
                          cv_nmse=best.value)
    logger.info(f'{algorithm.value}: selected alpha={selection.alpha}, ratio={selection.ratio} '
                f'(CV nMSE {selection.cv_nmse:.6g})')
    return selection
