import math

import numpy as np
import pytest

from stagewise_mtl.config.models import Algorithm
from stagewise_mtl.exceptions import ContractViolation
from stagewise_mtl.tuning import best_trial, create_grid_study, task_folds, tune


def test_task_folds_partition_every_task(unequal_dataset):
    folds = task_folds(unequal_dataset, 3, seed=0)
    assert len(folds) == 3
    for i, n in enumerate(unequal_dataset.sample_sizes):
        np.testing.assert_array_equal(np.sort(np.concatenate([fold[i] for fold in folds])), np.arange(n))

    again = task_folds(unequal_dataset, 3, seed=0)
    assert all(np.array_equal(a[i], b[i]) for a, b in zip(folds, again) for i in range(3))


def test_best_trial_breaks_ties_towards_sparser_models():
    study = create_grid_study({'alpha': [0.1, 0.2, 0.4], 'ratio': [1.0, 2.0]})
    scores = {(0.1, 1.0): 0.5, (0.1, 2.0): 0.3, (0.2, 1.0): 0.3, (0.2, 2.0): 0.3, (0.4, 1.0): math.inf,
              (0.4, 2.0): 0.9}
    study.optimize(lambda t: scores[(t.suggest_categorical('alpha', [0.1, 0.2, 0.4]),
                                     t.suggest_categorical('ratio', [1.0, 2.0]))], n_trials=6)
    assert best_trial(study).params == {'alpha': 0.2, 'ratio': 2.0}


def test_best_trial_needs_a_finite_score():
    study = create_grid_study({'alpha': [0.1]})
    study.optimize(lambda t: t.suggest_categorical('alpha', [0.1]) * math.inf, n_trials=1)
    with pytest.raises(ContractViolation):
        best_trial(study)


@pytest.mark.parametrize('algorithm', [Algorithm.LASSO, Algorithm.MULTISTAGE])
def test_tune(tiny_instance, algorithm):
    data = tiny_instance.data
    selection = tune(algorithm, data, alphas=[0.001, 0.01], ratios=[50.0, 2.0], lambda_scale=0.5, folds=3, seed=1,
                     stages=2)
    assert selection.alpha in (0.001, 0.01)
    assert selection.lam == pytest.approx(0.5 * selection.alpha)
    assert math.isfinite(selection.cv_nmse) and selection.cv_nmse >= 0
    if algorithm == Algorithm.LASSO:
        assert selection.ratio is None
    else:
        assert selection.ratio in (50.0, 2.0)
