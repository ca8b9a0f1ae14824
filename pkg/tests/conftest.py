import numpy as np
import pytest

from stagewise_mtl.config.models import PRESETS, Preset
from stagewise_mtl.core import TaskDataset
from stagewise_mtl.data import generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_instance():
    return generate_synthetic(PRESETS[Preset.TINY].model_copy(update={'seed': 0}))


@pytest.fixture
def unequal_dataset(rng):
    # three tasks with different sample sizes, so the stacked fast path is not taken
    designs = [rng.standard_normal((n, 6)) for n in (7, 9, 5)]
    W = rng.standard_normal((6, 3))
    responses = [X @ W[:, i] + 0.1 * rng.standard_normal(X.shape[0]) for i, X in enumerate(designs)]
    return TaskDataset.from_tasks(zip(designs, responses))


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / 'toy.csv'
    path.write_text('task,y,x1,x2\n'
                    'a,1.0,1.0,0.0\n'
                    'a,2.0,0.0,1.0\n'
                    'b,3.5,1.0,1.0\n'
                    'a,3.0,1.0,1.0\n'
                    'b,-1e-1,2.0,0.5\n'
                    'b,4.0,0.5,2.0\n', encoding='utf-8')
    return path
