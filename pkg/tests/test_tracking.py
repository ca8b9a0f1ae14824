import mlflow
import pytest

from stagewise_mtl.config.models import ExperimentConfig, ExperimentKind, Preset, Settings
from stagewise_mtl.exceptions import ConfigError
from stagewise_mtl.experiments import run_experiment
from stagewise_mtl.tracking import MlflowCallback, flatten_config, metric_key


def test_metric_key():
    assert metric_key('error-vs-stage', 'lasso', 'param_error_l21:mean', None, 'stage_1') == \
        'error-vs-stage/lasso/param_error_l21_mean/stage_1'


def test_flatten_config():
    params = flatten_config(ExperimentConfig(preset=Preset.TINY, seeds=[1]))
    assert params['seeds'] == '[1]'
    assert params['synthetic.m'] == '3'
    assert params['solver.max_iterations'] == '10000'


def test_mlflow_callback_logs_a_finished_run(tmp_path):
    settings = Settings(MLFLOW_TRACKING_URI=(tmp_path / 'mlruns').as_uri())
    config = ExperimentConfig(name='tracked', kind=ExperimentKind.ERROR_VS_STAGE, preset=Preset.TINY, seeds=[0],
                              alphas=[0.01], theta_ratios=[50.0], stages=2)
    run_experiment(config, callbacks=[MlflowCallback(settings)])

    runs = mlflow.search_runs(experiment_names=['tracked'], output_format='list')
    assert len(runs) == 1
    run = runs[0]
    assert run.info.status == 'FINISHED'
    assert run.data.params['kind'] == 'error-vs-stage'
    assert any(key.startswith('fit1/multistage/') for key in run.data.metrics)


def test_mlflow_callback_marks_failed_runs(tmp_path):
    settings = Settings(MLFLOW_TRACKING_URI=(tmp_path / 'mlruns').as_uri())
    config = ExperimentConfig(name='broken', kind=ExperimentKind.REAL_DATA_CV)
    with pytest.raises(ConfigError):
        run_experiment(config, callbacks=[MlflowCallback(settings)])

    runs = mlflow.search_runs(experiment_names=['broken'], output_format='list')
    assert runs[0].info.status == 'FAILED'
