"""
Optional mlflow tracking of harness runs.
"""
import re
import sys
from typing import Dict, Optional

import mlflow
from cpuinfo import get_cpu_info
from mlflow.entities import RunStatus

from .callbacks.core import Callback
from .config.models import Algorithm, ExperimentConfig, Settings
from .loggings import logger

METRIC_KEY_PATTERN = re.compile(r'[^\w\-. /]')


def create_mlflow_experiment(experiment_name: str, settings: Settings):
    """
    Try to create an experiment if it doesn't exist
    """
    if settings.MLFLOW_TRACKING_URI:
        mlflow.set_tracking_uri(settings.MLFLOW_TRACKING_URI)
    try:
        exp = mlflow.create_experiment(experiment_name)
        logger.info(f'mlflow - Created new experiment id: {exp}')
    except Exception:
        logger.info('mlflow - Experiment already exists. Writing to same URI/artifact store')
    mlflow.set_experiment(experiment_name)


def log_experiment_results(params: dict, metrics: Optional[Dict[str, float]] = None,
                           artifacts: Optional[Dict[str, str]] = None):
    metrics = metrics or {}
    artifacts = artifacts or {}
    mlflow.log_params(params)
    mlflow.log_metrics(metrics)
    for path in artifacts.values():
        mlflow.log_artifact(path)
    logger.info(f'mlflow - Logged {len(params)} params, {len(metrics)} metrics and {len(artifacts)} artifacts')


def log_system_info():
    mlflow.set_tag('Python', sys.version)
    cpu_info = get_cpu_info().get('brand_raw')
    if cpu_info:
        mlflow.set_tag('CPU', cpu_info)


def metric_key(*parts) -> str:
    return METRIC_KEY_PATTERN.sub('_', '/'.join(str(part) for part in parts if part is not None))


def flatten_config(config: ExperimentConfig) -> Dict[str, str]:
    params = {}
    for key, value in config.model_dump(mode='json').items():
        if isinstance(value, dict):
            params.update({f'{key}.{k}': str(v) for k, v in value.items()})
        else:
            params[key] = str(value)
    return params


class MlflowCallback(Callback):
    """
    Opens one mlflow run per experiment, logs per-stage fit metrics as they arrive
    and the summary rows once the experiment finishes.
    """

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        self.fit_count = 0
        self.algorithm: Optional[Algorithm] = None

    def on_experiment_start(self, config: ExperimentConfig, **kwargs):
        create_mlflow_experiment(config.name, self.settings)
        mlflow.start_run(run_name=f'{config.name}-{config.kind.value}')
        log_system_info()
        mlflow.log_params(flatten_config(config))

    def on_fit_start(self, algorithm: Algorithm, params, **kwargs):
        self.fit_count += 1
        self.algorithm = algorithm

    def on_stage_end(self, trace, **kwargs):
        prefix = f'fit{self.fit_count}'
        metrics = {metric_key(prefix, self.algorithm.value, 'objective'): trace.objective,
                   metric_key(prefix, self.algorithm.value, 'kkt_residual'): trace.kkt_residual}
        if trace.param_error_l21 is not None:
            metrics[metric_key(prefix, self.algorithm.value, 'param_error_l21')] = trace.param_error_l21
        mlflow.log_metrics(metrics, step=trace.stage)

    def on_experiment_end(self, config: ExperimentConfig, exception: Optional[Exception], result=None,
                          artifacts: Optional[Dict[str, str]] = None, **kwargs):
        if result is not None:
            metrics = {}
            for row in result.summary:
                key = metric_key(row.experiment, row.algorithm, row.metric,
                                 None if row.lam is None else f'lam_{row.lam:.6g}',
                                 None if row.theta_or_ratio is None else f't_{row.theta_or_ratio:.6g}',
                                 None if row.stage is None else f'stage_{row.stage}')
                metrics[key] = row.value
            log_experiment_results({}, metrics, artifacts)

        if exception is not None:
            mlflow.set_tag('Status', 'Failed')
            mlflow.end_run(RunStatus.to_string(RunStatus.FAILED))
        else:
            mlflow.end_run(RunStatus.to_string(RunStatus.FINISHED))
