"""
Experiment runners behind the command line: parameter error against stage and against
lambda on synthetic data, cross-validated prediction error on CSV data, and the
error-bound diagnostic.

Every runner returns an ExperimentResult whose per-seed rows do not depend on how
the seeds were scheduled.
"""
import math
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
import ray
from pytictoc import TicToc

from .algorithms import fit_algorithm, multistage_fit
from .callbacks.core import Callback, CallbacksHandler
from .config.models import Algorithm, ExperimentConfig, ExperimentKind, MultiStageConfig, RayConfig
from .core import TaskDataset
from .data import generate_synthetic, load_csv, split_train_test
from .diagnostics import error_bound_report, residual_correlation, residual_correlation_bound, theta_lower_bound
from .exceptions import ConfigError, ContractViolation
from .loggings import logger
from .metrics import amse, lpq_norm, nmse
from .results import ExperimentResult, ResultRow, group_over_seeds, summarise
from .tuning import tune


def lambda_grid(alphas: Sequence[float], d: int, m: int, n: float) -> List[float]:
    """lambda = alpha * sqrt(ln(d m) / n) for every alpha."""
    scale = math.sqrt(math.log(d * m) / n)
    return [alpha * scale for alpha in alphas]


def _ms(timer: TicToc) -> float:
    return 1000.0 * timer.tocvalue()


def _theta_or_ratio(algorithm: Algorithm, lam: float, ratio: float, m: int) -> Optional[float]:
    if algorithm == Algorithm.MULTISTAGE:
        return ratio * m * lam
    if algorithm == Algorithm.DIRTY:
        return ratio
    return None


def _variants(algorithm: Algorithm, config: ExperimentConfig) -> List[float]:
    if algorithm == Algorithm.MULTISTAGE:
        return list(config.theta_ratios)
    if algorithm == Algorithm.DIRTY:
        return list(config.dirty_ratios)
    return [1.0]


def _padded(values: Sequence[float], length: int) -> List[float]:
    # stages skipped by the early stop keep the last value
    values = list(values)
    return values + [values[-1]] * (length - len(values))


def _require_synthetic(config: ExperimentConfig):
    if config.synthetic is None:
        raise ConfigError(f'Experiment {config.kind.value} needs a synthetic spec or a preset')


def _map_seeds(func: Callable, seeds: Sequence[int], parallel: bool, *args) -> List[List[ResultRow]]:
    if parallel and ray.is_initialized():
        remote = ray.remote(func)
        return ray.get([remote.remote(seed, *args) for seed in seeds])
    return [func(seed, *args) for seed in seeds]


def _stage_rows(seed: int, config: ExperimentConfig, callbacks: List[Callback]) -> List[ResultRow]:
    instance = generate_synthetic(config.synthetic_for_seed(seed))
    data = instance.data
    d, m = data.shape
    rows = []

    for lam, alpha in zip(lambda_grid(config.alphas, d, m, config.synthetic.n), config.alphas):
        for ratio in config.theta_ratios:
            timer = TicToc()
            timer.tic()
            fit = multistage_fit(data,
                                 MultiStageConfig(lam=lam, theta=ratio * m * lam, stages=config.stages,
                                                  inner=config.solver, stage_stop_tol=config.stage_stop_tol),
                                 ground_truth=instance.true_weights,
                                 callbacks=callbacks)
            wall_ms = _ms(timer)
            metrics = {'param_error_l21': _padded(fit.stage_errors, config.stages),
                       'objective': _padded(fit.objectives, config.stages)}
            for metric, values in metrics.items():
                rows.extend(ResultRow(experiment=config.kind.value, seed=seed, algorithm=Algorithm.MULTISTAGE.value,
                                      stage=stage, lam=lam, theta_or_ratio=ratio * m * lam, metric=metric,
                                      value=value, wall_ms=wall_ms)
                            for stage, value in enumerate(values, start=1))
        logger.info(f'Seed {seed}, alpha {alpha}: {len(config.theta_ratios)} multi-stage fits done')
    return rows


def run_error_vs_stage(config: ExperimentConfig, callbacks: Optional[Iterable[Callback]] = None) -> ExperimentResult:
    """
    Multi-stage fits on one synthetic instance per seed for every (alpha, theta ratio),
    recording the l2,1 parameter error after each stage; summarised over seeds.
    """
    _require_synthetic(config)
    callbacks = [] if config.parallel else list(callbacks or [])
    rows = [row for seed_rows in _map_seeds(_stage_rows, config.seeds, config.parallel, config, callbacks)
            for row in seed_rows]
    return ExperimentResult(rows=rows, summary=summarise(rows))


def _lambda_rows(seed: int, config: ExperimentConfig, callbacks: List[Callback]) -> List[ResultRow]:
    instance = generate_synthetic(config.synthetic_for_seed(seed))
    data = instance.data
    d, m = data.shape
    rows = []

    for lam in lambda_grid(config.alphas, d, m, config.synthetic.n):
        for algorithm in config.algorithms:
            for ratio in _variants(algorithm, config):
                timer = TicToc()
                timer.tic()
                fit = fit_algorithm(algorithm, data, lam, ratio, stages=config.stages,
                                    stage_stop_tol=config.stage_stop_tol, solver=config.solver,
                                    ground_truth=instance.true_weights, callbacks=callbacks)
                rows.append(ResultRow(experiment=config.kind.value,
                                      seed=seed,
                                      algorithm=algorithm.value,
                                      stage=config.stages if algorithm == Algorithm.MULTISTAGE else 1,
                                      lam=lam,
                                      theta_or_ratio=_theta_or_ratio(algorithm, lam, ratio, m),
                                      metric='param_error_l21',
                                      value=fit.stage_errors[-1],
                                      wall_ms=_ms(timer)))
    logger.info(f'Seed {seed}: lambda sweep done ({len(rows)} fits)')
    return rows


def _min_over_grid(summary: List[ResultRow]) -> List[ResultRow]:
    best = {}
    for row in summary:
        if row.metric != 'param_error_l21:mean':
            continue
        if row.algorithm not in best or row.value < best[row.algorithm].value:
            best[row.algorithm] = row
    return [ResultRow(experiment=row.experiment, seed=None, algorithm=row.algorithm, stage=row.stage, lam=row.lam,
                      theta_or_ratio=row.theta_or_ratio, metric='param_error_l21:min_over_grid', value=row.value,
                      wall_ms=row.wall_ms)
            for row in best.values()]


def run_error_vs_lambda(config: ExperimentConfig, callbacks: Optional[Iterable[Callback]] = None) -> ExperimentResult:
    """
    Final l2,1 parameter error of every algorithm across the lambda grid: the multi-stage
    fit for each theta ratio, the dirty model for each lambda_s / lambda_b ratio, Lasso
    and L1,2 once per lambda. The summary adds each algorithm's smallest mean error.
    """
    _require_synthetic(config)
    callbacks = [] if config.parallel else list(callbacks or [])
    rows = [row for seed_rows in _map_seeds(_lambda_rows, config.seeds, config.parallel, config, callbacks)
            for row in seed_rows]
    summary = summarise(rows)
    return ExperimentResult(rows=rows, summary=summary + _min_over_grid(summary))


def _cv_rows(seed: int, config: ExperimentConfig, data: TaskDataset, train_ratio: float) -> List[ResultRow]:
    train, test = split_train_test(data, train_ratio, seed)
    d, m = train.shape
    lambda_scale = lambda_grid([1.0], d, m, float(np.mean(train.sample_sizes)))[0]
    experiment = f'{ExperimentKind.REAL_DATA_CV.value}@{train_ratio:g}'
    rows = []

    for algorithm in config.algorithms:
        timer = TicToc()
        timer.tic()
        selection = tune(algorithm, train, config.alphas, _variants(algorithm, config), lambda_scale,
                         folds=config.folds, seed=seed, stages=config.stages,
                         stage_stop_tol=config.stage_stop_tol, solver=config.solver)
        ratio = selection.ratio if selection.ratio is not None else 1.0
        fit = fit_algorithm(algorithm, train, selection.lam, ratio, stages=config.stages,
                            stage_stop_tol=config.stage_stop_tol, solver=config.solver)
        predictions = test.predict(fit.weights)
        wall_ms = _ms(timer)

        metrics = {'nmse': nmse(predictions, test.responses),
                   'amse': amse(predictions, test.responses),
                   'cv_nmse': selection.cv_nmse}
        rows.extend(ResultRow(experiment=experiment, seed=seed, algorithm=algorithm.value,
                              stage=len(fit.stage_traces), lam=selection.lam,
                              theta_or_ratio=_theta_or_ratio(algorithm, selection.lam, ratio, m),
                              metric=metric, value=value, wall_ms=wall_ms)
                    for metric, value in metrics.items())
        logger.info(f'Ratio {train_ratio:g}, seed {seed}, {algorithm.value}: test nMSE {metrics["nmse"]:.6g}, '
                    f'aMSE {metrics["amse"]:.6g}')
    return rows


def _summarise_per_algorithm(rows: List[ResultRow]) -> List[ResultRow]:
    # the selected lambda differs between seeds, so the summary is keyed by algorithm only
    stripped = [ResultRow(experiment=row.experiment, seed=row.seed, algorithm=row.algorithm, stage=None, lam=None,
                          theta_or_ratio=None, metric=row.metric, value=row.value, wall_ms=row.wall_ms)
                for row in rows]
    return summarise(stripped, statistics=('mean', 'std'))


def run_real_data_cv(config: ExperimentConfig, callbacks: Optional[Iterable[Callback]] = None) -> ExperimentResult:
    """
    For every training ratio and seed: split each task, tune every algorithm by k-fold
    cross validation on the training part (mean validation nMSE), refit on the whole
    training part and score nMSE and aMSE on the test part.
    """
    if config.csv_path is None:
        raise ConfigError('The real-data experiment needs csv_path')
    data = load_csv(config.csv_path)

    rows = []
    for train_ratio in config.train_ratios:
        for seed_rows in _map_seeds(_cv_rows, config.seeds, config.parallel, config, data, train_ratio):
            rows.extend(seed_rows)
    return ExperimentResult(rows=rows, summary=_summarise_per_algorithm(rows))


def _diagnose_rows(seed: int, config: ExperimentConfig, callbacks: List[Callback]) -> List[ResultRow]:
    spec = config.synthetic_for_seed(seed)
    instance = generate_synthetic(spec)
    data, W_bar = instance.data, instance.true_weights
    d, m = data.shape
    s = config.sparsity_level or max(int(np.count_nonzero(np.abs(W_bar).sum(axis=1))), 1)
    if spec.sigma == 0:
        raise ContractViolation('The error-bound diagnostic needs sigma > 0')

    # the smallest lambda and theta the bound admits for this instance
    admissible = error_bound_report(data, W_bar, spec.sigma, config.eta, s, lam=1.0, theta=1.0, stages=config.stages)
    lam = admissible.lambda_min
    theta = theta_lower_bound(lam, m, admissible.rho_minus_min_2r_s)
    if not math.isfinite(theta):
        raise ContractViolation(f'Seed {seed}: the sparse eigenvalue rho-(2r + s) vanishes, the bound is void')
    report = error_bound_report(data, W_bar, spec.sigma, config.eta, s, lam=lam, theta=theta, stages=config.stages)

    timer = TicToc()
    timer.tic()
    fit = multistage_fit(data,
                         MultiStageConfig(lam=lam, theta=theta, stages=config.stages, inner=config.solver,
                                          stage_stop_tol=config.stage_stop_tol),
                         ground_truth=W_bar,
                         callbacks=callbacks)
    wall_ms = _ms(timer)

    n = min(data.sample_sizes)
    correlation = lpq_norm(residual_correlation(data, W_bar), np.inf, np.inf)
    correlation_bound = residual_correlation_bound(spec.sigma, report.rho_plus_max_1, d, m, n, config.eta)
    errors = _padded(fit.stage_errors, config.stages)

    def row(metric: str, value: float, stage: Optional[int] = None) -> ResultRow:
        return ResultRow(experiment=ExperimentKind.DIAGNOSE.value, seed=seed, algorithm=Algorithm.MULTISTAGE.value,
                         stage=stage, lam=lam, theta_or_ratio=theta, metric=metric, value=value, wall_ms=wall_ms)

    rows = [row('lambda_min', report.lambda_min),
            row('theta_min', report.theta_min),
            row('u', report.u),
            row('conditions_met', float(report.conditions_met)),
            row('residual_correlation_max', correlation),
            row('residual_correlation_bound', correlation_bound),
            row('residual_correlation_within_bound', float(correlation <= correlation_bound))]
    rows.extend(row(f'condition:{name}', float(value)) for name, value in report.conditions.items())
    for stage, (error, bound) in enumerate(zip(errors, report.bound_per_stage), start=1):
        rows.extend([row('param_error_l21', error, stage),
                     row('bound', bound, stage),
                     row('within_bound', float(error <= bound), stage)])
    logger.info(f'Seed {seed}: conditions {report.conditions}, final error {errors[-1]:.6g}, '
                f'final bound {report.bound_per_stage[-1]:.6g}')
    return rows


def run_diagnose(config: ExperimentConfig, callbacks: Optional[Iterable[Callback]] = None) -> ExperimentResult:
    """
    Evaluate the stagewise error bound at the smallest admissible (lambda, theta) for one
    synthetic instance per seed, fit the multi-stage model there and compare the measured
    per-stage error with the bound. Also checks the noise correlation against its bound.
    """
    _require_synthetic(config)
    callbacks = [] if config.parallel else list(callbacks or [])
    rows = [row for seed_rows in _map_seeds(_diagnose_rows, config.seeds, config.parallel, config, callbacks)
            for row in seed_rows]

    # lambda and theta vary per seed; rates are aggregated by metric and stage
    summary = []
    for group in group_over_seeds(ResultRow(experiment=r.experiment, seed=r.seed, algorithm=r.algorithm,
                                            stage=r.stage, lam=None, theta_or_ratio=None, metric=r.metric,
                                            value=r.value, wall_ms=r.wall_ms) for r in rows).values():
        head = group[0]
        summary.append(ResultRow(experiment=head.experiment, seed=None, algorithm=head.algorithm, stage=head.stage,
                                 lam=None, theta_or_ratio=None, metric=f'{head.metric}:mean',
                                 value=float(np.mean([r.value for r in group])),
                                 wall_ms=float(np.mean([r.wall_ms for r in group]))))
    return ExperimentResult(rows=rows, summary=summary)


RUNNERS = {
    ExperimentKind.ERROR_VS_STAGE: run_error_vs_stage,
    ExperimentKind.ERROR_VS_LAMBDA: run_error_vs_lambda,
    ExperimentKind.REAL_DATA_CV: run_real_data_cv,
    ExperimentKind.DIAGNOSE: run_diagnose,
}


def _initialize_ray(ray_config: Optional[RayConfig]):
    params = ray_config.model_dump(exclude_none=True) if ray_config else {}
    return ray.init(**params, log_to_driver=True)


def run_experiment(config: ExperimentConfig, callbacks: Optional[Iterable[Callback]] = None) -> ExperimentResult:
    """
    Run the experiment named by ``config.kind``, firing experiment start and end
    callbacks around it. With ``config.parallel`` seeds run as ray tasks.
    """
    handler = CallbacksHandler(callbacks=list(callbacks or []))
    logger.info(f'Experiment config -> {config.model_dump(mode="json")}')

    started_ray = False
    if config.parallel and not ray.is_initialized():
        _initialize_ray(config.ray_config)
        started_ray = True

    timer = TicToc()
    timer.tic()
    handler.on_experiment_start(config=config)
    try:
        result = RUNNERS[config.kind](config, callbacks=handler.callbacks)
    except Exception as e:
        handler.on_experiment_end(config=config, exception=e)
        raise
    finally:
        if started_ray:
            ray.shutdown()

    handler.on_experiment_end(config=config, exception=None, result=result)
    logger.info(f'Finished {config.kind.value} in {timer.tocvalue():.1f}s: {len(result.rows)} rows, '
                f'{len(result.summary)} summary rows')
    return result
