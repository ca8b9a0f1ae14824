import sys
from pathlib import Path
from typing import List, Optional

import click
import typer

from stagewise_mtl.callbacks import Callback, LoggingCallback
from stagewise_mtl.config import SUPPORTED_EXTENSIONS, parse_config
from stagewise_mtl.config.models import PRESETS, Algorithm, ExperimentConfig, ExperimentKind, Preset, Settings
from stagewise_mtl.exceptions import ConfigError, StagewiseError
from stagewise_mtl.experiments import (run_diagnose, run_error_vs_lambda, run_error_vs_stage, run_experiment,
                                       run_real_data_cv)
from stagewise_mtl.loggings import logger, setup_logging
from stagewise_mtl.results import emit_experiment_result
from stagewise_mtl.utils import get_description_from_function, parse_list

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

CLI_HELP = """
stagewise-mtl runs the multi-task feature learning experiments from a configuration
file, from command line flags, or from a file used as a template and overridden by flags.
""".replace('\n', ' ')

OVERRIDE_CONFIG = 'Overrides the config file field if specified.'

app = typer.Typer(help=CLI_HELP, add_completion=False, no_args_is_help=True)


def validate_config_file(value: Optional[Path]) -> Optional[Path]:
    if value is not None and value.suffix not in SUPPORTED_EXTENSIONS:
        raise typer.BadParameter(f'File should have one of the following extensions: {",".join(SUPPORTED_EXTENSIONS)}')
    return value


def list_option(cast):
    def callback(value: Optional[str]):
        try:
            return parse_list(value, cast)
        except ValueError as e:
            raise typer.BadParameter(str(e))
    return callback


ConfigFileOption = lambda: typer.Option(
    None,
    '--config',
    callback=validate_config_file,
    exists=True,
    file_okay=True,
    dir_okay=False,
    readable=True,
    resolve_path=True,
    help='YAML or JSON file with the experiment configuration.'
)

ListOption = lambda name, cast, help_text: typer.Option(
    None,
    name,
    callback=list_option(cast),
    metavar='LIST',
    help=f'{help_text} {OVERRIDE_CONFIG}'
)

PresetOption = lambda: typer.Option(None, '--preset', help=f'Synthetic data preset. {OVERRIDE_CONFIG}')
SeedsOption = lambda: ListOption('--seeds', int, 'Comma separated seeds.')
AlgorithmsOption = lambda: ListOption('--algorithms', Algorithm,
                                      f'Comma separated subset of {",".join(a.value for a in Algorithm)}.')
OutOption = lambda: typer.Option(None, '--out', help=f'Output CSV; the summary goes next to it. {OVERRIDE_CONFIG}')
StagesOption = lambda: typer.Option(None, '--stages', min=1,
                                    help=f'Number of multi-stage iterations. {OVERRIDE_CONFIG}')
ParallelOption = lambda: typer.Option(False, '--parallel', help='Run seeds as ray tasks.')
TrackOption = lambda: typer.Option(False, '--track', help='Log the run to mlflow.')
LogLevelOption = lambda: typer.Option('INFO', '--log-level', help='Console log level.')
NameOption = lambda: typer.Option(None, '--name', help=f'Experiment name used for logs and tracking. {OVERRIDE_CONFIG}')
AlphasOption = lambda: ListOption('--alphas', float, 'Comma separated alphas, lambda = alpha * sqrt(ln(dm) / n).')
ThetaRatiosOption = lambda: ListOption('--theta-ratios', float, 'Comma separated theta / (m lambda) values.')
DirtyRatiosOption = lambda: ListOption('--dirty-ratios', float, 'Comma separated lambda_s / lambda_b values.')
StageStopTolOption = lambda: typer.Option(None, '--stage-stop-tol', min=0.0,
                                          help=f'Stop once the capped objective changes by less. {OVERRIDE_CONFIG}')
MaxIterationsOption = lambda: typer.Option(None, '--max-iterations', min=1,
                                           help=f'Inner solver iteration cap. {OVERRIDE_CONFIG}')
RelToleranceOption = lambda: typer.Option(None, '--rel-tolerance', min=0.0,
                                          help=f'Inner solver relative change tolerance. {OVERRIDE_CONFIG}')
RayAddressOption = lambda: typer.Option(None, '--ray-address', help=f'Ray cluster address. {OVERRIDE_CONFIG}')
NumCpusOption = lambda: typer.Option(None, '--num-cpus', min=1, help=f'CPUs given to ray. {OVERRIDE_CONFIG}')


def _nested(**values) -> Optional[dict]:
    # flags of a nested config block; None when none of them was given
    return values if any(value is not None for value in values.values()) else None


def _execute(kind: ExperimentKind,
             config_file: Optional[Path],
             log_level: str,
             **overrides) -> int:
    preset = overrides.pop('preset', None)
    if preset is not None:
        overrides['preset'] = preset
        overrides['synthetic'] = PRESETS[preset]
    overrides['kind'] = kind
    overrides['parallel'] = overrides.get('parallel') or None
    overrides['track'] = overrides.get('track') or None

    config = parse_config(config_file, ExperimentConfig, overrides)
    settings = Settings()
    setup_logging(experiment_name=config.name, logs_path=settings.LOGS_PATH, level=log_level.upper())
    logger.info(f'======== Starting {kind.value} {config.name} =========')

    callbacks: List[Callback] = [LoggingCallback()]
    if config.track:
        from stagewise_mtl.tracking import MlflowCallback
        callbacks.append(MlflowCallback(settings))

    result = run_experiment(config, callbacks=callbacks)
    rows_path, summary_path = emit_experiment_result(result, config.output)
    typer.echo(f'{rows_path}\n{summary_path}')
    return EXIT_OK


@app.command('synth-stage', help=get_description_from_function(run_error_vs_stage))
def synth_stage(config_file: Optional[Path] = ConfigFileOption(),
                name: Optional[str] = NameOption(),
                preset: Optional[Preset] = PresetOption(),
                seeds: Optional[str] = SeedsOption(),
                out: Optional[Path] = OutOption(),
                alphas: Optional[str] = AlphasOption(),
                theta_ratios: Optional[str] = ThetaRatiosOption(),
                stages: Optional[int] = StagesOption(),
                stage_stop_tol: Optional[float] = StageStopTolOption(),
                max_iterations: Optional[int] = MaxIterationsOption(),
                rel_tolerance: Optional[float] = RelToleranceOption(),
                parallel: bool = ParallelOption(),
                ray_address: Optional[str] = RayAddressOption(),
                num_cpus: Optional[int] = NumCpusOption(),
                track: bool = TrackOption(),
                log_level: str = LogLevelOption()):
    _execute(ExperimentKind.ERROR_VS_STAGE, config_file, log_level, name=name, preset=preset, seeds=seeds,
             output=out, alphas=alphas, theta_ratios=theta_ratios, stages=stages, stage_stop_tol=stage_stop_tol,
             solver=_nested(max_iterations=max_iterations, rel_tolerance=rel_tolerance),
             parallel=parallel, ray_config=_nested(address=ray_address, num_cpus=num_cpus), track=track)


@app.command('synth-lambda', help=get_description_from_function(run_error_vs_lambda))
def synth_lambda(config_file: Optional[Path] = ConfigFileOption(),
                 name: Optional[str] = NameOption(),
                 preset: Optional[Preset] = PresetOption(),
                 seeds: Optional[str] = SeedsOption(),
                 out: Optional[Path] = OutOption(),
                 algorithms: Optional[str] = AlgorithmsOption(),
                 alphas: Optional[str] = AlphasOption(),
                 theta_ratios: Optional[str] = ThetaRatiosOption(),
                 dirty_ratios: Optional[str] = DirtyRatiosOption(),
                 stages: Optional[int] = StagesOption(),
                 stage_stop_tol: Optional[float] = StageStopTolOption(),
                 max_iterations: Optional[int] = MaxIterationsOption(),
                 rel_tolerance: Optional[float] = RelToleranceOption(),
                 parallel: bool = ParallelOption(),
                 ray_address: Optional[str] = RayAddressOption(),
                 num_cpus: Optional[int] = NumCpusOption(),
                 track: bool = TrackOption(),
                 log_level: str = LogLevelOption()):
    _execute(ExperimentKind.ERROR_VS_LAMBDA, config_file, log_level, name=name, preset=preset, seeds=seeds,
             output=out, algorithms=algorithms, alphas=alphas, theta_ratios=theta_ratios, dirty_ratios=dirty_ratios,
             stages=stages, stage_stop_tol=stage_stop_tol,
             solver=_nested(max_iterations=max_iterations, rel_tolerance=rel_tolerance),
             parallel=parallel, ray_config=_nested(address=ray_address, num_cpus=num_cpus), track=track)


@app.command('real-cv', help=get_description_from_function(run_real_data_cv))
def real_cv(config_file: Optional[Path] = ConfigFileOption(),
            name: Optional[str] = NameOption(),
            csv_path: Optional[Path] = typer.Option(None, '--csv', exists=True, dir_okay=False, readable=True,
                                                    help=f'Long-format CSV (task,y,x1,...,xd). {OVERRIDE_CONFIG}'),
            seeds: Optional[str] = SeedsOption(),
            out: Optional[Path] = OutOption(),
            algorithms: Optional[str] = AlgorithmsOption(),
            alphas: Optional[str] = AlphasOption(),
            theta_ratios: Optional[str] = ThetaRatiosOption(),
            dirty_ratios: Optional[str] = DirtyRatiosOption(),
            stages: Optional[int] = StagesOption(),
            stage_stop_tol: Optional[float] = StageStopTolOption(),
            max_iterations: Optional[int] = MaxIterationsOption(),
            rel_tolerance: Optional[float] = RelToleranceOption(),
            train_ratio: Optional[float] = typer.Option(None, '--train-ratio', min=0.0, max=1.0,
                                                        help=f'Single training ratio. {OVERRIDE_CONFIG}'),
            train_ratios: Optional[str] = ListOption('--train-ratios', float, 'Comma separated training ratios.'),
            folds: Optional[int] = typer.Option(None, '--folds', min=2,
                                                help=f'Cross-validation folds per task. {OVERRIDE_CONFIG}'),
            parallel: bool = ParallelOption(),
            ray_address: Optional[str] = RayAddressOption(),
            num_cpus: Optional[int] = NumCpusOption(),
            track: bool = TrackOption(),
            log_level: str = LogLevelOption()):
    if train_ratio is not None and train_ratios is not None:
        raise typer.BadParameter('use either --train-ratio or --train-ratios')
    _execute(ExperimentKind.REAL_DATA_CV, config_file, log_level, name=name, csv_path=csv_path, seeds=seeds,
             output=out, algorithms=algorithms, alphas=alphas, theta_ratios=theta_ratios, dirty_ratios=dirty_ratios,
             stages=stages, stage_stop_tol=stage_stop_tol,
             solver=_nested(max_iterations=max_iterations, rel_tolerance=rel_tolerance),
             train_ratios=[train_ratio] if train_ratio is not None else train_ratios, folds=folds,
             parallel=parallel, ray_config=_nested(address=ray_address, num_cpus=num_cpus), track=track)


@app.command('diagnose', help=get_description_from_function(run_diagnose))
def diagnose(config_file: Optional[Path] = ConfigFileOption(),
             name: Optional[str] = NameOption(),
             preset: Optional[Preset] = PresetOption(),
             seeds: Optional[str] = SeedsOption(),
             out: Optional[Path] = OutOption(),
             stages: Optional[int] = StagesOption(),
             stage_stop_tol: Optional[float] = StageStopTolOption(),
             max_iterations: Optional[int] = MaxIterationsOption(),
             rel_tolerance: Optional[float] = RelToleranceOption(),
             eta: Optional[float] = typer.Option(None, '--eta', help=f'Failure probability of the bound. '
                                                                    f'{OVERRIDE_CONFIG}'),
             sparsity_level: Optional[int] = typer.Option(None, '--sparsity-level', min=1,
                                                          help=f'Support size r used by the bound; the true row '
                                                               f'count when not given. {OVERRIDE_CONFIG}'),
             parallel: bool = ParallelOption(),
             ray_address: Optional[str] = RayAddressOption(),
             num_cpus: Optional[int] = NumCpusOption(),
             track: bool = TrackOption(),
             log_level: str = LogLevelOption()):
    _execute(ExperimentKind.DIAGNOSE, config_file, log_level, name=name, preset=preset, seeds=seeds, output=out,
             stages=stages, stage_stop_tol=stage_stop_tol,
             solver=_nested(max_iterations=max_iterations, rel_tolerance=rel_tolerance),
             eta=eta, sparsity_level=sparsity_level,
             parallel=parallel, ray_config=_nested(address=ray_address, num_cpus=num_cpus), track=track)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point. Returns 0 on success, 1 on usage or configuration errors and 2 on
    runtime or numerical errors.
    """
    try:
        code = app(args=argv, prog_name='stagewise-mtl', standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(str(e))
        typer.echo(f'Error: {e}', err=True)
        return EXIT_USAGE
    except StagewiseError as e:
        logger.error(f'{type(e).__name__}: {e}')
        typer.echo(f'Error: {e}', err=True)
        return EXIT_RUNTIME
    return code if isinstance(code, int) else EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
