from typing import Optional

from pytictoc import TicToc

from ..config.models import ExperimentConfig
from ..loggings import logger
from .core import Callback


class LoggingCallback(Callback):
    """Reports experiment boundaries and fit summaries through the package logger."""

    def __init__(self):
        self.timer = TicToc()

    def on_experiment_start(self, config: ExperimentConfig, **kwargs):
        self.timer.tic()
        logger.info(f'Starting experiment {config.name} ({config.kind.value}) with seeds {config.seeds}')

    def on_experiment_end(self, config: ExperimentConfig, exception: Optional[Exception], **kwargs):
        elapsed = self.timer.tocvalue()
        if exception is not None:
            logger.error(f'Experiment {config.name} crashed after {elapsed:.1f}s: {exception}')
        else:
            logger.info(f'Finished experiment {config.name} in {elapsed:.1f}s')

    def on_fit_end(self, fit, **kwargs):
        last = fit.stage_traces[-1]
        logger.debug(f'{fit.algorithm.value} fit done: {len(fit.stage_traces)} stage(s), '
                     f'objective {last.objective:.10g}, KKT residual {last.kkt_residual:.3g}')
