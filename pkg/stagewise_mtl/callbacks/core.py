from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..config.models import Algorithm, ExperimentConfig


class Callback:
    """
    Base class for callbacks that want to react to fired events.

    To create a new type of callback, inherit from this class and implement one or
    more methods. Fits fire on_fit_start, on_stage_end once per stage (once in total
    for the convex baselines) and on_fit_end; the harness wraps every run in
    on_experiment_start and on_experiment_end.
    """

    def on_experiment_start(self, config: ExperimentConfig, **kwargs):
        """
        Executed once the experiment has started.
        :param config: the validated configuration of the run
        """
        pass

    def on_experiment_end(self, config: ExperimentConfig, exception: Optional[Exception], **kwargs):
        """
        Executed once the experiment has ended.
        :param exception: if not None, the experiment finished because of this error
        """
        pass

    def on_fit_start(self, algorithm: Algorithm, params: Dict[str, Any], **kwargs):
        pass

    def on_stage_end(self, trace, weights=None, **kwargs):
        """
        :param trace: the StageTrace of the stage that just finished
        :param weights: the weight matrix reached by that stage
        """
        pass

    def on_fit_end(self, fit, **kwargs):
        """
        :param fit: the FitResult returned to the caller
        """
        pass


@dataclass
class CallbacksHandler:
    callbacks: List[Callback] = field(default_factory=list)

    def on_experiment_start(self, *args, **kwargs):
        for callback in self.callbacks:
            callback.on_experiment_start(*args, **kwargs)

    def on_experiment_end(self, *args, **kwargs):
        for callback in self.callbacks:
            callback.on_experiment_end(*args, **kwargs)

    def on_fit_start(self, *args, **kwargs):
        for callback in self.callbacks:
            callback.on_fit_start(*args, **kwargs)

    def on_stage_end(self, *args, **kwargs):
        for callback in self.callbacks:
            callback.on_stage_end(*args, **kwargs)

    def on_fit_end(self, *args, **kwargs):
        for callback in self.callbacks:
            callback.on_fit_end(*args, **kwargs)
