"""
Accelerated proximal gradient (FISTA) for composite objectives smooth(W) + penalty(W).

The momentum is reset whenever the composite objective would increase, which keeps
the accepted objective sequence monotone. Step sizes come from the caller's
Lipschitz estimate and are halved by a sufficient-decrease backtracking check.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from numpy.typing import NDArray

from .config.models import SolverConfig
from .exceptions import ContractViolation, NonFiniteObjective
from .loggings import logger

Array = NDArray[np.float64]
GradOracle = Callable[[Array], Array]
ValueOracle = Callable[[Array], float]
ProxOracle = Callable[[Array, float], Array]

# relative slack accepted by the sufficient-decrease test to absorb rounding
DECREASE_SLACK = 1e-12


@dataclass
class SolveResult:
    solution: Array
    iterations: int
    final_objective: float
    converged: bool
    objective_trace: List[float] = field(default_factory=list)
    step_size: float = 0.0


def _check_finite(value: float, iteration: int, step: float, point: Array):
    if not np.isfinite(value):
        raise NonFiniteObjective(iteration, step, value, float(np.max(np.abs(point), initial=0.0)))


def fista_solve(grad_oracle: GradOracle,
                smooth_value: ValueOracle,
                prox_oracle: ProxOracle,
                penalty_value: ValueOracle,
                init: Array,
                config: SolverConfig = SolverConfig(),
                lipschitz: Optional[float] = None) -> SolveResult:
    """
    Minimise smooth_value + penalty_value starting from *init*.

    :param grad_oracle: gradient of smooth_value
    :param prox_oracle: (V, t) -> argmin_x 1/2 ||x - V||^2 + t * penalty(x)
    :param lipschitz: Lipschitz constant of the gradient, gives the initial step 1/L
           when config.step_size is not set
    :return: SolveResult with the last accepted iterate
    """
    x = np.array(init, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ContractViolation('Initial point has non-finite entries')

    if config.step_size is not None:
        step = config.step_size
    elif lipschitz is not None and lipschitz > 0:
        step = 1.0 / lipschitz
    else:
        step = 1.0

    objective = smooth_value(x) + penalty_value(x)
    _check_finite(objective, 0, step, x)
    trace = [objective]

    y = x
    momentum = 1.0
    restarted = False
    converged = False
    iteration = 0

    while iteration < config.max_iterations:
        iteration += 1
        gradient = grad_oracle(y)
        smooth_y = smooth_value(y)
        if not np.all(np.isfinite(gradient)):
            raise NonFiniteObjective(iteration, step, smooth_y, float(np.max(np.abs(y), initial=0.0)))

        while True:
            candidate = prox_oracle(y - step * gradient, step)
            if not config.backtracking:
                break
            diff = candidate - y
            upper = smooth_y + np.vdot(gradient, diff) + np.vdot(diff, diff) / (2.0 * step)
            smooth_candidate = smooth_value(candidate)
            _check_finite(smooth_candidate, iteration, step, candidate)
            if smooth_candidate <= upper + DECREASE_SLACK * max(1.0, abs(upper)):
                break
            step *= config.backtracking_factor

        candidate_objective = smooth_value(candidate) + penalty_value(candidate)
        _check_finite(candidate_objective, iteration, step, candidate)

        if config.restart and candidate_objective > objective:
            if restarted:
                # a plain proximal step from x no longer decreases: x is stationary to precision
                converged = True
                break
            y = x
            momentum = 1.0
            restarted = True
            continue

        restarted = False
        next_momentum = (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2)) / 2.0
        y = candidate + ((momentum - 1.0) / next_momentum) * (candidate - x)
        change = np.linalg.norm(candidate - x) / max(1.0, np.linalg.norm(x))

        x = candidate
        momentum = next_momentum
        objective = candidate_objective
        trace.append(objective)

        if change < config.rel_tolerance:
            converged = True
            break

    logger.debug(f'FISTA finished after {iteration} iterations '
                 f'(objective {objective:.10g}, converged={converged}, step {step:.3g})')
    return SolveResult(solution=x, iterations=iteration, final_objective=objective, converged=converged,
                       objective_trace=trace, step_size=step)
