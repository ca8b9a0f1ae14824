"""
Multi-stage capped-l1,l1 multi-task feature learning and the convex baselines.

Every stage of the multi-stage fit is a weighted Lasso whose per-feature weights are
lambda for rows with small l1 norm at the previous stage and 0 otherwise. The
convex stage objective majorizes the capped objective, so warm-started monotone
inner solves make the capped objective non-increasing across stages.
"""
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
import ray
from numpy.typing import ArrayLike

from .callbacks.core import Callback, CallbacksHandler
from .config.models import Algorithm, MultiStageConfig, SolverConfig
from .core import (L1, L12, CappedL1L1, Dirty, RegularizerSpec, RegWeights, TaskDataset, WeightMatrix,
                   lipschitz_constant, loss_gradient, loss_value, objective_value)
from .exceptions import ContractViolation, DimensionMismatch
from .fista import SolveResult, fista_solve
from .loggings import logger
from .metrics import param_error_l21
from .prox import DirtyPenalty, RowGroupL2Penalty, WeightedL1Penalty


@dataclass
class StageTrace:
    stage: int
    objective: float
    inner_iterations: int
    kkt_residual: float
    param_error_l21: Optional[float] = None
    converged: bool = True


@dataclass
class FitResult:
    algorithm: Algorithm
    weights: WeightMatrix
    stage_traces: List[StageTrace] = field(default_factory=list)
    reg_weights_history: List[RegWeights] = field(default_factory=list)
    split: Optional[Tuple[WeightMatrix, WeightMatrix]] = None

    @property
    def stage_errors(self) -> List[Optional[float]]:
        return [trace.param_error_l21 for trace in self.stage_traces]

    @property
    def objectives(self) -> List[float]:
        return [trace.objective for trace in self.stage_traces]


def reweight(W: ArrayLike, lam: float, theta: float) -> RegWeights:
    """lambda where the row l1 norm is strictly below theta, 0 elsewhere."""
    if not (lam > 0 and theta > 0):
        raise ContractViolation(f'lambda and theta must be positive, got {lam} and {theta}')
    row_norms = np.abs(np.asarray(W, dtype=np.float64)).sum(axis=1)
    return np.where(row_norms < theta, lam, 0.0)


def kkt_residual(data: TaskDataset, W: ArrayLike, weights: ArrayLike) -> float:
    """
    Largest violation of the weighted Lasso first-order conditions
    c_ji = lambda_j sign(w_ji) on the support and |c_ji| <= lambda_j off it,
    with c = -loss_gradient(W).
    """
    W = data.check_weights(W)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (data.dimension,):
        raise DimensionMismatch('Per-feature weights', (data.dimension,), weights.shape)

    correlation = -loss_gradient(data, W)
    lam = np.broadcast_to(weights[:, None], W.shape)
    active = W != 0
    violation = np.where(active,
                         np.abs(correlation - lam * np.sign(W)),
                         np.maximum(0.0, np.abs(correlation) - lam))
    return float(violation.max(initial=0.0))


def critical_point_residual(data: TaskDataset, W: ArrayLike, lam: float, theta: float) -> float:
    """First-order residual of the capped objective, using the indicator weights at W."""
    return kkt_residual(data, W, reweight(W, lam, theta))


def surrogate_objective(data: TaskDataset, W: ArrayLike, weights: ArrayLike) -> float:
    """The convex stage objective l(W) + sum_j lambda_j ||w^j||_1."""
    W = data.check_weights(W)
    return loss_value(data, W) + WeightedL1Penalty(weights).value(W)


def critical_lambda(data: TaskDataset, algorithm: Algorithm) -> Tuple[float, ...]:
    """
    Smallest penalty level(s) for which the zero matrix is optimal.

    Lasso and the multi-stage fit: max |g_ji|. L1,2: max_j ||g^j||_2.
    Dirty: (lambda_s, lambda_b) = (max |g_ji|, max_j ||g^j||_1), g the gradient at zero.
    """
    gradient = loss_gradient(data, np.zeros(data.shape))
    if algorithm in (Algorithm.LASSO, Algorithm.MULTISTAGE):
        return (float(np.abs(gradient).max()),)
    if algorithm == Algorithm.L12:
        return (float(np.linalg.norm(gradient, axis=1).max()),)
    return float(np.abs(gradient).max()), float(np.abs(gradient).sum(axis=1).max())


def _init_or_zeros(data: TaskDataset, init: Optional[ArrayLike]) -> WeightMatrix:
    shape = data.shape
    if init is None:
        return np.zeros(shape)
    init = np.asarray(init, dtype=np.float64)
    if init.shape != shape:
        raise DimensionMismatch('Initial point', shape, init.shape)
    return init


def _solve_weighted_lasso(data: TaskDataset,
                          weights: RegWeights,
                          init: WeightMatrix,
                          config: SolverConfig,
                          lipschitz: Optional[float] = None) -> SolveResult:
    penalty = WeightedL1Penalty(weights)
    lipschitz = lipschitz if lipschitz is not None else lipschitz_constant(data)
    return fista_solve(grad_oracle=lambda W: loss_gradient(data, W),
                       smooth_value=lambda W: loss_value(data, W),
                       prox_oracle=penalty.prox,
                       penalty_value=penalty.value,
                       init=init,
                       config=config,
                       lipschitz=lipschitz)


def _solve_task(X, y, m: int, weights: RegWeights, init_column, config: SolverConfig) -> SolveResult:
    # task i of the stage problem, with the 1/m factor of the joint loss kept so the
    # per-task solutions coincide with the joint one
    task = TaskDataset(designs=(X,), responses=(y,))
    scaled = WeightedL1Penalty(weights * m)
    result = fista_solve(grad_oracle=lambda w: loss_gradient(task, w),
                         smooth_value=lambda w: loss_value(task, w),
                         prox_oracle=scaled.prox,
                         penalty_value=scaled.value,
                         init=np.asarray(init_column).reshape(-1, 1),
                         config=config,
                         lipschitz=lipschitz_constant(task))
    return result


_solve_task_remote = ray.remote(_solve_task)


def _solve_weighted_lasso_per_task(data: TaskDataset,
                                   weights: RegWeights,
                                   init: WeightMatrix,
                                   config: SolverConfig) -> SolveResult:
    """
    Solve the m independent task problems of a weighted Lasso stage, through ray when
    it is initialised. Results do not depend on where each task ran.
    """
    m = data.task_count
    arguments = [(X, y, m, weights, init[:, i], config)
                 for i, (X, y) in enumerate(zip(data.designs, data.responses))]

    if ray.is_initialized():
        results = ray.get([_solve_task_remote.remote(*args) for args in arguments])
    else:
        results = [_solve_task(*args) for args in arguments]

    W = np.column_stack([result.solution[:, 0] for result in results])
    objective = surrogate_objective(data, W, weights)
    return SolveResult(solution=W,
                       iterations=max(result.iterations for result in results),
                       final_objective=objective,
                       converged=all(result.converged for result in results),
                       objective_trace=[objective])


def weighted_lasso_fit(data: TaskDataset,
                       weights: ArrayLike,
                       init: Optional[ArrayLike] = None,
                       config: SolverConfig = SolverConfig(),
                       parallel_tasks: bool = False) -> WeightMatrix:
    """Minimiser of l(W) + sum_j weights_j ||w^j||_1."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (data.dimension,):
        raise DimensionMismatch('Per-feature weights', (data.dimension,), weights.shape)
    init = _init_or_zeros(data, init)
    if parallel_tasks:
        return _solve_weighted_lasso_per_task(data, weights, init, config).solution
    return _solve_weighted_lasso(data, weights, init, config).solution


def multistage_fit(data: TaskDataset,
                   config: MultiStageConfig,
                   ground_truth: Optional[ArrayLike] = None,
                   init: Optional[ArrayLike] = None,
                   callbacks: Optional[Iterable[Callback]] = None) -> FitResult:
    """
    Multi-stage capped-l1,l1 fit.

    Stage 1 uses lambda on every feature (a plain Lasso); each later stage solves the
    weighted Lasso warm-started from the previous stage with weights from ``reweight``.
    Stops after ``config.stages`` stages or once the capped objective changes by less
    than ``config.stage_stop_tol``.

    :param ground_truth: if given, every StageTrace records the l2,1 parameter error
    :param init: starting point of the first inner solve (zero by default)
    """
    handler = CallbacksHandler(callbacks=list(callbacks or []))
    reg = CappedL1L1(lam=config.lam, theta=config.theta)
    truth = data.check_weights(ground_truth, 'Ground truth') if ground_truth is not None else None

    weights = np.full(data.dimension, config.lam)
    history = [weights]
    traces: List[StageTrace] = []
    W = _init_or_zeros(data, init)
    lipschitz = None if config.parallel_tasks else lipschitz_constant(data)
    previous_objective = None

    handler.on_fit_start(algorithm=Algorithm.MULTISTAGE, params=config.model_dump())

    for stage in range(1, config.stages + 1):
        if config.parallel_tasks:
            result = _solve_weighted_lasso_per_task(data, weights, W, config.inner)
        else:
            result = _solve_weighted_lasso(data, weights, W, config.inner, lipschitz)
        W = result.solution

        objective = objective_value(data, W, reg)
        trace = StageTrace(stage=stage,
                           objective=objective,
                           inner_iterations=result.iterations,
                           kkt_residual=kkt_residual(data, W, weights),
                           param_error_l21=param_error_l21(W, truth) if truth is not None else None,
                           converged=result.converged)
        traces.append(trace)
        logger.info(f'Stage {stage}: objective {objective:.10g}, {result.iterations} inner iterations, '
                    f'{int(np.count_nonzero(weights == 0))} unpenalised features'
                    + (f', l2,1 error {trace.param_error_l21:.6g}' if truth is not None else ''))
        handler.on_stage_end(trace=trace, weights=W)

        weights = reweight(W, config.lam, config.theta)
        history.append(weights)

        if previous_objective is not None and abs(previous_objective - objective) < config.stage_stop_tol:
            break
        previous_objective = objective

    fit = FitResult(algorithm=Algorithm.MULTISTAGE, weights=W, stage_traces=traces, reg_weights_history=history)
    handler.on_fit_end(fit=fit)
    return fit


def _single_stage_fit(algorithm: Algorithm,
                      data: TaskDataset,
                      result: SolveResult,
                      W: WeightMatrix,
                      objective: float,
                      kkt: float,
                      ground_truth: Optional[ArrayLike],
                      weights: Optional[RegWeights] = None,
                      split: Optional[Tuple[WeightMatrix, WeightMatrix]] = None) -> FitResult:
    truth = data.check_weights(ground_truth, 'Ground truth') if ground_truth is not None else None
    trace = StageTrace(stage=1,
                       objective=objective,
                       inner_iterations=result.iterations,
                       kkt_residual=kkt,
                       param_error_l21=param_error_l21(W, truth) if truth is not None else None,
                       converged=result.converged)
    history = [weights] if weights is not None else []
    return FitResult(algorithm=algorithm, weights=W, stage_traces=[trace], reg_weights_history=history, split=split)


def lasso_fit(data: TaskDataset,
              lam: float,
              config: SolverConfig = SolverConfig(),
              ground_truth: Optional[ArrayLike] = None,
              init: Optional[ArrayLike] = None) -> FitResult:
    """l1 regularised multi-task fit, the weighted Lasso with every weight equal to lambda."""
    if not lam > 0:
        raise ContractViolation(f'lambda must be positive, got {lam}')
    weights = np.full(data.dimension, lam)
    result = _solve_weighted_lasso(data, weights, _init_or_zeros(data, init), config)
    W = result.solution
    return _single_stage_fit(Algorithm.LASSO, data, result, W,
                             objective=objective_value(data, W, L1(lam=lam)),
                             kkt=kkt_residual(data, W, weights),
                             ground_truth=ground_truth,
                             weights=weights)


def _group_kkt_residual(data: TaskDataset, W: WeightMatrix, lam: float) -> float:
    correlation = -loss_gradient(data, W)
    norms = np.linalg.norm(W, axis=1)
    active = norms > 0
    violation = np.zeros(data.dimension)
    with np.errstate(divide='ignore', invalid='ignore'):
        directions = W / norms[:, None]
    violation[active] = np.linalg.norm(correlation[active] - lam * directions[active], axis=1)
    violation[~active] = np.maximum(0.0, np.linalg.norm(correlation[~active], axis=1) - lam)
    return float(violation.max(initial=0.0))


def dirty_kkt_residual(data: TaskDataset, S: ArrayLike, B: ArrayLike, lam_s: float, lam_b: float) -> float:
    """
    First-order residual of the dirty model at (S, B).

    The S block follows the Lasso conditions with lam_s. For a zero row of B the
    correlation row needs ||c^j||_1 <= lam_b; otherwise c^j must vanish off the
    entries attaining max_i |b_ji|, agree in sign with b on them and sum to lam_b.
    """
    S = data.check_weights(S, 'S block')
    B = data.check_weights(B, 'B block')
    correlation = -loss_gradient(data, S + B)
    residual = float(np.where(S != 0,
                              np.abs(correlation - lam_s * np.sign(S)),
                              np.maximum(0.0, np.abs(correlation) - lam_s)).max(initial=0.0))

    for b, c in zip(B, correlation):
        peak = np.abs(b).max()
        if peak == 0:
            residual = max(residual, float(np.abs(c).sum() - lam_b))
            continue
        at_peak = np.abs(b) >= peak * (1.0 - 1e-12)
        aligned = c[at_peak] * np.sign(b[at_peak])
        residual = max(residual,
                       float(np.abs(c[~at_peak]).max(initial=0.0)),
                       float(np.maximum(0.0, -aligned).max(initial=0.0)),
                       float(abs(aligned.sum() - lam_b)))
    return max(residual, 0.0)


def l12_fit(data: TaskDataset,
            lam: float,
            config: SolverConfig = SolverConfig(),
            ground_truth: Optional[ArrayLike] = None) -> FitResult:
    """Row-wise group Lasso, lambda * sum_j ||w^j||_2."""
    if not lam > 0:
        raise ContractViolation(f'lambda must be positive, got {lam}')
    penalty = RowGroupL2Penalty(lam)
    result = fista_solve(grad_oracle=lambda W: loss_gradient(data, W),
                         smooth_value=lambda W: loss_value(data, W),
                         prox_oracle=penalty.prox,
                         penalty_value=penalty.value,
                         init=np.zeros(data.shape),
                         config=config,
                         lipschitz=lipschitz_constant(data))
    W = result.solution
    return _single_stage_fit(Algorithm.L12, data, result, W,
                             objective=objective_value(data, W, L12(lam=lam)),
                             kkt=_group_kkt_residual(data, W, lam),
                             ground_truth=ground_truth)


def dirty_fit(data: TaskDataset,
              lam_s: float,
              lam_b: float,
              config: SolverConfig = SolverConfig(),
              ground_truth: Optional[ArrayLike] = None) -> FitResult:
    """
    Dirty model W = S + B with lam_s ||S||_1 + lam_b sum_j max_i |b_ji|, solved jointly
    over the stacked variable [S; B] from S = B = 0.
    """
    if not (lam_s > 0 and lam_b > 0):
        raise ContractViolation(f'lambda_s and lambda_b must be positive, got {lam_s} and {lam_b}')
    d = data.dimension
    penalty = DirtyPenalty(lam_s, lam_b)

    def combine(Z):
        S, B = DirtyPenalty.split(Z)
        return S + B

    def gradient(Z):
        g = loss_gradient(data, combine(Z))
        return np.vstack([g, g])

    result = fista_solve(grad_oracle=gradient,
                         smooth_value=lambda Z: loss_value(data, combine(Z)),
                         prox_oracle=penalty.prox,
                         penalty_value=penalty.value,
                         init=np.zeros((2 * d, data.task_count)),
                         config=config,
                         # the stacked map Z -> S + B doubles the curvature
                         lipschitz=2.0 * lipschitz_constant(data))
    S, B = (part.copy() for part in DirtyPenalty.split(result.solution))
    W = S + B
    return _single_stage_fit(Algorithm.DIRTY, data, result, W,
                             objective=objective_value(data, W, Dirty(lam_s=lam_s, lam_b=lam_b), split=(S, B)),
                             kkt=dirty_kkt_residual(data, S, B, lam_s, lam_b),
                             ground_truth=ground_truth,
                             split=(S, B))


def fit_algorithm(algorithm: Algorithm,
                  data: TaskDataset,
                  lam: float,
                  ratio: float,
                  stages: int = 10,
                  stage_stop_tol: float = 1e-10,
                  solver: SolverConfig = SolverConfig(),
                  ground_truth: Optional[ArrayLike] = None,
                  callbacks: Optional[Iterable[Callback]] = None) -> FitResult:
    """
    Dispatch used by the experiment harness.

    *ratio* is theta / (m lambda) for the multi-stage fit and lambda_s / lambda_b for
    the dirty model (with lambda_b = lambda); the convex baselines ignore it.
    """
    if algorithm == Algorithm.MULTISTAGE:
        config = MultiStageConfig(lam=lam, theta=ratio * data.task_count * lam, stages=stages,
                                  inner=solver, stage_stop_tol=stage_stop_tol)
        return multistage_fit(data, config, ground_truth=ground_truth, callbacks=callbacks)

    handler = CallbacksHandler(callbacks=list(callbacks or []))
    handler.on_fit_start(algorithm=algorithm, params={'lam': lam, 'ratio': ratio})
    if algorithm == Algorithm.LASSO:
        fit = lasso_fit(data, lam, solver, ground_truth=ground_truth)
    elif algorithm == Algorithm.L12:
        fit = l12_fit(data, lam, solver, ground_truth=ground_truth)
    elif algorithm == Algorithm.DIRTY:
        fit = dirty_fit(data, ratio * lam, lam, solver, ground_truth=ground_truth)
    else:
        raise ContractViolation(f'Unknown algorithm {algorithm!r}')
    handler.on_stage_end(trace=fit.stage_traces[0], weights=fit.weights)
    handler.on_fit_end(fit=fit)
    return fit


def regularizer_for(algorithm: Algorithm, lam: float, ratio: float, m: int) -> RegularizerSpec:
    if algorithm == Algorithm.MULTISTAGE:
        return CappedL1L1(lam=lam, theta=ratio * m * lam)
    if algorithm == Algorithm.LASSO:
        return L1(lam=lam)
    if algorithm == Algorithm.L12:
        return L12(lam=lam)
    return Dirty(lam_s=ratio * lam, lam_b=lam)
