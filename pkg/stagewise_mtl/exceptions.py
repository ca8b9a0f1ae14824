from typing import Optional, Sequence


class StagewiseError(Exception):
    pass


class ContractViolation(StagewiseError, ValueError):
    pass


class DimensionMismatch(ContractViolation):
    def __init__(self, what: str, expected: Sequence[int], got: Sequence[int]):
        super().__init__(what, tuple(expected), tuple(got))
        self.what = what
        self.expected = tuple(expected)
        self.got = tuple(got)

    def __str__(self):
        return f'{self.what}: expected shape {self.expected} but got {self.got}'


class MissingDirtySplit(ContractViolation):
    def __str__(self):
        return 'The dirty penalty is defined on an explicit (S, B) split. Please, pass split=(S, B).'


class CombinatorialCapExceeded(ContractViolation):
    def __init__(self, supports: int, cap: int):
        super().__init__(supports, cap)
        self.supports = supports
        self.cap = cap

    def __str__(self):
        return (f'Enumerating {self.supports} supports exceeds the cap of {self.cap}. '
                'Raise EIGEN_SUPPORT_CAP or use a smaller sparsity level.')


class InvalidSplit(ContractViolation):
    pass


class DegenerateTargets(ContractViolation):
    pass


class NumericalError(StagewiseError, ArithmeticError):
    pass


class PowerIterationDidNotConverge(NumericalError):
    def __init__(self, task: int, iterations: int, estimate: float):
        super().__init__(task, iterations, estimate)
        self.task = task
        self.iterations = iterations
        self.estimate = estimate

    def __str__(self):
        return (f'Power iteration for task {self.task} did not converge after {self.iterations} '
                f'iterations (last estimate {self.estimate:.6g})')


class NonFiniteObjective(NumericalError):
    def __init__(self, iteration: int, step: float, objective: float, max_abs_entry: float):
        super().__init__(iteration, step, objective, max_abs_entry)
        self.iteration = iteration
        self.step = step
        self.objective = objective
        self.max_abs_entry = max_abs_entry

    def __str__(self):
        return (f'Non-finite objective {self.objective} at iteration {self.iteration} '
                f'(step {self.step:.3g}, max |entry| {self.max_abs_entry:.3g})')


class DataParseError(StagewiseError):
    def __init__(self, path: str, line: Optional[int], reason: str):
        super().__init__(path, line, reason)
        self.path = path
        self.line = line
        self.reason = reason

    def __str__(self):
        where = f'{self.path}, line {self.line}' if self.line else str(self.path)
        return f'{where}: {self.reason}'


class ConfigError(StagewiseError):
    pass


class ResultsWriteError(StagewiseError):
    def __init__(self, path: str, reason: str):
        super().__init__(path, reason)
        self.path = path
        self.reason = reason

    def __str__(self):
        return f'Could not write results to {self.path}: {self.reason}'
