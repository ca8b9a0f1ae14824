"""
Proximal operators. Each one solves argmin_x 1/2 ||x - v||^2 + t * penalty(x) exactly.

A threshold of zero is the identity everywhere, so zero entries of a weight vector
flow through the same code path as positive ones.
"""
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import ContractViolation, DimensionMismatch

Array = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class ProxRequest:
    point: Array
    step: float

    def __post_init__(self):
        point = np.asarray(self.point, dtype=np.float64)
        if not self.step > 0:
            raise ContractViolation(f'Prox step must be positive, got {self.step}')
        if not np.all(np.isfinite(point)):
            raise ContractViolation('Prox point has non-finite entries')
        object.__setattr__(self, 'point', point)


def _check_threshold(t, what: str = 'threshold'):
    if np.any(np.asarray(t) < 0):
        raise ContractViolation(f'{what} must be nonnegative')


def soft_threshold(v: Union[float, ArrayLike], t: Union[float, ArrayLike]) -> Union[float, Array]:
    """sign(v) * max(0, |v| - t), elementwise."""
    _check_threshold(t)
    result = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    return float(result) if np.ndim(result) == 0 else result


def weighted_l1_prox(V: ArrayLike, weights: ArrayLike, t: float) -> Array:
    """Entry (j, i) is soft thresholded at t * weights[j]."""
    V = np.asarray(V, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (V.shape[0],):
        raise DimensionMismatch('Per-feature weights', (V.shape[0],), weights.shape)
    _check_threshold(weights, 'per-feature weights')
    _check_threshold(t, 'step')
    return soft_threshold(V, t * weights[:, None])


def row_group_l2_prox(V: ArrayLike, threshold: float) -> Array:
    """Block soft thresholding of every row: max(0, 1 - threshold / ||v^j||) v^j."""
    V = np.asarray(V, dtype=np.float64)
    _check_threshold(threshold)
    if threshold == 0:
        return V.copy()
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    with np.errstate(divide='ignore', invalid='ignore'):
        scale = np.where(norms > threshold, 1.0 - threshold / norms, 0.0)
    return scale * V


def _project_rows_l1_ball(V: Array, radius: float) -> Array:
    """Project every row of V onto the l1 ball of the given radius (sort-then-threshold)."""
    A = np.abs(V)
    k = V.shape[1]
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1)
    ranks = np.arange(1, k + 1)
    # last index where the sorted magnitude stays above the running threshold
    above = U * ranks > css - radius
    rho = k - 1 - np.argmax(above[:, ::-1], axis=1)
    tau = (css[np.arange(V.shape[0]), rho] - radius) / (rho + 1.0)
    tau = np.where(A.sum(axis=1) <= radius, 0.0, tau)
    return np.sign(V) * np.maximum(A - tau[:, None], 0.0)


def project_l1_ball(v: ArrayLike, radius: float) -> Array:
    """Euclidean projection of a vector onto {x : ||x||_1 <= radius}."""
    v = np.asarray(v, dtype=np.float64)
    if not radius > 0:
        raise ContractViolation(f'l1 ball radius must be positive, got {radius}')
    if np.abs(v).sum() <= radius:
        return v.copy()
    return _project_rows_l1_ball(v.reshape(1, -1), radius).reshape(v.shape)


def linf_prox_row(v: ArrayLike, threshold: float) -> Array:
    """Prox of threshold * max_k |x_k| through the Moreau decomposition."""
    v = np.asarray(v, dtype=np.float64)
    _check_threshold(threshold)
    if threshold == 0:
        return v.copy()
    return v - project_l1_ball(v, threshold)


def linf_prox_rows(V: ArrayLike, threshold: float) -> Array:
    V = np.asarray(V, dtype=np.float64)
    _check_threshold(threshold)
    if threshold == 0:
        return V.copy()
    return V - _project_rows_l1_ball(V, threshold)


def dirty_prox(S: ArrayLike, B: ArrayLike, lam_s: float, lam_b: float, t: float) -> Tuple[Array, Array]:
    """
    Prox of lam_s * ||S||_1 + lam_b * sum_j max_i |b_ji|; the two blocks are handled
    independently because the penalty is separable in (S, B).
    """
    S = np.asarray(S, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if S.shape != B.shape:
        raise DimensionMismatch('Dirty split', S.shape, B.shape)
    if lam_s < 0 or lam_b < 0:
        raise ContractViolation('Dirty penalty parameters must be nonnegative')
    return soft_threshold(S, t * lam_s), linf_prox_rows(B, t * lam_b)


class Penalty(metaclass=ABCMeta):
    """Value and prox of a non-smooth term, in the form the FISTA solver consumes."""

    @abstractmethod
    def value(self, W: Array) -> float:
        pass

    @abstractmethod
    def _prox(self, V: Array, t: float) -> Array:
        pass

    def prox(self, V: Array, t: float) -> Array:
        request = ProxRequest(V, t)
        return self._prox(request.point, request.step)


class WeightedL1Penalty(Penalty):
    def __init__(self, weights: ArrayLike):
        self.weights = np.asarray(weights, dtype=np.float64)
        _check_threshold(self.weights, 'per-feature weights')

    def value(self, W: Array) -> float:
        return float(self.weights @ np.abs(W).sum(axis=1))

    def _prox(self, V: Array, t: float) -> Array:
        return weighted_l1_prox(V, self.weights, t)


class RowGroupL2Penalty(Penalty):
    def __init__(self, lam: float):
        _check_threshold(lam, 'lambda')
        self.lam = lam

    def value(self, W: Array) -> float:
        return float(self.lam * np.linalg.norm(W, axis=1).sum())

    def _prox(self, V: Array, t: float) -> Array:
        return row_group_l2_prox(V, t * self.lam)


class DirtyPenalty(Penalty):
    """Penalty on the stacked variable [S; B] of shape (2d, m)."""

    def __init__(self, lam_s: float, lam_b: float):
        self.lam_s = lam_s
        self.lam_b = lam_b

    @staticmethod
    def split(Z: Array) -> Tuple[Array, Array]:
        d = Z.shape[0] // 2
        return Z[:d], Z[d:]

    def value(self, Z: Array) -> float:
        S, B = self.split(Z)
        return float(self.lam_s * np.abs(S).sum() + self.lam_b * np.abs(B).max(axis=1).sum())

    def _prox(self, Z: Array, t: float) -> Array:
        S, B = dirty_prox(*self.split(Z), self.lam_s, self.lam_b, t)
        return np.vstack([S, B])
