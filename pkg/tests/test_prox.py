import numpy as np
import pytest

from oracles import ternary_linf_prox
from stagewise_mtl.exceptions import ContractViolation, DimensionMismatch
from stagewise_mtl.prox import (DirtyPenalty, RowGroupL2Penalty, WeightedL1Penalty, dirty_prox, linf_prox_row,
                                linf_prox_rows, project_l1_ball, row_group_l2_prox, soft_threshold,
                                weighted_l1_prox)


@pytest.mark.parametrize('v, t, expected', [(3.0, 1.0, 2.0), (-0.5, 1.0, 0.0), (0.0, 5.0, 0.0), (-4.0, 1.5, -2.5)])
def test_soft_threshold(v, t, expected):
    assert soft_threshold(v, t) == expected


def test_soft_threshold_rejects_negative_threshold():
    with pytest.raises(ContractViolation):
        soft_threshold(1.0, -0.1)


def test_weighted_l1_prox():
    np.testing.assert_array_equal(weighted_l1_prox([[3.0], [-3.0]], [1.0, 0.0], 1.0), [[2.0], [-3.0]])
    np.testing.assert_array_equal(weighted_l1_prox([[1.0, -1.0]], [2.0], 0.5), [[0.0, 0.0]])
    V = np.arange(6.0).reshape(3, 2) - 2.5
    np.testing.assert_array_equal(weighted_l1_prox(V, np.zeros(3), 1.0), V)
    with pytest.raises(ContractViolation):
        weighted_l1_prox(V, [1.0, -1.0, 0.0], 1.0)
    with pytest.raises(DimensionMismatch):
        weighted_l1_prox(V, [1.0, 1.0], 1.0)


def test_row_group_l2_prox():
    np.testing.assert_allclose(row_group_l2_prox([[3.0, 4.0]], 2.5), [[1.5, 2.0]])
    np.testing.assert_allclose(row_group_l2_prox([[3.0, 4.0]], 5.0), [[0.0, 0.0]])
    V = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_array_equal(row_group_l2_prox(V, 0.0), V)
    np.testing.assert_allclose(row_group_l2_prox(V, 1.0), [[2.4, 3.2], [0.0, 0.0]])


@pytest.mark.parametrize('v, radius, expected', [
    ((2.0, 1.0), 1.0, (1.0, 0.0)),
    ((0.3, -0.2), 1.0, (0.3, -0.2)),
    ((1.0, 1.0), 1.0, (0.5, 0.5)),
    ((-3.0, 1.0, 0.5), 2.0, (-2.0, 0.0, 0.0)),
])
def test_project_l1_ball(v, radius, expected):
    np.testing.assert_allclose(project_l1_ball(v, radius), expected, atol=1e-15)


def test_project_l1_ball_lands_on_the_sphere(rng):
    for _ in range(20):
        v = 5 * rng.standard_normal(7)
        projected = project_l1_ball(v, 1.3)
        assert np.abs(projected).sum() == pytest.approx(1.3)
        assert np.all(projected * v >= 0)


def test_linf_prox_row():
    np.testing.assert_allclose(linf_prox_row([0.5, 0.2], 1.0), [0.0, 0.0])
    np.testing.assert_allclose(linf_prox_row([2.0, 1.0], 1.0), [1.0, 1.0])
    np.testing.assert_array_equal(linf_prox_row([2.0, -1.0], 0.0), [2.0, -1.0])


@pytest.mark.parametrize('dimension', [2, 3, 5])
def test_linf_prox_matches_ternary_search(dimension, rng):
    for _ in range(25):
        v = 3 * rng.standard_normal(dimension)
        threshold = rng.uniform(0.1, 4.0)
        np.testing.assert_allclose(linf_prox_row(v, threshold), ternary_linf_prox(v, threshold), atol=1e-8)


def test_linf_prox_rows_is_rowwise(rng):
    V = rng.standard_normal((4, 3))
    expected = np.vstack([linf_prox_row(row, 0.7) for row in V])
    np.testing.assert_allclose(linf_prox_rows(V, 0.7), expected)


def test_dirty_prox():
    S, B = dirty_prox([[3.0, 0.5]], [[2.0, 1.0]], 1.0, 1.0, 1.0)
    np.testing.assert_allclose(S, [[2.0, 0.0]])
    np.testing.assert_allclose(B, [[1.0, 1.0]])

    S0 = np.array([[1.0, -2.0], [0.3, 0.0]])
    B0 = np.array([[0.5, 4.0], [-1.0, 2.0]])
    S, B = dirty_prox(S0, B0, 1.0, 1.0, 1e-12)
    np.testing.assert_allclose(S, S0, atol=1e-9)
    np.testing.assert_allclose(B, B0, atol=1e-9)

    S, B = dirty_prox(np.zeros((2, 2)), np.zeros((2, 2)), 1.0, 1.0, 1.0)
    assert not S.any() and not B.any()


def test_penalty_objects_are_consistent_with_prox_functions(rng):
    V = rng.standard_normal((4, 3))
    weights = np.array([0.5, 0.0, 1.0, 2.0])
    np.testing.assert_array_equal(WeightedL1Penalty(weights).prox(V, 0.3), weighted_l1_prox(V, weights, 0.3))
    np.testing.assert_array_equal(RowGroupL2Penalty(0.4).prox(V, 0.5), row_group_l2_prox(V, 0.2))

    Z = rng.standard_normal((8, 3))
    S, B = dirty_prox(Z[:4], Z[4:], 0.2, 0.6, 0.5)
    np.testing.assert_allclose(DirtyPenalty(0.2, 0.6).prox(Z, 0.5), np.vstack([S, B]))
    assert DirtyPenalty(0.2, 0.6).value(Z) == pytest.approx(0.2 * np.abs(Z[:4]).sum()
                                                            + 0.6 * np.abs(Z[4:]).max(axis=1).sum())


def test_penalty_prox_validates_the_request():
    with pytest.raises(ContractViolation):
        WeightedL1Penalty([1.0]).prox(np.ones((1, 1)), 0.0)
    with pytest.raises(ContractViolation):
        WeightedL1Penalty([1.0]).prox(np.array([[np.nan]]), 1.0)


def _l1_ball_scale(X, radius=1.5):
    # pulls a batch of points into the ball along the ray to the origin
    norms = np.abs(X).reshape(X.shape[0], -1).sum(axis=1)
    return X / np.maximum(1.0, norms / radius).reshape((-1,) + (1,) * (X.ndim - 1))


ROW_WEIGHTS = np.array([0.5, 0.0, 1.0, 2.0])

# name -> (prox(v, t), batched penalty over the leading axis, input shape)
OPERATORS = {
    'soft_threshold': (soft_threshold, lambda X: np.abs(X).sum(axis=-1), (6,)),
    'weighted_l1': (lambda V, t: weighted_l1_prox(V, ROW_WEIGHTS, t),
                    lambda X: np.abs(X).sum(axis=-1) @ ROW_WEIGHTS, (4, 3)),
    'row_group_l2': (row_group_l2_prox, lambda X: np.linalg.norm(X, axis=-1).sum(axis=-1), (4, 3)),
    'linf_row': (linf_prox_row, lambda X: np.abs(X).max(axis=-1), (5,)),
    'linf_rows': (linf_prox_rows, lambda X: np.abs(X).max(axis=-1).sum(axis=-1), (4, 3)),
    'dirty': (lambda Z, t: np.vstack(dirty_prox(Z[:3], Z[3:], 0.7, 1.3, t)),
              lambda X: 0.7 * np.abs(X[:, :3]).sum(axis=(1, 2)) + 1.3 * np.abs(X[:, 3:]).max(axis=2).sum(axis=1),
              (6, 2)),
}


@pytest.mark.parametrize('name', list(OPERATORS))
def test_prox_beats_every_perturbation(name, rng):
    prox, penalty, shape = OPERATORS[name]
    axes = tuple(range(1, len(shape) + 1))
    for _ in range(100):
        v = 3 * rng.standard_normal(shape)
        t = rng.uniform(0.05, 3.0)
        x = prox(v, t)
        best = 0.5 * np.sum((x - v) ** 2) + t * penalty(x[None])[0]

        scales = 10.0 ** rng.uniform(-4, 0, size=1000).reshape((-1,) + (1,) * len(shape))
        X = x + scales * rng.standard_normal((1000,) + shape)
        values = 0.5 * np.sum((X - v) ** 2, axis=axes) + t * penalty(X)
        assert best <= values.min() + 1e-12 * max(1.0, abs(best))


def test_projection_beats_every_feasible_point(rng):
    for _ in range(100):
        v = 3 * rng.standard_normal(6)
        x = project_l1_ball(v, 1.5)
        assert np.abs(x).sum() <= 1.5 * (1 + 1e-12)

        scales = 10.0 ** rng.uniform(-4, 0, size=(1000, 1))
        X = _l1_ball_scale(x + scales * rng.standard_normal((1000, 6)))
        assert np.sum((x - v) ** 2) <= np.sum((X - v) ** 2, axis=1).min() + 1e-12


@pytest.mark.parametrize('name', list(OPERATORS) + ['project_l1_ball'])
def test_prox_is_non_expansive(name, rng):
    if name == 'project_l1_ball':
        prox, shape = (lambda v, t: project_l1_ball(v, 1.5)), (6,)
    else:
        prox, _, shape = OPERATORS[name]
    for _ in range(200):
        u, v = 3 * rng.standard_normal((2,) + shape)
        t = rng.uniform(0.05, 3.0)
        assert np.linalg.norm(prox(u, t) - prox(v, t)) <= np.linalg.norm(u - v) * (1 + 1e-12)


def test_projection_leaves_feasible_points_alone(rng):
    for _ in range(50):
        v = _l1_ball_scale(3 * rng.standard_normal((1, 6)), radius=1.4)[0]
        np.testing.assert_array_equal(project_l1_ball(v, 1.5), v)
    boundary = np.array([0.5, -1.0, 0.0])
    np.testing.assert_array_equal(project_l1_ball(boundary, 1.5), boundary)
