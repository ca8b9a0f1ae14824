import numpy as np
import pytest

from stagewise_mtl.core import (L1, L12, CappedL1L1, Dirty, TaskDataset, lipschitz_constant, loss_gradient,
                                loss_value, objective_value, penalty_value, regularizer_adapter)
from stagewise_mtl.exceptions import ContractViolation, DimensionMismatch, MissingDirtySplit


def single(X, y):
    return TaskDataset.from_tasks([(np.atleast_2d(X), np.atleast_1d(y))])


def test_loss_value_small_cases():
    assert loss_value(single([[1.0]], [1.0]), [[0.0]]) == pytest.approx(1.0)
    assert loss_value(single([[1.0]], [1.0]), [[1.0]]) == 0.0
    data = TaskDataset.from_tasks([(np.eye(2), np.ones(2)), (np.eye(2), np.ones(2))])
    assert loss_value(data, np.zeros((2, 2))) == pytest.approx(1.0)


def test_loss_gradient_scalar_case():
    np.testing.assert_allclose(loss_gradient(single([[1.0]], [1.0]), [[0.0]]), [[-2.0]])


def test_loss_gradient_vanishes_at_exact_fit(rng):
    X = rng.standard_normal((5, 3))
    w = rng.standard_normal(3)
    data = single(X, X @ w)
    np.testing.assert_allclose(loss_gradient(data, w[:, None]), 0.0, atol=1e-12)


@pytest.mark.parametrize('dataset', ['stacked', 'unequal'])
def test_loss_gradient_matches_finite_differences(dataset, rng, unequal_dataset):
    if dataset == 'stacked':
        data = TaskDataset.from_tasks([(rng.standard_normal((5, 3)), rng.standard_normal(5)) for _ in range(2)])
    else:
        data = unequal_dataset
    W = rng.standard_normal(data.shape)
    gradient = loss_gradient(data, W)

    h = 1e-6
    numeric = np.zeros_like(W)
    for index in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[index] = h
        numeric[index] = (loss_value(data, W + E) - loss_value(data, W - E)) / (2 * h)
    np.testing.assert_allclose(gradient, numeric, rtol=1e-6, atol=1e-8)


def test_objective_value_capped_and_group():
    data = single(np.eye(2), [0.5, 3.0])
    W = np.array([[0.5], [3.0]])
    assert objective_value(data, W, CappedL1L1(lam=2.0, theta=1.0)) == pytest.approx(3.0)

    data = TaskDataset.from_tasks([(np.eye(2), [3.0, 0.0]), (np.eye(2), [4.0, 0.0])])
    W = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert objective_value(data, W, L12(lam=1.0)) == pytest.approx(5.0)


def test_objective_value_at_zero_is_the_loss(unequal_dataset):
    zero = np.zeros(unequal_dataset.shape)
    expected = loss_value(unequal_dataset, zero)
    for reg in (L1(lam=0.3), L12(lam=0.3), CappedL1L1(lam=0.3, theta=1.0)):
        assert objective_value(unequal_dataset, zero, reg) == pytest.approx(expected)
    assert objective_value(unequal_dataset, zero, Dirty(lam_s=1.0, lam_b=1.0), split=(zero, zero)) == \
        pytest.approx(expected)


def test_dirty_penalty_needs_split():
    with pytest.raises(MissingDirtySplit):
        penalty_value(np.zeros((2, 2)), Dirty(lam_s=1.0, lam_b=1.0))


def test_dirty_penalty_on_split():
    S = np.array([[1.0, -2.0], [0.0, 0.0]])
    B = np.array([[0.5, -3.0], [1.0, 1.0]])
    value = penalty_value(S + B, Dirty(lam_s=2.0, lam_b=0.5), split=(S, B))
    assert value == pytest.approx(2.0 * 3.0 + 0.5 * (3.0 + 1.0))


def test_regularizer_specs_parse_by_kind():
    reg = regularizer_adapter.validate_python({'kind': 'capped_l1_l1', 'lam': 0.1, 'theta': 2.0})
    assert reg == CappedL1L1(lam=0.1, theta=2.0)
    with pytest.raises(ValueError):
        regularizer_adapter.validate_python({'kind': 'l1', 'lam': -1.0})


def test_lipschitz_constant_small_cases():
    assert lipschitz_constant(single(np.eye(2), [1.0, 1.0])) == pytest.approx(1.0)
    data = TaskDataset.from_tasks([(np.eye(2), np.ones(2)), (np.eye(2), np.ones(2))])
    assert lipschitz_constant(data) == pytest.approx(0.5)


def test_lipschitz_constant_matches_svd(rng):
    X = rng.standard_normal((10, 4))
    expected = 2.0 * np.linalg.svd(X, compute_uv=False)[0] ** 2 / 10
    assert lipschitz_constant(single(X, rng.standard_normal(10))) == pytest.approx(expected, rel=1e-5)


def test_dataset_rejects_zero_columns_and_bad_shapes(rng):
    X = rng.standard_normal((4, 3))
    X[:, 1] = 0.0
    with pytest.raises(ContractViolation):
        single(X, np.ones(4))
    with pytest.raises(DimensionMismatch):
        TaskDataset.from_tasks([(rng.standard_normal((4, 3)), np.ones(4)), (rng.standard_normal((4, 2)), np.ones(4))])
    with pytest.raises(DimensionMismatch):
        single(rng.standard_normal((4, 3)), np.ones(5))
    with pytest.raises(DimensionMismatch):
        loss_value(single(rng.standard_normal((4, 3)), np.ones(4)), np.zeros((2, 1)))


def test_dataset_arrays_are_read_only(unequal_dataset):
    with pytest.raises(ValueError):
        unequal_dataset.designs[0][0, 0] = 1.0


def test_predict_and_subset(unequal_dataset, rng):
    W = rng.standard_normal(unequal_dataset.shape)
    predictions = unequal_dataset.predict(W)
    subset = unequal_dataset.subset([[0, 2], [1], [3, 4]])
    assert subset.sample_sizes == (2, 1, 2)
    np.testing.assert_allclose(subset.predict(W)[0], predictions[0][[0, 2]])
    np.testing.assert_allclose(subset.responses[2], unequal_dataset.responses[2][[3, 4]])


def test_gradient_is_lipschitz_with_the_estimated_constant(unequal_dataset, rng):
    L = lipschitz_constant(unequal_dataset)
    for _ in range(50):
        W, V = 5 * rng.standard_normal((2,) + unequal_dataset.shape)
        gap = np.linalg.norm(loss_gradient(unequal_dataset, W) - loss_gradient(unequal_dataset, V))
        assert gap <= L * np.linalg.norm(W - V) * (1 + 1e-4)


def test_capped_objective_ignores_task_order(unequal_dataset, rng):
    reg = CappedL1L1(lam=0.2, theta=1.5)
    W = rng.standard_normal(unequal_dataset.shape)
    W[2] = 0.0
    order = [2, 0, 1]
    permuted = TaskDataset.from_tasks([(unequal_dataset.designs[i], unequal_dataset.responses[i]) for i in order])
    assert objective_value(permuted, W[:, order], reg) == pytest.approx(objective_value(unequal_dataset, W, reg),
                                                                         rel=1e-12)
