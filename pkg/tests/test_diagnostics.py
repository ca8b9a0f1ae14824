import math
from itertools import combinations

import numpy as np
import pytest

from stagewise_mtl.core import TaskDataset
from stagewise_mtl.diagnostics import (error_bound_report, lambda_lower_bound, noise_level_term,
                                       residual_correlation, residual_correlation_bound, sparse_eigenvalues,
                                       stage_bounds, theta_lower_bound)
from stagewise_mtl.exceptions import CombinatorialCapExceeded, ContractViolation


def single_task(X, y=None):
    X = np.asarray(X, dtype=float)
    return TaskDataset.from_tasks([(X, np.zeros(X.shape[0]) if y is None else y)])


def scaled_identity_dataset(m=2):
    # 10 * [I_10; 0] with n = 100 gives X_S^T X_S / n = I for every support
    X = np.vstack([10.0 * np.eye(10), np.zeros((90, 10))])
    W_bar = np.zeros((10, m))
    W_bar[0] = 200.0
    return TaskDataset.from_tasks([(X, X @ W_bar[:, i]) for i in range(m)]), W_bar


@pytest.mark.parametrize('scale, expected', [(math.sqrt(2.0), 1.0), (1.0, 0.5)])
def test_sparse_eigenvalues_of_scaled_identities(scale, expected):
    result = sparse_eigenvalues(single_task(scale * np.eye(2)), 1)
    assert result.rho_plus_max == pytest.approx(expected)
    assert result.rho_minus_min == pytest.approx(expected)


@pytest.mark.parametrize('shape', [(6, 4), (8, 5)])
@pytest.mark.parametrize('k', [1, 2, 3])
def test_sparse_eigenvalues_match_per_support_decomposition(rng, shape, k):
    X = rng.standard_normal(shape)
    result = sparse_eigenvalues(single_task(X), k)

    n, d = shape
    extremes = [np.linalg.eigh(X[:, list(S)].T @ X[:, list(S)] / n)[0][[0, -1]] for S in combinations(range(d), k)]
    assert result.rho_minus_min == pytest.approx(min(e[0] for e in extremes), abs=1e-8)
    assert result.rho_plus_max == pytest.approx(max(e[1] for e in extremes), abs=1e-8)


def test_sparse_eigenvalues_are_monotone_in_k(rng):
    data = TaskDataset.from_tasks([(rng.standard_normal((8, 5)), np.zeros(8)) for _ in range(2)])
    results = [sparse_eigenvalues(data, k) for k in range(1, 6)]
    for smaller, larger in zip(results, results[1:]):
        assert np.all(larger.rho_plus_per_task >= smaller.rho_plus_per_task - 1e-12)
        assert np.all(larger.rho_minus_per_task <= smaller.rho_minus_per_task + 1e-12)


def test_sparse_eigenvalues_refuse_large_enumerations(rng):
    data = single_task(rng.standard_normal((5, 20)))
    with pytest.raises(CombinatorialCapExceeded) as e:
        sparse_eigenvalues(data, 10, max_supports=1000)
    assert e.value.supports == math.comb(20, 10)

    with pytest.raises(ContractViolation):
        sparse_eigenvalues(data, 0)
    with pytest.raises(ContractViolation):
        sparse_eigenvalues(data, 21)


def test_sparse_eigenvalue_cap_comes_from_settings(rng, monkeypatch):
    monkeypatch.setenv('STAGEWISE_MTL_EIGEN_SUPPORT_CAP', '5')
    with pytest.raises(CombinatorialCapExceeded):
        sparse_eigenvalues(single_task(rng.standard_normal((5, 6))), 2)


def test_residual_correlation():
    data = single_task([[1.0]], np.array([2.0]))
    np.testing.assert_allclose(residual_correlation(data, [[1.0]]), [[-1.0]])

    noiseless, W_bar = scaled_identity_dataset()
    np.testing.assert_allclose(residual_correlation(noiseless, W_bar), 0.0)


def test_lambda_lower_bound():
    expected = 12.0 * math.sqrt(2.0 * math.log(400.0) / 100.0)
    assert lambda_lower_bound(1.0, 1.0, d=10, m=2, n=100, eta=0.1) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(4.154, abs=5e-4)
    assert residual_correlation_bound(1.0, 1.0, 10, 2, 100, 0.1) == pytest.approx(expected / 12.0)


def test_theta_lower_bound():
    assert theta_lower_bound(0.5, 3, 2.0) == pytest.approx(11 * 3 * 0.5 / 2.0)
    assert theta_lower_bound(0.5, 3, 0.0) == math.inf


def test_stage_bounds_shrink_towards_the_noise_floor():
    bounds = stage_bounds(lam=0.1, sigma=0.01, m=3, n=50, r_bar=2, eta=0.05, rho_plus_max_r=1.2,
                          rho_minus=0.6, stages=12)
    assert all(a > b for a, b in zip(bounds, bounds[1:]))
    floor = 39.5 * 3 * 0.01 * math.sqrt(1.2 * (7.4 * 2 + 2.7 * math.log(2 / 0.05)) / 50) / 0.6
    shrinking = [b - floor for b in bounds]
    for a, b in zip(shrinking, shrinking[1:]):
        assert b / a == pytest.approx(math.sqrt(0.8))
    assert shrinking[0] == pytest.approx(math.sqrt(0.8) * 9.1 * 3 * 0.1 * math.sqrt(2) / 0.6)


def test_stage_bounds_without_noise_have_no_floor():
    bounds = stage_bounds(lam=0.1, sigma=0.0, m=2, n=10, r_bar=1, eta=0.1, rho_plus_max_r=1.0, rho_minus=1.0,
                          stages=3)
    assert bounds == pytest.approx([0.8 ** (stage / 2) * 9.1 * 2 * 0.1 for stage in (1, 2, 3)])
    assert noise_level_term(0.0, 1.0, 1, 2, 10, 0.1) == 0.0
    assert stage_bounds(0.1, 0.0, 2, 10, 1, 0.1, 1.0, 0.0, stages=2) == [math.inf, math.inf]


def test_error_bound_report():
    data, W_bar = scaled_identity_dataset()
    report = error_bound_report(data, W_bar, sigma=1.0, eta=0.1, s=1, lam=5.0, theta=110.0, stages=4)

    assert report.r_bar == 1
    assert report.lambda_min == pytest.approx(12.0 * math.sqrt(2.0 * math.log(400.0) / 100.0))
    assert report.theta_min == pytest.approx(110.0)
    assert report.rho_plus_max_1 == pytest.approx(1.0)
    assert report.rho_minus_min_2r_s == pytest.approx(1.0)
    assert report.conditions == {'row_magnitude': True, 'eigenvalue_ratio': True, 'lambda': True, 'theta': True}
    assert report.conditions_met
    assert report.u == pytest.approx(2.0 * (7.4 + 2.7 * math.log(20.0)) / 100.0)
    assert report.bound_per_stage == pytest.approx(
        stage_bounds(5.0, 1.0, 2, 100, 1, 0.1, 1.0, 1.0, stages=4))


def test_error_bound_report_flags_failed_conditions():
    data, W_bar = scaled_identity_dataset()
    report = error_bound_report(data, W_bar, sigma=1.0, eta=0.1, s=1, lam=1.0, theta=300.0, stages=2)
    assert not report.conditions['lambda']
    assert not report.conditions['row_magnitude']
    assert report.conditions['theta']
    assert not report.conditions_met


def test_error_bound_report_contract():
    data, W_bar = scaled_identity_dataset()
    W_bar[1] = 1.0
    with pytest.raises(ContractViolation):
        error_bound_report(data, W_bar, sigma=1.0, eta=0.1, s=1, lam=5.0, theta=1.0, stages=2)
    with pytest.raises(ContractViolation):
        error_bound_report(data, W_bar, sigma=1.0, eta=1.5, s=2, lam=5.0, theta=1.0, stages=2)
    with pytest.raises(ContractViolation):
        error_bound_report(data, W_bar, sigma=-1.0, eta=0.1, s=2, lam=5.0, theta=1.0, stages=2)
