import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svmhelpers import full_alpha, kkt_violation, qp_dual_objective
from tapid.classify import (
    DEFAULT_C_GRID,
    KKT_TOL,
    PRESETS,
    KernelSpec,
    calibrate_bias,
    calibration_thresholds,
    decision_value,
    default_rbf_gamma,
    dual_objective,
    error_rates,
    grid_search_c,
    sweep_threshold,
    train_svm,
)
from tapid.errors import InvalidInputError

TWO_POINTS = (np.array([[0.0, 0.0], [2.0, 2.0]]), np.array([-1, 1]))


def blobs(rng, n=20, dim=3, shift=1.5):
    x = np.vstack([rng.normal(size=(n // 2, dim)) + shift, rng.normal(size=(n - n // 2, dim)) - shift])
    y = np.array([1] * (n // 2) + [-1] * (n - n // 2))
    return x, y


def check_kkt(model, x, y):
    assert kkt_violation(model, x, y) <= KKT_TOL + 1e-9
    assert np.all(np.abs(model.dual_coefficients) <= model.c + 1e-12)
    assert abs(model.dual_coefficients.sum()) < 1e-6


def test_two_point_analytic_solution():
    x, y = TWO_POINTS
    model = train_svm(x, y, KernelSpec("linear"), c=1e6, standardize=False)
    check_kkt(model, x, y)
    w = model.dual_coefficients @ model.support_vectors
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-3)
    assert model.bias == pytest.approx(-1.0, abs=1e-3)
    assert decision_value(model, x[0]) == pytest.approx(-1, abs=1e-3)
    assert decision_value(model, x[1]) == pytest.approx(1, abs=1e-3)
    assert decision_value(model, np.array([1.0, 1.0])) == pytest.approx(0.0, abs=1e-3)


@pytest.mark.parametrize("kernel", [KernelSpec("linear"), KernelSpec("rbf", gamma=0.5)])
def test_duplicating_points_keeps_hard_margin_boundary(rng, kernel):
    x, y = blobs(rng, 12, shift=2.5)
    probe = rng.normal(size=(30, 3))
    a = train_svm(x, y, kernel, c=1e4, tol=1e-10)
    b = train_svm(np.vstack([x, x]), np.concatenate([y, y]), kernel, c=1e4, tol=1e-10)
    check_kkt(a, x, y)
    assert np.all(np.abs(a.dual_coefficients) < 1e4)
    np.testing.assert_allclose(a.decision_values(probe), b.decision_values(probe), atol=1e-6)


def test_duplicating_points_with_halved_c_keeps_soft_boundary(rng):
    # each copy carries its own slack, so the doubled set needs half the penalty
    x, y = blobs(rng, 12, shift=0.6)
    probe = rng.normal(size=(30, 3))
    a = train_svm(x, y, KernelSpec("linear"), c=1.0, tol=1e-10)
    b = train_svm(np.vstack([x, x]), np.concatenate([y, y]), KernelSpec("linear"), c=0.5, tol=1e-10)
    check_kkt(a, x, y)
    np.testing.assert_allclose(a.decision_values(probe), b.decision_values(probe), atol=1e-6)


def test_xor_rbf_separable():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1, 1, -1, -1])
    model = train_svm(x, y, KernelSpec("rbf", gamma=1.0), c=100.0, standardize=False)
    check_kkt(model, x, y)
    assert np.all(model.predict(x) == y)
    # the QP oracle agrees the optimum separates the XOR points
    K = KernelSpec("rbf", gamma=1.0).matrix(x, x)
    obj, alpha = qp_dual_objective(K, y, 100.0)
    assert dual_objective(model) == pytest.approx(obj, rel=1e-2)
    f = K @ (alpha * y)
    b = np.mean(y - f)
    assert np.all(np.sign(f + b) == y)


@pytest.mark.parametrize("case", range(12))
def test_dual_objective_matches_qp_oracle(case):
    rng = np.random.default_rng(case)
    n = int(rng.integers(4, 21))
    x, y = blobs(rng, n, dim=int(rng.integers(2, 5)), shift=rng.uniform(0.0, 1.5))
    kernel = KernelSpec("rbf", gamma=float(rng.uniform(0.1, 2))) if case % 2 else KernelSpec("linear")
    c = float(rng.choice([0.1, 1.0, 10.0]))
    model = train_svm(x, y, kernel, c, standardize=False)
    check_kkt(model, x, y)
    obj, _ = qp_dual_objective(kernel.matrix(x, x), y, c)
    assert dual_objective(model) == pytest.approx(obj, rel=1e-2)


def test_margin_support_vectors_sit_on_margin(rng):
    x, y = blobs(rng, 16, shift=0.8)
    model = train_svm(x, y, KernelSpec("linear"), c=1.0)
    alpha = full_alpha(model, len(y))
    free = (alpha > 1e-9) & (alpha < model.c - 1e-9)
    assert free.any()
    assert np.all(np.abs(y[free] * model.decision_values(x[free]) - 1) <= KKT_TOL)


def test_rbf_self_similarity_and_psd(rng):
    k = KernelSpec("rbf", gamma=0.7)
    pts = rng.normal(size=(15, 4))
    K = k.matrix(pts, pts)
    np.testing.assert_allclose(np.diag(K), 1.0)
    np.testing.assert_allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_standardized_prediction_invariant_to_feature_shift(rng):
    x, y = blobs(rng, 20)
    probe = rng.normal(size=(25, 3))
    for kernel in (KernelSpec("linear"), KernelSpec("rbf")):
        a = train_svm(x, y, kernel, 1.0)
        b = train_svm(x + 17.0, y, kernel, 1.0)
        check_kkt(a, x, y)
        np.testing.assert_array_equal(a.predict(probe), b.predict(probe + 17.0))


def test_ties_predict_positive():
    x, y = TWO_POINTS
    model = train_svm(x, y, KernelSpec("linear"), c=1e6, standardize=False, tol=1e-12)
    assert model.predict(np.array([[1.0, 1.0]]))[0] == 1


def test_train_svm_errors(rng):
    x, _ = blobs(rng, 6)
    with pytest.raises(InvalidInputError):
        train_svm(x, np.ones(6, int))
    with pytest.raises(InvalidInputError):
        train_svm(x, np.array([1, -1, 1, -1, 1, 2]))
    model = train_svm(x, np.array([1, -1, 1, -1, 1, -1]))
    with pytest.raises(InvalidInputError):
        decision_value(model, np.zeros(5))


def test_default_gamma():
    x = np.array([[0.0, 0.0], [0.0, 2.0]])
    # pooled entries 0,0,0,2 -> population variance 0.75; make a 0.5-variance matrix instead
    x = np.array([[1.0, -1.0], [1.0, -1.0]]) * np.sqrt(0.5)
    assert x.var() == pytest.approx(0.5)
    assert default_rbf_gamma(x) == pytest.approx(1.0)
    assert default_rbf_gamma(2 * x) == pytest.approx(0.25)
    z = np.random.default_rng(0).normal(size=(50, 256))
    z = (z - z.mean()) / z.std()
    assert default_rbf_gamma(z) == pytest.approx(1 / 256)
    with pytest.raises(InvalidInputError):
        default_rbf_gamma(np.ones((3, 3)))


def test_calibration_separable():
    scores = np.array([-3.0, -2.0, -1.5, 1.0, 2.0])
    y = np.array([-1, -1, -1, 1, 1])
    cal = sweep_threshold(scores, y)
    assert cal.far == cal.frr == 0 and cal.gap == 0 and cal.within_one_percent


def brute_force_gap(scores, y):
    """Best |FAR-FRR| over every distinct accept set of the form scores >= t."""
    best = np.inf
    for t in np.concatenate([np.unique(scores), [np.inf]]):
        far, frr = error_rates(scores, y, t)
        best = min(best, abs(far - frr))
    return best


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-500, 500), min_size=4, max_size=40), st.randoms())
def test_calibration_is_sweep_optimal(scores, rnd):
    scores = np.asarray(scores) / 100.0
    y = np.array([rnd.choice([-1, 1]) for _ in scores])
    y[0], y[1] = 1, -1
    cal = sweep_threshold(scores, y)
    assert cal.gap == pytest.approx(brute_force_gap(scores, y), abs=1e-12)
    shifted = sweep_threshold(scores + 3.0, y)
    assert (shifted.far, shifted.frr) == (cal.far, cal.frr)


def test_calibration_interleaved_scores():
    scores = np.arange(20, dtype=float)
    y = np.where(np.arange(20) % 2 == 0, -1, 1)
    cal = sweep_threshold(scores, y)
    assert cal.gap == pytest.approx(brute_force_gap(scores, y))


def test_calibrate_bias_moves_operating_point(rng):
    x, y = blobs(rng, 40, shift=0.3)
    model = train_svm(x, y, KernelSpec("linear"), c=1.0)
    check_kkt(model, x, y)
    calibrated, cal = calibrate_bias(model, x, y)
    far, frr = error_rates(calibrated.decision_values(x), y)
    assert (far, frr) == (cal.far, cal.frr)
    assert abs(far - frr) == pytest.approx(brute_force_gap(model.decision_values(x), y))
    with pytest.raises(InvalidInputError):
        calibrate_bias(model, x[y == 1], y[y == 1])


def test_thresholds_include_extremes():
    t = calibration_thresholds([1.0, 2.0, 2.0, 4.0])
    assert t[0] < 1.0 and t[-1] > 4.0
    np.testing.assert_allclose(t[1:-1], [1.5, 3.0])


def test_grid_defaults_and_ties(rng):
    assert DEFAULT_C_GRID == (0.1, 1.0, 10.0, 100.0)
    x, y = blobs(rng, 20, shift=5.0)
    best, scores = grid_search_c(x, y, KernelSpec("linear"))
    assert set(scores) == set(DEFAULT_C_GRID)
    assert all(s == 1.0 for s in scores.values())
    assert best == 0.1


def test_grid_separable_model_has_no_training_errors(rng):
    x, y = blobs(rng, 30, shift=2.5)
    best, scores = grid_search_c(x, y, KernelSpec("linear"), c_grid=(1.0, 10.0, 100.0))
    assert scores[10.0] == scores[100.0] == 1.0
    model = train_svm(x, y, KernelSpec("linear"), best)
    check_kkt(model, x, y)
    assert np.all(model.predict(x) == y)


def test_grid_errors(rng):
    x, y = blobs(rng, 6)
    with pytest.raises(InvalidInputError):
        grid_search_c(x, y, c_grid=())
    with pytest.raises(InvalidInputError):
        grid_search_c(x, y, folds=5)


def test_presets():
    assert PRESETS["cnn"] == (KernelSpec("linear"), 1.0)
    assert PRESETS["handcrafted"][0].kind == "rbf" and PRESETS["handcrafted"][1] == 100.0


def test_calibration_separates_adjacent_floats():
    scores = np.array([0.0, 0.0, 0.0, 5e-324])
    y = np.array([-1, -1, -1, 1])
    cal = sweep_threshold(scores, y)
    assert cal.far == cal.frr == 0.0
