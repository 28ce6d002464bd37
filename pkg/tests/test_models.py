import math

import numpy as np
import pytest

from opvi.core import ConfigError, RngStream
from opvi.models import (
    BnnModel,
    LinRegModel,
    MixtureModel,
    linreg_map_oracle,
    load_csv,
    mixture_generate,
    mixture_posterior_grid,
    synthetic_classification,
    synthetic_regression,
)
from opvi.models.linreg import generate_linreg
from tests.conftest import central_diff, rel_grad_err

# -- mixture ---------------------------------------------------------------


def test_mixture_generate_degenerate_mean():
    x = mixture_generate(20000, 0.0, 0.0, RngStream(0))
    assert abs(x.mean()) < 3.0 * 2.0 / math.sqrt(x.size)


def test_mixture_generate_mean():
    x = mixture_generate(100000, 0.0, 1.0, RngStream(1))
    # mixture mean = theta1 + theta2/2; var = sigma_x^2 + theta2^2/4
    sd = math.sqrt(4.0 + 0.25)
    assert abs(x.mean() - 0.5) < 3.0 * sd / math.sqrt(x.size)


def test_mixture_generate_deterministic():
    a = mixture_generate(100, 0.0, 1.0, RngStream(3))
    b = mixture_generate(100, 0.0, 1.0, RngStream(3))
    np.testing.assert_array_equal(a, b)


def _mixture(n=30, seed=0, theta=(0.0, 1.0)):
    return MixtureModel(data=mixture_generate(n, theta[0], theta[1], RngStream(seed)))


def test_mixture_grad_zero_at_centered_point():
    model = MixtureModel(data=np.array([0.0]))
    np.testing.assert_allclose(model.grad_log_lik(np.zeros(2), 0), [0.0, 0.0], atol=1e-14)


def test_mixture_grad_matches_finite_differences():
    model = _mixture(n=50)
    gen = np.random.default_rng(10)
    for _ in range(100):
        w = gen.standard_normal(2) * 2.0
        k = int(gen.integers(model.n_data))
        fd = central_diff(lambda v: model.log_lik(v, k), w)
        assert rel_grad_err(model.grad_log_lik(w, k), fd) < 1e-6


def test_mixture_theta2_component_zero_residual():
    model = MixtureModel(data=np.array([1.3]))
    w = np.array([0.3, 1.0])  # theta1 + theta2 = 1.3 = x
    assert model.grad_log_lik(w, 0)[1] == pytest.approx(0.0, abs=1e-14)


def test_mixture_prior_grad_matches_fd():
    model = _mixture()
    gen = np.random.default_rng(11)
    for _ in range(20):
        w = gen.standard_normal(2) * 3.0
        fd = central_diff(model.log_prior, w)
        assert rel_grad_err(model.grad_log_prior(w), fd) < 1e-6


def test_mixture_vectorized_paths_consistent():
    model = _mixture(n=25)
    gen = np.random.default_rng(12)
    positions = gen.standard_normal((6, 2))
    idx = np.array([1, 4, 7, 20])
    stacked = np.stack([
        sum(model.grad_log_lik(w, int(k)) for k in idx) for w in positions
    ])
    np.testing.assert_allclose(model.ensemble_batch_grad_sum(positions, idx), stacked, rtol=1e-10)
    lls = np.array([sum(model.log_lik(w, int(k)) for k in idx) for w in positions])
    np.testing.assert_allclose(model.ensemble_batch_loglik_sum(positions, idx), lls, rtol=1e-10)
    assert np.all(np.isfinite(model.ensemble_batch_loglik_sum(positions * 50, idx)))


# -- linear regression -------------------------------------------------------


def test_linreg_oracle_hand_example():
    model = LinRegModel(X=np.array([[1.0]]), y=np.array([2.0]), noise_var=1.0, prior_var=1.0)
    assert linreg_map_oracle(model, 1.0)[0] == pytest.approx(1.0, rel=1e-12)


def test_linreg_oracle_prior_dominates():
    model = generate_linreg(50, 3, RngStream(0))
    assert np.linalg.norm(linreg_map_oracle(model, 1e12)) < 1e-9


def test_linreg_oracle_stationarity():
    model = generate_linreg(200, 5, RngStream(1))
    for eta in (0.01, 0.5, 1.0):
        w = linreg_map_oracle(model, eta)
        grad = -(model.batch_grad_loglik_sum(w, np.arange(model.n_data))
                 + eta * model.grad_log_prior(w))
        assert np.linalg.norm(grad) < 1e-8


def test_linreg_grads_match_fd():
    model = generate_linreg(40, 4, RngStream(2))
    gen = np.random.default_rng(13)
    for _ in range(100):
        w = gen.standard_normal(4)
        k = int(gen.integers(model.n_data))
        fd = central_diff(lambda v: model.log_lik(v, k), w)
        assert rel_grad_err(model.grad_log_lik(w, k), fd) < 1e-6
    fd = central_diff(model.log_prior, np.ones(4))
    assert rel_grad_err(model.grad_log_prior(np.ones(4)), fd) < 1e-6


def test_linreg_full_cost_matches_direct_sum():
    model = generate_linreg(30, 3, RngStream(3))
    w = np.array([0.2, -1.0, 0.5])
    eta = 0.3
    direct = -sum(model.log_lik(w, k) for k in range(model.n_data)) - eta * model.log_prior(w)
    assert model.full_cost(w, eta) == pytest.approx(direct, rel=1e-10)


def test_linreg_sufficient_stats_gradient():
    model = generate_linreg(500, 5, RngStream(4))
    w = np.random.default_rng(14).standard_normal(5)
    direct = model.batch_grad_loglik_sum(w, np.arange(model.n_data)) / model.n_data
    np.testing.assert_allclose(model.mean_grad_loglik_full(w), direct, rtol=1e-10)


# -- BNN ---------------------------------------------------------------------


def _bnn_regression(n=20, hidden=3, n_in=5, seed=0):
    rng = RngStream(seed)
    x, y = synthetic_regression(n, rng)
    return BnnModel(X=x[:, :n_in], y=y, hidden=hidden, task="regression")


def _bnn_classification(n=20, hidden=3, seed=0):
    x, y = synthetic_classification(n, RngStream(seed), n_classes=2, n_features=5)
    return BnnModel(X=x, y=y, hidden=hidden, task="classification")


def test_bnn_forward_zero_weights():
    reg = _bnn_regression()
    assert reg.forward(np.zeros(reg.dim), reg.X[:4])[0, 0] == 0.0
    x, y = synthetic_classification(30, RngStream(5), n_classes=10, n_features=4)
    clf = BnnModel(X=x, y=y, hidden=7, task="classification")
    probs = clf.forward(np.zeros(clf.dim), x[:3])
    np.testing.assert_allclose(probs, 0.1, rtol=1e-12)


def test_bnn_forward_hand_computed():
    # 1-1-1 regression net: out = w2 * tanh(w1 x + b1) + b2
    model = BnnModel(X=np.array([[0.5]]), y=np.array([0.0]), hidden=1, task="regression")
    w = np.array([1.0, 0.0, 2.0, 3.0, 0.0])  # W1, b1, W2, b2, tau
    assert model.forward(w, [[0.5]])[0, 0] == pytest.approx(2.0 * math.tanh(0.5) + 3.0, rel=1e-12)


def test_bnn_gradients_match_fd_regression():
    model = _bnn_regression()
    gen = np.random.default_rng(20)
    for _ in range(100):
        w = gen.standard_normal(model.dim) * 0.5
        k = int(gen.integers(model.n_data))
        fd = central_diff(lambda v: model.log_lik(v, k), w, eps=1e-5)
        assert rel_grad_err(model.grad_log_lik(w, k), fd) < 1e-5


def test_bnn_gradients_match_fd_classification():
    model = _bnn_classification()
    gen = np.random.default_rng(21)
    for _ in range(100):
        w = gen.standard_normal(model.dim) * 0.5
        k = int(gen.integers(model.n_data))
        fd = central_diff(lambda v: model.log_lik(v, k), w, eps=1e-5)
        assert rel_grad_err(model.grad_log_lik(w, k), fd) < 1e-5


def test_bnn_prior_grad_matches_fd():
    for model in (_bnn_regression(), _bnn_classification()):
        gen = np.random.default_rng(22)
        for _ in range(20):
            w = gen.standard_normal(model.dim)
            fd = central_diff(model.log_prior, w, eps=1e-5)
            assert rel_grad_err(model.grad_log_prior(w), fd) < 1e-5


def test_bnn_zero_residual_weight_gradient():
    model = _bnn_regression()
    gen = np.random.default_rng(23)
    w = gen.standard_normal(model.dim) * 0.3
    # rewrite datum 2 so the prediction matches the target exactly
    model.y[2] = model.forward(w, model.X[2:3])[0, 0]
    grad = model.grad_log_lik(w, 2)
    np.testing.assert_allclose(grad[: model.n_weights], 0.0, atol=1e-12)
    assert grad[-1] == pytest.approx(0.5, abs=1e-12)  # tau still sees 0.5 - 0


def test_bnn_saturated_softmax_gradient_vanishes():
    model = _bnn_classification()
    w = np.zeros(model.dim)
    # bias the output layer hard toward the true class of datum 0
    label = int(model.y[0])
    b2 = model._slices[3]
    w[b2] = -200.0
    w[b2.start + label] = 200.0
    grad = model.grad_log_lik(w, 0)
    assert np.linalg.norm(grad) < 1e-8


def test_bnn_batch_sum_consistent():
    model = _bnn_regression()
    gen = np.random.default_rng(24)
    w = gen.standard_normal(model.dim) * 0.4
    idx = [0, 3, 9]
    total = sum(model.grad_log_lik(w, k) for k in idx)
    np.testing.assert_allclose(model.batch_grad_loglik_sum(w, idx), total, rtol=1e-10)


def test_bnn_shape_validation():
    with pytest.raises(ConfigError):
        BnnModel(X=np.zeros((5, 2)), y=np.array([0.1] * 5), hidden=2, task="classification")
    with pytest.raises(ConfigError):
        BnnModel(X=np.zeros((5, 2)), y=np.zeros(5), hidden=0, task="regression")
    model = _bnn_regression()
    with pytest.raises(ConfigError):
        model.forward(np.zeros(model.dim), np.zeros((2, 99)))


# -- posterior grid ----------------------------------------------------------


@pytest.fixture(scope="module")
def grid_setup():
    data = mixture_generate(1000, 0.0, 1.0, RngStream(6))
    model = MixtureModel(data=data)
    return model, mixture_posterior_grid(model, resolution=200)


def _polish_mode(model, w0, iters=400):
    """Backtracking gradient ascent on the exact log posterior."""
    idx = np.arange(model.n_data)
    f = lambda v: model.batch_loglik_sum(v, idx) + model.log_prior(v)
    w = np.asarray(w0, dtype=np.float64)
    fw, step = f(w), 1e-5
    for _ in range(iters):
        g = model.batch_grad_loglik_sum(w, idx) + model.grad_log_prior(w)
        cand = w + step * g
        fc = f(cand)
        if fc > fw:
            w, fw, step = cand, fc, step * 1.5
        else:
            step *= 0.5
            if step < 1e-14:
                break
    return w


def test_grid_argmax_near_mode(grid_setup):
    model, grid = grid_setup
    found = grid.argmax()
    # the true posterior mode, located independently of the grid; data were
    # generated at (0, 1) so both modes sit near (0, 1) and its mirror (1, -1)
    mode = _polish_mode(model, found)
    assert min(np.linalg.norm(mode - [0.0, 1.0]), np.linalg.norm(mode - [1.0, -1.0])) < 0.5
    cell = np.array(grid.cell)
    assert np.all(np.abs(found - mode) <= cell + 1e-12)


def test_grid_masses_normalized(grid_setup):
    model, grid = grid_setup
    assert grid.masses().sum() == pytest.approx(1.0, abs=1e-12)
    ref = grid.reference_sample(RngStream(7), 500)
    assert ref.shape == (500, 2)
    assert np.all(ref >= -3.0 - 0.1) and np.all(ref <= 3.0 + 0.1)


def test_grid_self_convergence(grid_setup):
    model, grid200 = grid_setup
    grid400 = mixture_posterior_grid(model, resolution=400)
    np.testing.assert_allclose(grid200.posterior_mean(), grid400.posterior_mean(), atol=1e-2)


def test_grid_quantile_levels_decreasing(grid_setup):
    _, grid = grid_setup
    levels = grid.density_quantile_levels([0.5, 0.9, 0.99])
    assert levels[0] > levels[1] > levels[2]


def test_grid_window_warning():
    model = MixtureModel(data=np.array([0.0]))
    with pytest.warns(UserWarning):
        mixture_posterior_grid(model, resolution=10, window=((50.0, 51.0), (50.0, 51.0)))


# -- datasets ----------------------------------------------------------------


def test_load_csv_with_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,target\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    x, y = load_csv(str(path))
    np.testing.assert_array_equal(x, [[1.0, 2.0], [4.0, 5.0]])
    np.testing.assert_array_equal(y, [3.0, 6.0])


def test_load_csv_headerless_and_labels(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.5,1.5,0\n0.1,0.2,1\n")
    x, y = load_csv(str(path), task="classification")
    assert y.dtype.kind == "i"
    np.testing.assert_array_equal(y, [0, 1])


def test_load_csv_rejects_bad_rows(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1.0,2.0\n1.0,oops\n")
    with pytest.raises(ConfigError):
        load_csv(str(path))
    path.write_text("1.0,2.5\n")
    with pytest.raises(ConfigError):
        load_csv(str(path), task="classification")  # non-integer label


def test_synthetic_regression_deterministic():
    x1, y1 = synthetic_regression(100, RngStream(8))
    x2, y2 = synthetic_regression(100, RngStream(8))
    np.testing.assert_array_equal(x1, x2)
    np.testing.assert_array_equal(y1, y2)
    assert x1.shape == (100, 8)
    assert abs(y1.mean()) < 1e-12 and y1.std() == pytest.approx(1.0, rel=1e-12)
