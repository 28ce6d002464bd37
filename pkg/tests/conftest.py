import numpy as np
import pytest

from opvi.core import TargetModel


def central_diff(f, w, eps=1e-6):
    """Central finite-difference gradient of a scalar function."""
    w = np.asarray(w, dtype=np.float64)
    g = np.zeros_like(w)
    for i in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        g[i] = (f(wp) - f(wm)) / (2.0 * eps)
    return g


def rel_grad_err(analytic, fd):
    denom = max(float(np.linalg.norm(fd)), 1e-12)
    return float(np.linalg.norm(np.asarray(analytic) - fd)) / denom


class ZeroModel(TargetModel):
    """All-zero log densities and gradients; isolates the kernel terms."""

    def __init__(self, dim=1, n_data=4):
        self.dim = dim
        self.n_data = n_data

    def log_prior(self, w):
        return 0.0

    def grad_log_prior(self, w):
        return np.zeros(self.dim)

    def log_lik(self, w, k):
        return 0.0

    def grad_log_lik(self, w, k):
        return np.zeros(self.dim)


@pytest.fixture
def zero_model():
    return ZeroModel()
