"""Pure-numpy implementations of the pairwise particle kernels.

Everything here reduces with numpy ufuncs (no BLAS dispatch), so results
are independent of the BLAS thread count. The compiled backend in
_fieldops.pyx mirrors these signatures.
"""
import numpy as np

BACKEND = "python"


def pairwise_sq_dists(x):
    """Squared Euclidean distances between all rows of x, shape (n, n)."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :]
    return np.add.reduce(diff * diff, axis=2)


def rbf_field(x, scores, h, gamma):
    """Kernel-smoothed vector field over an ensemble.

    out[i] = (1/n) * sum_j K(x_j, x_i) * (scores[j] + gamma * (-2/h) * (x_j - x_i))

    with K(a, b) = exp(-||a - b||^2 / h). The gamma term is the summed
    kernel gradient with respect to the source particle x_j.
    """
    x = np.asarray(x, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]          # diff[j, i] = x_j - x_i
    k = np.exp(-np.add.reduce(diff * diff, axis=2) / h)
    contrib = k[:, :, None] * (scores[:, None, :] + (-2.0 * gamma / h) * diff)
    return np.add.reduce(contrib, axis=0) / n


def energy_stats(a, b):
    """V-statistic distance means between two point sets.

    Returns (cross, within_a, within_b): the mean Euclidean distance over
    all ordered pairs, diagonal included for the within terms.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)

    def _mean_dist(u, v):
        diff = u[:, None, :] - v[None, :, :]
        d = np.sqrt(np.add.reduce(diff * diff, axis=2))
        return float(np.add.reduce(d, axis=None)) / (u.shape[0] * v.shape[0])

    return _mean_dist(a, b), _mean_dist(a, a), _mean_dist(b, b)
