"""Two-parameter Gaussian-mixture posterior with a dense grid oracle.

The model: (theta1, theta2) ~ N((0,0), diag(sigma1^2, sigma2^2)) and
x_i ~ 0.5 N(theta1, sigma_x^2) + 0.5 N(theta1 + theta2, sigma_x^2),
defaults sigma1^2 = 10, sigma2^2 = 1, sigma_x = 2. The likelihood is
invariant under (theta1, theta2) -> (theta1 + theta2, -theta2), so the
posterior is bimodal.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from opvi.core import ConfigError, RngStream, TargetModel

_LOG_HALF = math.log(0.5)


def mixture_generate(n: int, theta1: float, theta2: float, rng: RngStream,
                     sigma_x: float = 2.0) -> np.ndarray:
    """Draw n i.i.d. scalars from the equal-weight two-component mixture."""
    if n < 1:
        raise ConfigError(f"need n >= 1 draws, got {n}")
    gen = rng.generator("mixture-data")
    comp = gen.integers(0, 2, size=n)
    return theta1 + comp * theta2 + sigma_x * gen.standard_normal(n)


@dataclass
class MixtureModel(TargetModel):
    data: np.ndarray
    sigma1_sq: float = 10.0
    sigma2_sq: float = 1.0
    sigma_x_sq: float = 4.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 1 or self.data.size < 1:
            raise ConfigError("mixture data must be a nonempty 1-d array")
        self.dim = 2
        self.n_data = int(self.data.size)
        self._log_prior_const = -0.5 * (
            math.log(2 * math.pi * self.sigma1_sq) + math.log(2 * math.pi * self.sigma2_sq)
        )
        self._log_lik_const = -0.5 * math.log(2 * math.pi * self.sigma_x_sq)

    # -- prior -------------------------------------------------------------

    def log_prior(self, w):
        return float(
            -0.5 * w[0] * w[0] / self.sigma1_sq
            - 0.5 * w[1] * w[1] / self.sigma2_sq
            + self._log_prior_const
        )

    def grad_log_prior(self, w):
        return np.array([-w[0] / self.sigma1_sq, -w[1] / self.sigma2_sq])

    def ensemble_grad_log_prior(self, positions):
        out = np.empty_like(positions)
        out[:, 0] = -positions[:, 0] / self.sigma1_sq
        out[:, 1] = -positions[:, 1] / self.sigma2_sq
        return out

    # -- likelihood ----------------------------------------------------------

    def _component_logpdfs(self, positions, x):
        """Both component log-densities on a (n_particles, n_x) broadcast."""
        v = self.sigma_x_sq
        d1 = x[None, :] - positions[:, 0:1]
        d2 = d1 - positions[:, 1:2]
        a1 = -0.5 * d1 * d1 / v + self._log_lik_const
        a2 = -0.5 * d2 * d2 / v + self._log_lik_const
        return d1, d2, a1, a2

    def log_lik(self, w, k):
        w = np.asarray(w, dtype=np.float64)
        _, _, a1, a2 = self._component_logpdfs(w[None, :], self.data[k : k + 1])
        return float(np.logaddexp(a1[0, 0], a2[0, 0]) + _LOG_HALF)

    def grad_log_lik(self, w, k):
        w = np.asarray(w, dtype=np.float64)
        return self.per_datum_grads(w, [k])[0]

    def _responsibilities(self, a1, a2):
        m = np.maximum(a1, a2)
        e1 = np.exp(a1 - m)
        e2 = np.exp(a2 - m)
        z = e1 + e2
        return e1 / z, e2 / z

    def per_datum_grads(self, w, indices=None):
        w = np.asarray(w, dtype=np.float64)
        x = self.data if indices is None else self.data[np.asarray(indices, dtype=np.intp)]
        d1, d2, a1, a2 = self._component_logpdfs(w[None, :], x)
        r1, r2 = self._responsibilities(a1, a2)
        g1 = (r1 * d1 + r2 * d2) / self.sigma_x_sq
        g2 = (r2 * d2) / self.sigma_x_sq
        return np.stack([g1[0], g2[0]], axis=1)

    def ensemble_batch_grad_sum(self, positions, indices):
        positions = np.asarray(positions, dtype=np.float64)
        x = self.data[np.asarray(indices, dtype=np.intp)]
        d1, d2, a1, a2 = self._component_logpdfs(positions, x)
        r1, r2 = self._responsibilities(a1, a2)
        g1 = np.add.reduce((r1 * d1 + r2 * d2) / self.sigma_x_sq, axis=1)
        g2 = np.add.reduce((r2 * d2) / self.sigma_x_sq, axis=1)
        return np.stack([g1, g2], axis=1)

    def batch_grad_loglik_sum(self, w, indices):
        w = np.asarray(w, dtype=np.float64)
        return self.ensemble_batch_grad_sum(w[None, :], indices)[0]

    def ensemble_batch_loglik_sum(self, positions, indices):
        positions = np.asarray(positions, dtype=np.float64)
        x = self.data[np.asarray(indices, dtype=np.intp)]
        _, _, a1, a2 = self._component_logpdfs(positions, x)
        ll = np.logaddexp(a1, a2) + _LOG_HALF
        return np.add.reduce(ll, axis=1)

    def batch_loglik_sum(self, w, indices):
        w = np.asarray(w, dtype=np.float64)
        return float(self.ensemble_batch_loglik_sum(w[None, :], indices)[0])

    def mean_grad_loglik_full(self, w):
        return self.batch_grad_loglik_sum(w, np.arange(self.n_data)) / self.n_data


@dataclass
class PosteriorGrid:
    """Dense log-posterior evaluation used as the reference oracle."""

    theta1: np.ndarray
    theta2: np.ndarray
    log_post: np.ndarray  # [i, j] at (theta1[i], theta2[j])
    cell: tuple[float, float] = field(init=False)

    def __post_init__(self):
        self.cell = (
            float(self.theta1[1] - self.theta1[0]) if self.theta1.size > 1 else 0.0,
            float(self.theta2[1] - self.theta2[0]) if self.theta2.size > 1 else 0.0,
        )

    def masses(self) -> np.ndarray:
        """Normalized cell probabilities (sum exactly 1 after renormalization)."""
        p = np.exp(self.log_post - self.log_post.max())
        return p / np.add.reduce(p, axis=None)

    def argmax(self) -> np.ndarray:
        i, j = np.unravel_index(int(np.argmax(self.log_post)), self.log_post.shape)
        return np.array([self.theta1[i], self.theta2[j]])

    def posterior_mean(self) -> np.ndarray:
        p = self.masses()
        m1 = float(np.add.reduce(p.sum(axis=1) * self.theta1))
        m2 = float(np.add.reduce(p.sum(axis=0) * self.theta2))
        return np.array([m1, m2])

    def reference_sample(self, rng: RngStream, size: int) -> np.ndarray:
        """Multinomial resample of grid cells with uniform within-cell jitter."""
        p = self.masses().ravel()
        gen = rng.generator("grid-resample")
        cells = gen.choice(p.size, size=size, p=p)
        i, j = np.unravel_index(cells, self.log_post.shape)
        jitter = gen.random((size, 2)) - 0.5
        out = np.empty((size, 2))
        out[:, 0] = self.theta1[i] + jitter[:, 0] * self.cell[0]
        out[:, 1] = self.theta2[j] + jitter[:, 1] * self.cell[1]
        return out

    def density_quantile_levels(self, quantiles) -> list[float]:
        """Log-density thresholds whose superlevel sets hold the given mass."""
        flat = self.log_post.ravel()
        order = np.argsort(flat)[::-1]
        cum = np.cumsum(self.masses().ravel()[order])
        levels = []
        for q in quantiles:
            idx = int(np.searchsorted(cum, q))
            levels.append(float(flat[order[min(idx, flat.size - 1)]]))
        return levels


def mixture_posterior_grid(
    model: MixtureModel,
    resolution: int = 400,
    window: tuple[tuple[float, float], tuple[float, float]] = ((-3.0, 3.0), (-3.0, 3.0)),
) -> PosteriorGrid:
    """Evaluate the unnormalized log posterior on a resolution^2 grid.

    Chunked over theta1 rows; the first-component term is shared across
    the theta2 axis so each row costs one (resolution, n_data) pass.
    """
    (lo1, hi1), (lo2, hi2) = window
    if lo1 >= hi1 or lo2 >= hi2:
        raise ConfigError("grid window bounds must satisfy lo < hi")
    if resolution < 2:
        raise ConfigError("grid resolution must be >= 2")
    _warn_if_window_excludes_prior(model, window)

    t1 = np.linspace(lo1, hi1, resolution)
    t2 = np.linspace(lo2, hi2, resolution)
    x = model.data
    v = model.sigma_x_sq
    const = -0.5 * math.log(2 * math.pi * v)
    log_post = np.empty((resolution, resolution))
    for i, th1 in enumerate(t1):
        d1 = x - th1
        a1 = -0.5 * d1 * d1 / v + const            # (n_data,)
        d2 = d1[None, :] - t2[:, None]             # (res, n_data)
        a2 = -0.5 * d2 * d2 / v + const
        ll = np.add.reduce(np.logaddexp(a1[None, :], a2) + _LOG_HALF, axis=1)
        prior = (
            -0.5 * th1 * th1 / model.sigma1_sq
            - 0.5 * t2 * t2 / model.sigma2_sq
            + model._log_prior_const
        )
        log_post[i, :] = prior + ll
    return PosteriorGrid(theta1=t1, theta2=t2, log_post=log_post)


def _warn_if_window_excludes_prior(model, window):
    (lo1, hi1), (lo2, hi2) = window

    def _mass(lo, hi, var):
        sd = math.sqrt(2.0 * var)
        return 0.5 * (math.erf(hi / sd) - math.erf(lo / sd))

    inside = _mass(lo1, hi1, model.sigma1_sq) * _mass(lo2, hi2, model.sigma2_sq)
    if inside < 1e-3:
        warnings.warn(
            f"grid window {window} covers only {inside:.2e} of the prior mass",
            stacklevel=3,
        )
