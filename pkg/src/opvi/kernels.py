"""Exponential kernel K(x, y) = exp(-||x - y||^2 / h) and bandwidth selection.

Note the bandwidth convention: the squared distance is divided by h
directly (no 1/(2h^2) factor), so h carries squared-length units.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from opvi.core import ConfigError, NumericError, ParticleEnsemble
from opvi import fieldops


@dataclass(frozen=True)
class KernelSpec:
    """Bandwidth policy: fixed h, or the median heuristic per round."""

    bandwidth_mode: str = "median"  # "median" | "fixed"
    h: float = 1.0

    def __post_init__(self):
        if self.bandwidth_mode not in ("median", "fixed"):
            raise ConfigError(f"unknown bandwidth mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "fixed" and self.h <= 0:
            raise ConfigError(f"fixed bandwidth must be positive, got {self.h}")

    def bandwidth(self, e: ParticleEnsemble) -> float:
        if self.bandwidth_mode == "fixed":
            return self.h
        return median_bandwidth(e)


def kernel_eval(x, y, h: float) -> float:
    """exp(-||x - y||^2 / h), in (0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if h <= 0:
        raise ConfigError(f"bandwidth must be positive, got {h}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericError("kernel inputs must be finite")
    d = x - y
    return float(np.exp(-np.dot(d, d) / h))


def kernel_grad_x(x, y, h: float) -> np.ndarray:
    """Gradient of kernel_eval with respect to x: (-2/h) (x - y) K(x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return (-2.0 / h) * (x - y) * kernel_eval(x, y, h)


def median_bandwidth(e: ParticleEnsemble) -> float:
    """med^2 / log(n + 1) over pairwise distances; 1.0 when degenerate.

    Standard SVGD median heuristic. Falls back to 1.0 for a single
    particle or a fully collapsed ensemble (median distance zero).
    """
    n = e.n_particles
    if n == 1:
        return 1.0
    sq = fieldops.pairwise_sq_dists(e.positions)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(sq[iu])))
    if med == 0.0:
        return 1.0
    return med * med / float(np.log(n + 1.0))


def gram_matrix(positions, h: float) -> np.ndarray:
    """Kernel Gram matrix of an ensemble, shape (n, n)."""
    return np.exp(-fieldops.pairwise_sq_dists(positions) / h)
