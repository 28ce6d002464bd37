"""Shared data model: particle ensembles, target models, RNG streams, traces."""
from __future__ import annotations

import abc
import hashlib
from dataclasses import dataclass, field

import numpy as np


class OpviError(Exception):
    """Base class for all library errors."""


class ConfigError(OpviError):
    """Invalid configuration; raised before any computation starts."""


class NumericError(OpviError):
    """Non-finite value encountered during a run."""


def _context_int(value):
    # Stable across processes: python's hash() is salted, so strings go
    # through blake2s instead.
    if isinstance(value, (int, np.integer)):
        v = int(value)
        if v < 0:
            raise ValueError(f"rng context ints must be nonnegative, got {v}")
        return v
    if isinstance(value, str):
        digest = hashlib.blake2s(value.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"rng context entries must be int or str, got {type(value)!r}")


@dataclass(frozen=True)
class RngStream:
    """Counter-based RNG: (seed, context) fully determines the draws.

    Each call to generator() builds a fresh PCG64 keyed by the seed plus
    the context tuple (round number, particle index, role tag, ...), so
    draws do not depend on execution order or thread scheduling.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit nonnegative integer, got {self.seed}")

    def generator(self, *context) -> np.random.Generator:
        entropy = [self.seed] + [_context_int(c) for c in context]
        return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass
class ParticleEnsemble:
    """n_particles x dim positions plus the current round counter."""

    positions: np.ndarray
    round: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2:
            raise ConfigError("particle positions must be a 2-d matrix")
        n, d = self.positions.shape
        if n < 1 or d < 1:
            raise ConfigError(f"ensemble needs n >= 1 particles and dim >= 1, got {n} x {d}")
        if self.round < 0:
            raise ConfigError("round counter must be nonnegative")
        if not np.all(np.isfinite(self.positions)):
            raise NumericError("ensemble contains non-finite positions")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


class TargetModel(abc.ABC):
    """Log-prior / per-datum log-likelihood with analytic gradients.

    Scalar methods define the contract; the batched hooks have generic
    loop implementations that concrete models override with vectorized
    versions. Implementations must be pure (no mutation during gradient
    calls) and guard underflow by working in log space.
    """

    dim: int
    n_data: int

    @abc.abstractmethod
    def log_prior(self, w: np.ndarray) -> float: ...

    @abc.abstractmethod
    def grad_log_prior(self, w: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def log_lik(self, w: np.ndarray, k: int) -> float: ...

    @abc.abstractmethod
    def grad_log_lik(self, w: np.ndarray, k: int) -> np.ndarray: ...

    # -- batched hooks ----------------------------------------------------

    def batch_grad_loglik_sum(self, w, indices) -> np.ndarray:
        """sum_{k in indices} grad_log_lik(w, k)."""
        out = np.zeros(self.dim)
        for k in indices:
            out += self.grad_log_lik(w, int(k))
        return out

    def batch_loglik_sum(self, w, indices) -> float:
        return float(sum(self.log_lik(w, int(k)) for k in indices))

    def ensemble_batch_grad_sum(self, positions, indices) -> np.ndarray:
        """Row i holds batch_grad_loglik_sum(positions[i], indices)."""
        return np.stack([self.batch_grad_loglik_sum(w, indices) for w in positions])

    def ensemble_grad_log_prior(self, positions) -> np.ndarray:
        return np.stack([self.grad_log_prior(w) for w in positions])

    def per_datum_grads(self, w, indices=None) -> np.ndarray:
        """Matrix of grad_log_lik(w, k) rows, defaulting to the full dataset."""
        if indices is None:
            indices = range(self.n_data)
        return np.stack([self.grad_log_lik(w, int(k)) for k in indices])

    def mean_grad_loglik_full(self, w) -> np.ndarray:
        """(1/N) sum over the whole dataset; models with sufficient statistics override."""
        return self.batch_grad_loglik_sum(w, range(self.n_data)) / self.n_data


@dataclass
class RoundTrace:
    """Per-round metric record; None marks a metric that was not computed."""

    t: int
    batch_size: int
    eta: float
    alpha: float
    grad_error: float | None = None
    objective: float | None = None
    regret_cum: float | None = None
    energy_dist: float | None = None
    rmse: float | None = None
    test_ll: float | None = None
    wallclock_ms: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta}")
        if self.grad_error is not None and self.grad_error < 0:
            raise ConfigError("grad_error must be nonnegative")
        if self.energy_dist is not None and self.energy_dist < 0:
            raise ConfigError("energy distance must be nonnegative")


def init_ensemble(n: int, dim: int, init_spec, rng: RngStream) -> ParticleEnsemble:
    """Draw an ensemble at round 0 from the given initial distribution.

    init_spec is one of:
      ("normal",)                  standard normal per coordinate
      ("uniform", a, b)            i.i.d. uniform on the box [a, b]^dim
      ("point", vector)            every particle at the given point
    """
    if n < 1 or dim < 1:
        raise ConfigError(f"need n >= 1 and dim >= 1, got n={n}, dim={dim}")
    kind = init_spec[0]
    gen = rng.generator("init")
    if kind == "normal":
        positions = gen.standard_normal((n, dim))
    elif kind == "uniform":
        _, a, b = init_spec
        if a >= b:
            raise ConfigError(f"uniform init needs a < b, got [{a}, {b}]")
        positions = gen.uniform(a, b, size=(n, dim))
    elif kind == "point":
        center = np.asarray(init_spec[1], dtype=np.float64)
        if center.shape != (dim,):
            raise ConfigError(f"point init must have length {dim}, got shape {center.shape}")
        positions = np.tile(center, (n, 1))
    else:
        raise ConfigError(f"unknown init spec {kind!r}")
    return ParticleEnsemble(positions=positions, round=0)


def ensemble_mean(e: ParticleEnsemble) -> np.ndarray:
    """Arithmetic mean over particles, length dim."""
    return e.positions.mean(axis=0)
