"""Per-round update rules: kernelized particle flows, SGLD, projected MAP.

All particle updates are synchronous (Jacobi): every field is evaluated
on the pre-update ensemble and the new positions are written at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from opvi import fieldops
from opvi.core import ConfigError, NumericError, ParticleEnsemble, TargetModel
from opvi.kernels import KernelSpec
from opvi.schedules import SchedulePack

_DEFAULT_DIFFUSION = {"opvi": 0.1, "svgd": 1.0, "sgld": 0.0, "online_map": 0.0}


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler kind plus the knobs shared across update rules.

    diffusion_scale scales the kernel-gradient (repulsion) term; None
    picks the per-kind default (0.1 for the online particle flow, 1.0
    for plain SVGD). likelihood_scaling chooses between the unbiased
    batch estimator (x N/B) and the literal plain sum over the batch.
    """

    kind: str
    diffusion_scale: float | None = None
    likelihood_scaling: str = "unbiased"  # "unbiased" | "paper_literal"
    projection_radius: float = math.inf

    def __post_init__(self):
        if self.kind not in ("opvi", "svgd", "sgld", "online_map"):
            raise ConfigError(f"unknown sampler kind {self.kind!r}")
        if self.likelihood_scaling not in ("unbiased", "paper_literal"):
            raise ConfigError(f"unknown likelihood scaling {self.likelihood_scaling!r}")
        if self.diffusion_scale is not None and self.diffusion_scale < 0:
            raise ConfigError("diffusion scale must be nonnegative")
        if not self.projection_radius > 0:
            raise ConfigError("projection radius must be positive (math.inf = unbounded)")

    @property
    def gamma(self) -> float:
        if self.diffusion_scale is None:
            return _DEFAULT_DIFFUSION[self.kind]
        return self.diffusion_scale


@dataclass
class MapState:
    """Single-point optimizer state for the projected online MAP rule."""

    w: np.ndarray
    round: int = 0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if not np.all(np.isfinite(self.w)):
            raise NumericError("MAP state contains non-finite entries")


def likelihood_scale(cfg: SamplerConfig, n_data: int, batch_len: int) -> float:
    """Multiplier applied to the summed batch likelihood gradient."""
    if batch_len == 0:
        return 0.0
    if cfg.likelihood_scaling == "unbiased":
        return n_data / batch_len
    return 1.0


def project_ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of the given radius."""
    if not radius > 0:
        raise ConfigError(f"projection radius must be positive, got {radius}")
    if math.isinf(radius):
        return w
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w
    return w * (radius / norm)


def _batch_scores(positions, model, batch, scale, eta):
    """scale * sum_batch grad_log_lik + eta * grad_log_prior, per particle row."""
    if len(batch) > 0:
        lik = model.ensemble_batch_grad_sum(positions, batch)
        scores = scale * lik + eta * model.ensemble_grad_log_prior(positions)
    else:
        scores = eta * model.ensemble_grad_log_prior(positions)
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores).all(axis=1))[0])
        raise NumericError(
            f"non-finite gradient for particle {bad} "
            f"(position {positions[bad]}, batch {list(map(int, batch))[:8]}...)"
        )
    return scores


def _advance(e: ParticleEnsemble, field, alpha) -> ParticleEnsemble:
    # overflow here is reported as a NumericError, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        new = e.positions + alpha * field
    if not np.all(np.isfinite(new)):
        bad = int(np.flatnonzero(~np.isfinite(new).all(axis=1))[0])
        raise NumericError(f"particle {bad} became non-finite at round {e.round + 1}")
    return ParticleEnsemble(positions=new, round=e.round + 1)


def opvi_step(
    e: ParticleEnsemble,
    model: TargetModel,
    batch,
    t: int,
    sched: SchedulePack,
    cfg: SamplerConfig,
    kern: KernelSpec,
) -> ParticleEnsemble:
    """One online particle flow round with prior weight eta_t.

    x_i <- x_i + alpha_t * (1/n) sum_j [ K(x_j, x_i) * (S * sum_batch
    grad log p(d_k|x_j) + eta_t * grad log p0(x_j)) + gamma * grad_xj
    K(x_j, x_i) ], all fields from the pre-update ensemble.
    """
    alpha = sched.step_size(t)
    eta = sched.prior_weight(t)
    scale = likelihood_scale(cfg, model.n_data, len(batch))
    scores = _batch_scores(e.positions, model, batch, scale, eta)
    field = fieldops.rbf_field(e.positions, scores, kern.bandwidth(e), cfg.gamma)
    return _advance(e, field, alpha)


def svgd_step(
    e: ParticleEnsemble,
    model: TargetModel,
    batch,
    cfg: SamplerConfig,
    kern: KernelSpec,
    alpha: float,
) -> ParticleEnsemble:
    """Plain SVGD round: full unweighted prior, no per-round prior schedule."""
    scale = likelihood_scale(cfg, model.n_data, len(batch))
    scores = _batch_scores(e.positions, model, batch, scale, 1.0)
    field = fieldops.rbf_field(e.positions, scores, kern.bandwidth(e), cfg.gamma)
    return _advance(e, field, alpha)


def sgld_step(
    position: np.ndarray,
    model: TargetModel,
    batch,
    alpha: float,
    rng: np.random.Generator,
    cfg: SamplerConfig | None = None,
) -> np.ndarray:
    """Langevin round: half-step drift on the log posterior plus N(0, alpha) noise."""
    if alpha <= 0:
        raise ConfigError(f"SGLD step size must be positive, got {alpha}")
    if cfg is None:
        cfg = SamplerConfig(kind="sgld")
    position = np.asarray(position, dtype=np.float64)
    scale = likelihood_scale(cfg, model.n_data, len(batch))
    drift = model.grad_log_prior(position)
    if len(batch) > 0:
        drift = scale * model.batch_grad_loglik_sum(position, batch) + drift
    noise = rng.normal(0.0, math.sqrt(alpha), size=position.shape)
    new = position + 0.5 * alpha * drift + noise
    if not np.all(np.isfinite(new)):
        raise NumericError("SGLD position became non-finite")
    return new


def online_map_step(
    s: MapState,
    model: TargetModel,
    batch,
    t: int,
    sched: SchedulePack,
    cfg: SamplerConfig,
) -> MapState:
    """Projected stochastic gradient round on the weighted MAP cost.

    w <- Pi_R[ w - alpha_t * (grad chat_t(w) + eta_t * grad c0(w)) ]
    with grad chat_t = -S * sum_batch grad log p(d_k|w) and grad c0 =
    -grad log p0.
    """
    alpha = sched.step_size(t)
    eta = sched.prior_weight(t)
    scale = likelihood_scale(cfg, model.n_data, len(batch))
    grad_c0 = -model.grad_log_prior(s.w)
    if len(batch) > 0:
        grad_chat = -(scale * model.batch_grad_loglik_sum(s.w, batch))
    else:
        grad_chat = np.zeros_like(s.w)
    w = s.w - alpha * (grad_chat + eta * grad_c0)
    w = project_ball(w, cfg.projection_radius)
    if not np.all(np.isfinite(w)):
        raise NumericError(f"MAP iterate became non-finite at round {s.round + 1}")
    return MapState(w=w, round=s.round + 1)
