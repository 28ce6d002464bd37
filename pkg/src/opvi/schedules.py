"""Closed-form per-round schedules: batch size, prior weight, step size.

Batch schedules produce real values that are rounded up and clamped to
[1, N]; rounding up keeps the sublinear growth order while never
emitting an empty batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from opvi.core import ConfigError


@dataclass(frozen=True)
class BatchSpec:
    """static(B) | power(rho): ceil(t^rho) | saturating(rho): ceil(N t^rho / (N + t^rho)) | full."""

    kind: str
    size: int = 0
    rho: float = 0.55

    def __post_init__(self):
        if self.kind not in ("static", "power", "saturating", "full"):
            raise ConfigError(f"unknown batch schedule {self.kind!r}")
        if self.kind == "static" and self.size < 1:
            raise ConfigError(f"static batch size must be >= 1, got {self.size}")
        if self.kind in ("power", "saturating") and self.rho <= 0:
            raise ConfigError(f"batch exponent rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class PriorWeightSpec:
    """paper: 6/(pi^2 t^2) | uniform: 1/T | constant(c)."""

    kind: str
    horizon: int = 0
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("paper", "uniform", "constant"):
            raise ConfigError(f"unknown prior weight schedule {self.kind!r}")
        if self.kind == "uniform" and self.horizon < 1:
            raise ConfigError("uniform prior weight needs the horizon T")
        if self.kind == "constant" and not 0.0 < self.value <= 1.0:
            raise ConfigError(f"constant prior weight must lie in (0, 1], got {self.value}")


@dataclass(frozen=True)
class StepSpec:
    """constant(alpha0) | decaying(alpha0, kappa): alpha0 * t^(-kappa).

    kappa may be negative (an increasing step size) so either reading of
    the exponent sign is expressible; the decaying default is the useful
    one.
    """

    kind: str
    alpha0: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "decaying"):
            raise ConfigError(f"unknown step schedule {self.kind!r}")
        if self.alpha0 <= 0:
            raise ConfigError(f"step size alpha0 must be positive, got {self.alpha0}")


def batch_size(t: int, n_data: int, spec: BatchSpec) -> int:
    """Schedule value at round t, rounded up, clamped to [1, n_data]."""
    if t < 1:
        raise ConfigError(f"rounds are 1-based, got t={t}")
    if spec.kind == "static":
        raw = spec.size
    elif spec.kind == "power":
        raw = math.ceil(t**spec.rho)
    elif spec.kind == "saturating":
        tp = t**spec.rho
        raw = math.ceil(n_data * tp / (n_data + tp))
    else:  # full
        raw = n_data
    return max(1, min(int(raw), n_data))


def prior_weight(t: int, spec: PriorWeightSpec) -> float:
    if t < 1:
        raise ConfigError(f"rounds are 1-based, got t={t}")
    if spec.kind == "paper":
        return 6.0 / (math.pi**2 * t * t)
    if spec.kind == "uniform":
        return 1.0 / spec.horizon
    return spec.value


def step_size(t: int, spec: StepSpec) -> float:
    if t < 1:
        raise ConfigError(f"rounds are 1-based, got t={t}")
    if spec.kind == "constant":
        return spec.alpha0
    return spec.alpha0 * t ** (-spec.kappa)


def fitds_plan(n_data: int, rounds: int, spec: BatchSpec) -> list[int]:
    """Batch sizes b_1..b_T with sum exactly n_data.

    Evaluates the schedule, then reconciles the budget by adjusting only
    the tail rounds (shrinking toward 1 or growing toward n_data), which
    preserves the early-round variance profile.
    """
    if rounds < 1:
        raise ConfigError(f"need at least one round, got {rounds}")
    if n_data < rounds:
        raise ConfigError(
            f"infeasible budget: n_data={n_data} < rounds={rounds} (every round needs >= 1 datum)"
        )
    sizes = [batch_size(t, n_data, spec) for t in range(1, rounds + 1)]
    diff = sum(sizes) - n_data
    i = rounds - 1
    while diff > 0:
        take = min(diff, sizes[i] - 1)
        sizes[i] -= take
        diff -= take
        i -= 1
    i = rounds - 1
    while diff < 0:
        add = min(-diff, n_data - sizes[i])
        sizes[i] += add
        diff += add
        i -= 1
    return sizes


@dataclass(frozen=True)
class SchedulePack:
    """The three per-round schedules bound to a dataset size."""

    batch: BatchSpec
    prior: PriorWeightSpec
    step: StepSpec
    n_data: int

    def batch_size(self, t: int) -> int:
        return batch_size(t, self.n_data, self.batch)

    def prior_weight(self, t: int) -> float:
        return prior_weight(t, self.prior)

    def step_size(self, t: int) -> float:
        return step_size(t, self.step)

    def fitds_plan(self, rounds: int) -> list[int]:
        return fitds_plan(self.n_data, rounds, self.batch)
