"""Data-arrival simulation: per-round batch index selection and auditing.

Shuffled mode draws each round's indices uniformly without replacement
from the whole dataset (the finite-population variance analysis assumes
this); sequential mode walks contiguous slices in a single pass, which
requires the batch plan to cover the dataset exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from opvi.core import ConfigError, OpviError, RngStream


class StreamExhausted(OpviError):
    """Requested a batch past the planned horizon."""


@dataclass
class StreamPlan:
    mode: str  # "shuffled" | "sequential"
    batch_sizes: list[int]
    n_data: int

    def __post_init__(self):
        if self.mode not in ("shuffled", "sequential"):
            raise ConfigError(f"unknown stream mode {self.mode!r}")
        if not self.batch_sizes:
            raise ConfigError("batch plan is empty")
        if any(b < 1 or b > self.n_data for b in self.batch_sizes):
            raise ConfigError(f"batch sizes must lie in [1, {self.n_data}]")
        if self.mode == "sequential" and sum(self.batch_sizes) != self.n_data:
            raise ConfigError(
                "sequential mode needs sum of batch sizes == n_data "
                f"({sum(self.batch_sizes)} != {self.n_data})"
            )
        self._offsets = np.concatenate([[0], np.cumsum(self.batch_sizes)])

    @property
    def rounds(self) -> int:
        return len(self.batch_sizes)


def next_batch(plan: StreamPlan, t: int, rng: RngStream) -> np.ndarray:
    """Distinct indices for round t (1-based); deterministic given (seed, t)."""
    if t < 1:
        raise ConfigError(f"rounds are 1-based, got t={t}")
    if t > plan.rounds:
        raise StreamExhausted(f"round {t} is past the planned horizon {plan.rounds}")
    b = plan.batch_sizes[t - 1]
    if plan.mode == "sequential":
        start = int(plan._offsets[t - 1])
        return np.arange(start, start + b, dtype=np.intp)
    gen = rng.generator("batch", t)
    return np.asarray(gen.choice(plan.n_data, size=b, replace=False), dtype=np.intp)


@dataclass
class AuditReport:
    ok: bool
    rounds_seen: int
    rounds_planned: int
    total_seen: int
    total_expected: int
    detail: str


def stream_audit(plan: StreamPlan, emitted_sizes) -> AuditReport:
    """Check the fixed-iterations / total-data accounting after a run."""
    rounds_seen = len(emitted_sizes)
    total_seen = int(sum(emitted_sizes))
    problems = []
    if rounds_seen != plan.rounds:
        problems.append(f"round count {rounds_seen} != planned {plan.rounds}")
    if total_seen != plan.n_data:
        problems.append(
            f"total samples {total_seen} != n_data {plan.n_data} "
            f"(deficit {plan.n_data - total_seen})"
        )
    return AuditReport(
        ok=not problems,
        rounds_seen=rounds_seen,
        rounds_planned=plan.rounds,
        total_seen=total_seen,
        total_expected=plan.n_data,
        detail="; ".join(problems) if problems else "pass",
    )
