"""Measured quantities: gradient error, variance law, regret, distances.

The gradient error is mean-form on both sides (batch mean vs full-data
mean), the reading under which the finite-population variance identity
E||e||^2 = (N-B)/(N B) * S^2 is exact; multiply by N to recover the
optimization-scale (summed-cost) error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from opvi import fieldops
from opvi.core import ConfigError, NumericError, RngStream, TargetModel
from opvi.models.linreg import LinRegModel, linreg_map_oracle


def gradient_error(model: TargetModel, w, batch, form: str = "mean") -> float:
    """|| batch mean gradient - full-data mean gradient ||.

    form="sum" rescales by N to the summed-cost convention.
    """
    if len(batch) == 0:
        raise ConfigError("gradient error needs a nonempty batch")
    if form not in ("mean", "sum"):
        raise ConfigError(f"unknown gradient error form {form!r}")
    gb = model.batch_grad_loglik_sum(w, batch) / len(batch)
    gf = model.mean_grad_loglik_full(w)
    err = float(np.linalg.norm(gb - gf))
    return err * model.n_data if form == "sum" else err


def population_grad_variance(model: TargetModel, w) -> float:
    """S^2 = (1/(N-1)) sum_k ||g_k - g_bar||^2 over per-datum gradients."""
    g = model.per_datum_grads(w)
    gbar = g.mean(axis=0)
    dev = g - gbar
    return float(np.add.reduce(dev * dev, axis=None)) / (model.n_data - 1)


def fpc_predicted_mse(n: int, b: int, s_sq: float) -> float:
    """Finite-population prediction for E||e||^2 under without-replacement batches."""
    return (n - b) / (n * b) * s_sq


@dataclass
class FpcReport:
    empirical: float
    predicted: float
    rel_err: float


def validate_fpc_variance(
    model: TargetModel, w, batch_size: int, draws: int, rng: RngStream
) -> FpcReport:
    """Monte-Carlo E||e||^2 against the finite-population closed form."""
    n = model.n_data
    if not 1 <= batch_size <= n:
        raise ConfigError(f"batch size must lie in [1, {n}], got {batch_size}")
    g = model.per_datum_grads(w)
    gbar = g.mean(axis=0)
    dev = g - gbar
    s_sq = float(np.add.reduce(dev * dev, axis=None)) / (n - 1)
    predicted = fpc_predicted_mse(n, batch_size, s_sq)

    if batch_size == n:
        return FpcReport(empirical=0.0, predicted=0.0, rel_err=0.0)

    gen = rng.generator("fpc-draws")
    total = 0.0
    for _ in range(draws):
        idx = gen.choice(n, size=batch_size, replace=False)
        e = g[idx].mean(axis=0) - gbar
        total += float(np.dot(e, e))
    empirical = total / draws
    rel_err = abs(empirical - predicted) / predicted if predicted > 0 else 0.0
    return FpcReport(empirical=empirical, predicted=predicted, rel_err=rel_err)


@dataclass
class ErrorBudget:
    """Per-round gradient-error estimates and their running sum."""

    eps: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)
    lambda_hat: float | None = None

    def record(self, eps_t: float):
        if eps_t < 0:
            raise ConfigError("gradient error estimates must be nonnegative")
        self.eps.append(float(eps_t))
        prev = self.cumulative[-1] if self.cumulative else 0.0
        self.cumulative.append(prev + float(eps_t))

    @property
    def total(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0


@dataclass
class RegretLedger:
    """Cumulative cost gap against the per-round MAP oracle."""

    increments: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)
    oracle_path: list = field(default_factory=list)
    variation: list = field(default_factory=list)  # running V_T

    @property
    def regret(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0

    @property
    def path_variation(self) -> float:
        return self.variation[-1] if self.variation else 0.0


def dynamic_regret_update(
    ledger: RegretLedger, model: LinRegModel, w_t, t: int, eta_t: float
) -> RegretLedger:
    """Append the round-t cost gap and oracle path increment."""
    w_star = linreg_map_oracle(model, eta_t)
    gap = model.full_cost(w_t, eta_t) - model.full_cost(w_star, eta_t)
    ledger.increments.append(float(gap))
    prev_cum = ledger.cumulative[-1] if ledger.cumulative else 0.0
    ledger.cumulative.append(prev_cum + float(gap))
    prev_v = ledger.variation[-1] if ledger.variation else 0.0
    step = float(np.linalg.norm(w_star - ledger.oracle_path[-1])) if ledger.oracle_path else 0.0
    ledger.variation.append(prev_v + step)
    ledger.oracle_path.append(w_star)
    return ledger


def energy_distance(sample_a, sample_b) -> float:
    """V-statistic energy distance 2 E||A-B|| - E||A-A'|| - E||B-B'||."""
    a = np.atleast_2d(np.asarray(sample_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(sample_b, dtype=np.float64))
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise ConfigError("energy distance needs nonempty samples")
    if a.shape[1] != b.shape[1]:
        raise ConfigError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    cross, within_a, within_b = fieldops.energy_stats(a, b)
    return max(0.0, 2.0 * cross - within_a - within_b)


def predictive_metrics(ensemble, model, x_test, y_test):
    """Bayesian model averaging over particles: (rmse, mean test log-likelihood).

    Regression: the predictive density at a test point is the particle
    average of per-particle Gaussian densities; RMSE uses the averaged
    mean prediction. Classification: averaged softmax probabilities,
    RMSE is the root mean squared gap to the one-hot targets.
    """
    x_test = np.asarray(x_test, dtype=np.float64)
    if x_test.shape[0] == 0:
        raise ConfigError("test set must be nonempty")
    positions = ensemble.positions
    n = positions.shape[0]

    if model.task == "regression":
        y_test = np.asarray(y_test, dtype=np.float64)
        preds = np.stack([model.predict(w, x_test)[:, 0] for w in positions])  # (n, B)
        precs = np.array([model.noise_precision(w) for w in positions])
        mean_pred = preds.mean(axis=0)
        rmse = float(np.sqrt(np.mean((mean_pred - y_test) ** 2)))
        resid = y_test[None, :] - preds
        logpdf = 0.5 * (np.log(precs)[:, None] - math.log(2 * math.pi)) \
            - 0.5 * precs[:, None] * resid * resid
        m = logpdf.max(axis=0)
        ll = m + np.log(np.add.reduce(np.exp(logpdf - m), axis=0)) - math.log(n)
        return rmse, float(ll.mean())

    labels = np.asarray(y_test)
    probs = np.stack([model.predict(w, x_test) for w in positions]).mean(axis=0)  # (B, C)
    onehot = np.zeros_like(probs)
    onehot[np.arange(labels.size), labels] = 1.0
    rmse = float(np.sqrt(np.mean((probs - onehot) ** 2)))
    ll = float(np.mean(np.log(probs[np.arange(labels.size), labels])))
    return rmse, ll


def sublinearity_exponent(series) -> float:
    """Log-log slope of a cumulative series over the last half of the horizon."""
    series = np.asarray(series, dtype=np.float64)
    t_max = series.size
    if t_max < 100:
        raise ConfigError(f"need at least 100 rounds to fit a slope, got {t_max}")
    ts = np.arange(t_max // 2, t_max + 1)
    vals = series[ts - 1]
    if np.any(vals <= 0):
        raise NumericError("sublinearity fit needs positive series values")
    slope, _ = np.polyfit(np.log(ts), np.log(vals), 1)
    return float(slope)
