"""Single-hidden-layer Bayesian neural networks with analytic gradients.

Regression: tanh hidden layer, scalar Gaussian output whose noise
precision rides along in the particle vector as a log-precision entry
(Gamma(1, 0.1) prior on the precision, so the log-reparameterized
coordinate is unconstrained). Classification: sigmoid hidden layer and
a softmax output, no noise term. Weights carry an independent
N(0, prior_var) prior.

Parameter packing, flat vector order:
    [W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out), (tau)]

All batch contractions use einsum so that results do not depend on the
BLAS thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from opvi.core import ConfigError, TargetModel

GAMMA_SHAPE = 1.0
GAMMA_RATE = 0.1
_LOG_GAMMA_CONST = GAMMA_SHAPE * math.log(GAMMA_RATE) - math.lgamma(GAMMA_SHAPE)


@dataclass
class BnnModel(TargetModel):
    X: np.ndarray
    y: np.ndarray
    hidden: int = 50
    task: str = "regression"  # "regression" | "classification"
    prior_var: float = 1.0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown BNN task {self.task!r}")
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ConfigError("BNN inputs must be a nonempty (N, in) matrix")
        if self.hidden < 1:
            raise ConfigError("need at least one hidden unit")
        if self.prior_var <= 0:
            raise ConfigError("weight prior variance must be positive")
        self.n_data, self.n_in = self.X.shape
        if self.task == "regression":
            self.y = np.asarray(self.y, dtype=np.float64)
            self.n_out = 1
        else:
            self.y = np.asarray(self.y)
            if not np.issubdtype(self.y.dtype, np.integer):
                raise ConfigError("classification labels must be integers")
            self.n_out = int(self.y.max()) + 1
        if self.y.shape != (self.n_data,):
            raise ConfigError("targets must be a length-N vector")

        h, i, o = self.hidden, self.n_in, self.n_out
        sizes = [h * i, h, o * h, o] + ([1] if self.task == "regression" else [])
        bounds = np.cumsum([0] + sizes)
        self._slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        self.dim = int(bounds[-1])
        self.n_weights = h * i + h + o * h + o

    # -- packing -----------------------------------------------------------

    def unpack(self, w):
        """Views (W1, b1, W2, b2, tau_or_None) into the flat vector."""
        w = np.asarray(w, dtype=np.float64)
        h, i, o = self.hidden, self.n_in, self.n_out
        w1 = w[self._slices[0]].reshape(h, i)
        b1 = w[self._slices[1]]
        w2 = w[self._slices[2]].reshape(o, h)
        b2 = w[self._slices[3]]
        tau = w[self._slices[4]][0] if self.task == "regression" else None
        return w1, b1, w2, b2, tau

    def init_particle(self, gen: np.random.Generator) -> np.ndarray:
        """Scaled-normal weight draw, zero biases; log-precision starts at 0."""
        w = np.zeros(self.dim)
        w[self._slices[0]] = gen.standard_normal(self.hidden * self.n_in) / math.sqrt(self.n_in)
        w[self._slices[2]] = gen.standard_normal(self.n_out * self.hidden) / math.sqrt(self.hidden)
        return w

    # -- forward -----------------------------------------------------------

    def _hidden_act(self, z):
        if self.task == "regression":
            return np.tanh(z)
        return 1.0 / (1.0 + np.exp(-z))

    def forward(self, w, inputs):
        """Network output for a (B, in) batch: raw values or softmax probabilities."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if inputs.shape[1] != self.n_in:
            raise ConfigError(f"expected {self.n_in} input features, got {inputs.shape[1]}")
        w1, b1, w2, b2, _ = self.unpack(w)
        a1 = self._hidden_act(np.einsum("bi,hi->bh", inputs, w1) + b1)
        out = np.einsum("bh,oh->bo", a1, w2) + b2
        if self.task == "classification":
            out = _softmax(out)
        return out

    # -- likelihood ----------------------------------------------------------

    def log_lik(self, w, k):
        return self.batch_loglik_sum(w, [k])

    def batch_loglik_sum(self, w, indices):
        idx = np.asarray(indices, dtype=np.intp)
        xb, yb = self.X[idx], self.y[idx]
        w1, b1, w2, b2, tau = self.unpack(w)
        a1 = self._hidden_act(np.einsum("bi,hi->bh", xb, w1) + b1)
        z2 = np.einsum("bh,oh->bo", a1, w2) + b2
        if self.task == "regression":
            resid = yb - z2[:, 0]
            prec = math.exp(tau)
            ll = 0.5 * (tau - math.log(2 * math.pi)) - 0.5 * prec * resid * resid
            return float(np.add.reduce(ll))
        logp = z2 - _logsumexp_rows(z2)
        return float(np.add.reduce(logp[np.arange(len(idx)), yb]))

    def grad_log_lik(self, w, k):
        return self.batch_grad_loglik_sum(w, [k])

    def batch_grad_loglik_sum(self, w, indices):
        """Manual backprop; returns the gradient of the summed batch log-likelihood."""
        idx = np.asarray(indices, dtype=np.intp)
        xb, yb = self.X[idx], self.y[idx]
        w1, b1, w2, b2, tau = self.unpack(w)
        z1 = np.einsum("bi,hi->bh", xb, w1) + b1
        a1 = self._hidden_act(z1)
        z2 = np.einsum("bh,oh->bo", a1, w2) + b2

        if self.task == "regression":
            prec = math.exp(tau)
            resid = yb - z2[:, 0]
            dz2 = (prec * resid)[:, None]                       # d loglik / d output
            g_tau = float(np.add.reduce(0.5 - 0.5 * prec * resid * resid))
        else:
            p = _softmax(z2)
            dz2 = -p
            dz2[np.arange(len(idx)), yb] += 1.0
            g_tau = None

        g_w2 = np.einsum("bo,bh->oh", dz2, a1)
        g_b2 = np.add.reduce(dz2, axis=0)
        da1 = np.einsum("bo,oh->bh", dz2, w2)
        if self.task == "regression":
            dz1 = da1 * (1.0 - a1 * a1)
        else:
            dz1 = da1 * a1 * (1.0 - a1)
        g_w1 = np.einsum("bh,bi->hi", dz1, xb)
        g_b1 = np.add.reduce(dz1, axis=0)

        grad = np.empty(self.dim)
        grad[self._slices[0]] = g_w1.ravel()
        grad[self._slices[1]] = g_b1
        grad[self._slices[2]] = g_w2.ravel()
        grad[self._slices[3]] = g_b2
        if g_tau is not None:
            grad[self._slices[4]] = g_tau
        return grad

    # -- prior -------------------------------------------------------------

    def log_prior(self, w):
        w = np.asarray(w, dtype=np.float64)
        net = w[: self.n_weights]
        lp = float(
            -0.5 * np.dot(net, net) / self.prior_var
            - 0.5 * self.n_weights * math.log(2 * math.pi * self.prior_var)
        )
        if self.task == "regression":
            tau = w[-1]
            # Gamma(shape, rate) on exp(tau) plus the log |d gamma / d tau| Jacobian
            lp += GAMMA_SHAPE * tau - GAMMA_RATE * math.exp(tau) + _LOG_GAMMA_CONST
        return lp

    def grad_log_prior(self, w):
        w = np.asarray(w, dtype=np.float64)
        grad = np.zeros(self.dim)
        grad[: self.n_weights] = -w[: self.n_weights] / self.prior_var
        if self.task == "regression":
            grad[-1] = GAMMA_SHAPE - GAMMA_RATE * math.exp(w[-1])
        return grad

    # -- prediction ----------------------------------------------------------

    def predict(self, w, inputs):
        """(B, out) predictions; softmax probabilities for classification."""
        return self.forward(w, inputs)

    def noise_precision(self, w) -> float:
        if self.task != "regression":
            raise ConfigError("noise precision only exists for regression")
        return math.exp(float(np.asarray(w)[-1]))


def _softmax(z):
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    return e / np.add.reduce(e, axis=1, keepdims=True)


def _logsumexp_rows(z):
    m = z.max(axis=1, keepdims=True)
    return m + np.log(np.add.reduce(np.exp(z - m), axis=1, keepdims=True))
