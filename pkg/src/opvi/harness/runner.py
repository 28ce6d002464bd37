"""Experiment driver: wires model + sampler + schedules + stream + metrics.

One run is one process; the per-round loop is wrapped in a BLAS thread
cap (OPVI_NUM_THREADS, default 1) so traces are reproducible regardless
of the host's thread configuration.
"""
from __future__ import annotations

import datetime
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from opvi.core import (
    ConfigError,
    NumericError,
    ParticleEnsemble,
    RngStream,
    RoundTrace,
    ensemble_mean,
    init_ensemble,
)
from opvi.harness.config import ExperimentConfig, config_echo
from opvi.kernels import KernelSpec
from opvi.metrics import (
    ErrorBudget,
    RegretLedger,
    dynamic_regret_update,
    energy_distance,
    gradient_error,
    predictive_metrics,
    sublinearity_exponent,
)
from opvi.models import (
    BnnModel,
    LinRegModel,
    MixtureModel,
    load_csv,
    mixture_generate,
    mixture_posterior_grid,
    synthetic_regression,
)
from opvi.models.data import synthetic_classification, train_test_split
from opvi.models.linreg import generate_linreg
from opvi.samplers import MapState, SamplerConfig, online_map_step, opvi_step, sgld_step, svgd_step
from opvi.schedules import BatchSpec, PriorWeightSpec, SchedulePack, StepSpec
from opvi.stream import StreamPlan, next_batch, stream_audit

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - threadpoolctl ships with the package deps
    import contextlib

    def threadpool_limits(limits=None):
        return contextlib.nullcontext()


TRACE_COLUMNS = [
    "t",
    "batch_size",
    "eta",
    "alpha",
    "grad_error",
    "objective",
    "regret_cum",
    "energy_dist",
    "rmse",
    "test_ll",
    "wallclock_ms",
]


@dataclass
class RunResult:
    config: ExperimentConfig
    trace: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    ensemble: ParticleEnsemble | None = None
    map_state: MapState | None = None
    out_dir: str | None = None


def thread_cap() -> int:
    raw = os.environ.get("OPVI_NUM_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"OPVI_NUM_THREADS must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ConfigError(f"OPVI_NUM_THREADS must be >= 1, got {cap}")
    return cap


def build_model(cfg: ExperimentConfig):
    """Instantiate the model named in the config; returns (model, test_set)."""
    data_rng = RngStream(cfg.resolved_data_seed())
    if cfg.model == "mixture":
        data = mixture_generate(cfg.n_data, cfg.mixture_theta1, cfg.mixture_theta2, data_rng)
        return MixtureModel(data=data), None
    if cfg.model == "linreg":
        return (
            generate_linreg(
                cfg.n_data, cfg.linreg_dim, data_rng,
                noise_var=cfg.linreg_noise_var, prior_var=cfg.linreg_prior_var,
            ),
            None,
        )
    task = "regression" if cfg.model == "bnn_regression" else "classification"
    if cfg.dataset is not None:
        x, y = load_csv(cfg.dataset, task=task)
    elif task == "regression":
        x, y = synthetic_regression(cfg.n_data, data_rng)
    else:
        x, y = synthetic_classification(cfg.n_data, data_rng)
    x_tr, y_tr, x_te, y_te = train_test_split(x, y, cfg.bnn_test_fraction, data_rng)
    model = BnnModel(X=x_tr, y=y_tr, hidden=cfg.bnn_hidden, task=task, prior_var=cfg.bnn_prior_var)
    return model, (x_te, y_te)


def build_schedules(cfg: ExperimentConfig, n_data: int) -> SchedulePack:
    batch = BatchSpec(kind=cfg.batch_schedule, size=cfg.batch_size, rho=cfg.batch_rho)
    prior = PriorWeightSpec(kind=cfg.prior_weight, horizon=cfg.rounds,
                            value=cfg.prior_weight_constant)
    step = StepSpec(kind=cfg.step_schedule, alpha0=cfg.step_alpha0, kappa=cfg.step_kappa)
    return SchedulePack(batch=batch, prior=prior, step=step, n_data=n_data)


def _init_spec(cfg: ExperimentConfig, dim: int):
    if cfg.init == "normal":
        return ("normal",)
    if cfg.init == "uniform":
        return ("uniform", cfg.init_low, cfg.init_high)
    point = np.array([float(tok) for tok in cfg.init_point.split(",")])
    if point.size != dim:
        raise ConfigError(f"init_point needs {dim} coordinates, got {point.size}")
    return ("point", point)


def _init_state(cfg, model, rng):
    """Initial ensemble (particle samplers) or MapState (online_map)."""
    if cfg.sampler == "online_map":
        w0 = init_ensemble(1, model.dim, _init_spec(cfg, model.dim), rng).positions[0]
        return None, MapState(w=w0, round=0)
    if cfg.model in ("bnn_regression", "bnn_classification") and cfg.init == "normal":
        gen = rng.generator("init")
        positions = np.stack([model.init_particle(gen) for _ in range(cfg.n_particles)])
        return ParticleEnsemble(positions=positions, round=0), None
    ens = init_ensemble(cfg.n_particles, model.dim, _init_spec(cfg, model.dim), rng)
    return ens, None


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> RunResult:
    """Execute the T-round loop and return (optionally writing) the artifacts.

    Output layout when a directory is requested: a fresh timestamped
    subdirectory containing resolved_config.txt, trace.csv, summary.txt
    and ensemble.csv (never overwrites an earlier run).
    """
    rng = RngStream(cfg.seed)
    model, test_set = build_model(cfg)
    sched = build_schedules(cfg, model.n_data)
    sampler_cfg = SamplerConfig(
        kind=cfg.sampler,
        diffusion_scale=None if math.isnan(cfg.diffusion_scale) else cfg.diffusion_scale,
        likelihood_scaling=cfg.likelihood_scaling,
        projection_radius=cfg.projection_radius,
    )
    kern = KernelSpec(bandwidth_mode=cfg.kernel_bandwidth, h=cfg.kernel_h)

    if cfg.fitds:
        sizes = sched.fitds_plan(cfg.rounds)
    else:
        sizes = [sched.batch_size(t) for t in range(1, cfg.rounds + 1)]
    plan = StreamPlan(mode=cfg.stream_mode, batch_sizes=sizes, n_data=model.n_data)

    grid = None
    reference = None
    if cfg.track_energy:
        grid = mixture_posterior_grid(
            model, resolution=cfg.grid_resolution,
            window=((cfg.grid_min, cfg.grid_max), (cfg.grid_min, cfg.grid_max)),
        )
        reference = grid.reference_sample(rng, cfg.reference_size)

    ensemble, state = _init_state(cfg, model, rng)
    budget = ErrorBudget() if cfg.track_grad_error else None
    ledger = RegretLedger() if cfg.track_regret else None
    trace: list[RoundTrace] = []
    emitted: list[int] = []
    seen = 0

    with threadpool_limits(limits=thread_cap()):
        for t in range(1, cfg.rounds + 1):
            t0 = time.perf_counter()
            batch = next_batch(plan, t, rng)
            emitted.append(len(batch))
            seen += len(batch)
            alpha_t = sched.step_size(t)
            eta_t = sched.prior_weight(t)
            effective_n = seen if cfg.seen_so_far else model.n_data

            step_model = model if effective_n == model.n_data \
                else _SeenSoFarView(model, effective_n)

            try:
                # non-finites abort the run via NumericError; don't warn first
                with np.errstate(over="ignore", invalid="ignore"):
                    ensemble, state = _dispatch_step(
                        cfg, sampler_cfg, kern, sched, step_model, ensemble, state,
                        batch, t, alpha_t, rng,
                    )
            except NumericError as exc:
                raise NumericError(f"run aborted at round {t}: {exc}") from exc

            row = RoundTrace(t=t, batch_size=len(batch), eta=eta_t, alpha=alpha_t)
            point = state.w if state is not None else None
            row.objective = _objective(model, ensemble, point, batch, eta_t, sampler_cfg)
            if budget is not None:
                probe = point if point is not None else ensemble_mean(ensemble)
                budget.record(gradient_error(model, probe, batch))
                row.grad_error = budget.eps[-1]
            if ledger is not None:
                probe = point if point is not None else ensemble_mean(ensemble)
                dynamic_regret_update(ledger, model, probe, t, eta_t)
                row.regret_cum = ledger.cumulative[-1]
            if reference is not None:
                row.energy_dist = energy_distance(ensemble.positions, reference)
            if test_set is not None and _eval_now(cfg, t):
                row.rmse, row.test_ll = predictive_metrics(ensemble, model, *test_set)
            if cfg.record_wallclock:
                row.wallclock_ms = (time.perf_counter() - t0) * 1e3
            trace.append(row)

    audit = stream_audit(plan, emitted)
    summary = _summarize(cfg, trace, audit, budget, ledger)
    result = RunResult(config=cfg, trace=trace, summary=summary,
                       ensemble=ensemble, map_state=state)
    target = out_dir if out_dir is not None else cfg.output_dir
    if target is not None:
        result.out_dir = _write_run(result, target)
    return result


class _SeenSoFarView:
    """Delegating view that rescales the unbiased estimator to the data seen so far."""

    def __init__(self, model, n_seen):
        self._model = model
        self.n_data = n_seen

    def __getattr__(self, name):
        return getattr(self._model, name)


def _dispatch_step(cfg, sampler_cfg, kern, sched, model, ensemble, state, batch, t, alpha_t, rng):
    if cfg.sampler == "opvi":
        ensemble = opvi_step(ensemble, model, batch, t, sched, sampler_cfg, kern)
    elif cfg.sampler == "svgd":
        ensemble = svgd_step(ensemble, model, batch, sampler_cfg, kern, alpha_t)
    elif cfg.sampler == "sgld":
        positions = np.stack([
            sgld_step(ensemble.positions[i], model, batch, alpha_t,
                      rng.generator("sgld", t, i), sampler_cfg)
            for i in range(ensemble.n_particles)
        ])
        ensemble = ParticleEnsemble(positions=positions, round=ensemble.round + 1)
    else:  # online_map
        state = online_map_step(state, model, batch, t, sched, sampler_cfg)
    return ensemble, state


def _objective(model, ensemble, point, batch, eta_t, sampler_cfg):
    """Stochastic per-round cost: scaled batch negative log-lik + weighted prior."""
    from opvi.samplers import likelihood_scale

    scale = likelihood_scale(sampler_cfg, model.n_data, len(batch))
    if point is not None:
        return float(-scale * model.batch_loglik_sum(point, batch)
                     - eta_t * model.log_prior(point))
    positions = ensemble.positions
    if hasattr(model, "ensemble_batch_loglik_sum"):
        liks = model.ensemble_batch_loglik_sum(positions, batch)
    else:
        liks = np.array([model.batch_loglik_sum(w, batch) for w in positions])
    priors = np.array([model.log_prior(w) for w in positions])
    return float(np.mean(-scale * liks - eta_t * priors))


def _eval_now(cfg, t) -> bool:
    if cfg.eval_every == -1:
        return False
    if cfg.eval_every == 0:
        return t == cfg.rounds
    return t % cfg.eval_every == 0 or t == cfg.rounds


def _summarize(cfg, trace, audit, budget, ledger) -> dict:
    from opvi import fieldops

    summary = {
        "rounds": len(trace),
        "audit": audit.detail,
        "audit_ok": audit.ok,
        "fieldops_backend": fieldops.BACKEND,
        "final_objective": trace[-1].objective if trace else None,
    }
    for name in ("rmse", "test_ll", "energy_dist", "grad_error", "regret_cum"):
        vals = [getattr(r, name) for r in trace if getattr(r, name) is not None]
        if vals:
            summary[f"final_{name}"] = vals[-1]
    if budget is not None:
        summary["error_budget_total"] = budget.total
        if len(budget.cumulative) >= 100:
            summary["error_budget_exponent"] = sublinearity_exponent(budget.cumulative)
    if ledger is not None and len(ledger.cumulative) >= 100:
        if all(v > 0 for v in ledger.cumulative[len(ledger.cumulative) // 2 - 1:]):
            summary["regret_exponent"] = sublinearity_exponent(ledger.cumulative)
        summary["path_variation"] = ledger.path_variation
    return summary


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def trace_to_csv_text(trace) -> str:
    """Deterministic CSV rendering; absent metrics are empty fields."""
    lines = [",".join(TRACE_COLUMNS)]
    for row in trace:
        lines.append(",".join(_fmt(getattr(row, col)) for col in TRACE_COLUMNS))
    return "\n".join(lines) + "\n"


def _write_run(result: RunResult, base_dir: str) -> str:
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    label = f"{result.config.model}-{result.config.sampler}-{stamp}"
    out = os.path.join(base_dir, label)
    os.makedirs(out, exist_ok=False)
    with open(os.path.join(out, "resolved_config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config_echo(result.config))
    with open(os.path.join(out, "trace.csv"), "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv_text(result.trace))
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        for key in sorted(result.summary):
            fh.write(f"{key} = {result.summary[key]}\n")
    points = result.ensemble.positions if result.ensemble is not None \
        else result.map_state.w[None, :]
    with open(os.path.join(out, "ensemble.csv"), "w", encoding="utf-8") as fh:
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return out
