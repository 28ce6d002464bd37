"""Flat key = value experiment configs with typed, fail-fast validation.

Unknown keys are hard errors (a misspelled schedule name must not
silently fall back to a default). Every numeric bound is checked before
the run starts.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

from opvi.core import ConfigError

_MODELS = ("mixture", "linreg", "bnn_regression", "bnn_classification")
_SAMPLERS = ("opvi", "svgd", "sgld", "online_map")


@dataclass
class ExperimentConfig:
    # model and data
    model: str = "mixture"
    dataset: str | None = None
    n_data: int = 10000
    data_seed: int | None = None
    mixture_theta1: float = 0.0
    mixture_theta2: float = 1.0
    linreg_dim: int = 5
    linreg_noise_var: float = 1.0
    linreg_prior_var: float = 1.0
    bnn_hidden: int = 50
    bnn_prior_var: float = 1.0
    bnn_test_fraction: float = 0.1
    # sampler
    sampler: str = "opvi"
    n_particles: int = 100
    seed: int = 0
    init: str = "normal"  # normal | uniform | point
    init_low: float = -1.0
    init_high: float = 1.0
    init_point: str = ""  # comma-separated coordinates
    diffusion_scale: float = float("nan")  # nan = sampler default
    likelihood_scaling: str = "unbiased"
    projection_radius: float = math.inf
    kernel_bandwidth: str = "median"  # median | fixed
    kernel_h: float = 1.0
    # schedules
    rounds: int = 500
    batch_schedule: str = "power"  # static | power | saturating | full
    batch_size: int = 20
    batch_rho: float = 0.55
    fitds: bool = True
    prior_weight: str = "paper"  # paper | uniform | constant
    prior_weight_constant: float = 1.0
    step_schedule: str = "constant"  # constant | decaying
    step_alpha0: float = 0.05
    step_kappa: float = 0.55
    # stream
    stream_mode: str = "shuffled"  # shuffled | sequential
    seen_so_far: bool = False
    # diagnostics
    track_grad_error: bool = False
    track_regret: bool = False
    track_energy: bool = False
    grid_resolution: int = 400
    grid_min: float = -3.0
    grid_max: float = 3.0
    reference_size: int = 1000
    eval_every: int = 0  # 0 = final round only; -1 = never
    record_wallclock: bool = False
    output_dir: str | None = None

    def resolved_data_seed(self) -> int:
        return self.seed if self.data_seed is None else self.data_seed


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines; # starts a comment; blank lines ignored."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key: str, value: str):
    target = _FIELD_TYPES[key]
    if value == "" and target in ("int | None", "str | None"):
        return None
    if target in ("bool",):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if target in ("int", "int | None"):
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc
    if target == "float":
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {value!r}") from exc
    return value  # str and str | None


def resolve_config(raw: dict[str, str], base_dir: str = ".") -> ExperimentConfig:
    """Validate raw key/values into a typed config; unknown keys are errors."""
    unknown = sorted(set(raw) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = ExperimentConfig()
    for key, value in raw.items():
        setattr(cfg, key, _convert(key, value))
    _validate(cfg, base_dir)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    return resolve_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def _validate(cfg: ExperimentConfig, base_dir: str):
    def check(cond, msg):
        if not cond:
            raise ConfigError(msg)

    check(cfg.model in _MODELS, f"model must be one of {_MODELS}, got {cfg.model!r}")
    check(cfg.sampler in _SAMPLERS, f"sampler must be one of {_SAMPLERS}, got {cfg.sampler!r}")
    check(cfg.rounds >= 1, "rounds must be >= 1")
    check(cfg.n_particles >= 1, "n_particles must be >= 1")
    check(cfg.seed >= 0, "seed must be nonnegative")
    check(cfg.n_data >= 1, "n_data must be >= 1")
    check(cfg.batch_schedule in ("static", "power", "saturating", "full"),
          f"unknown batch_schedule {cfg.batch_schedule!r}")
    check(cfg.batch_size >= 1, "batch_size must be >= 1")
    check(cfg.batch_rho > 0, "batch_rho must be positive")
    check(cfg.prior_weight in ("paper", "uniform", "constant"),
          f"unknown prior_weight {cfg.prior_weight!r}")
    check(0 < cfg.prior_weight_constant <= 1, "prior_weight_constant must lie in (0, 1]")
    check(cfg.step_schedule in ("constant", "decaying"),
          f"unknown step_schedule {cfg.step_schedule!r}")
    check(cfg.step_alpha0 > 0, "step_alpha0 must be positive")
    check(cfg.kernel_bandwidth in ("median", "fixed"),
          f"unknown kernel_bandwidth {cfg.kernel_bandwidth!r}")
    check(cfg.kernel_h > 0, "kernel_h must be positive")
    check(math.isnan(cfg.diffusion_scale) or cfg.diffusion_scale >= 0,
          "diffusion_scale must be nonnegative")
    check(cfg.likelihood_scaling in ("unbiased", "paper_literal"),
          f"unknown likelihood_scaling {cfg.likelihood_scaling!r}")
    check(cfg.projection_radius > 0, "projection_radius must be positive (inf = unbounded)")
    check(cfg.stream_mode in ("shuffled", "sequential"),
          f"unknown stream_mode {cfg.stream_mode!r}")
    check(cfg.init in ("normal", "uniform", "point"), f"unknown init {cfg.init!r}")
    if cfg.init == "uniform":
        check(cfg.init_low < cfg.init_high, "init_low must be < init_high")
    if cfg.init == "point":
        check(bool(cfg.init_point.strip()), "init = point needs init_point coordinates")
        for tok in cfg.init_point.split(","):
            try:
                float(tok)
            except ValueError as exc:
                raise ConfigError(f"init_point: non-numeric coordinate {tok!r}") from exc
    check(cfg.grid_resolution >= 2, "grid_resolution must be >= 2")
    check(cfg.grid_min < cfg.grid_max, "grid_min must be < grid_max")
    check(cfg.reference_size >= 1, "reference_size must be >= 1")
    check(cfg.eval_every >= -1, "eval_every must be >= -1")
    check(0 < cfg.bnn_test_fraction < 1, "bnn_test_fraction must lie in (0, 1)")
    check(cfg.bnn_hidden >= 1, "bnn_hidden must be >= 1")
    check(cfg.linreg_dim >= 1, "linreg_dim must be >= 1")
    check(cfg.linreg_noise_var > 0 and cfg.linreg_prior_var > 0,
          "linreg variances must be positive")
    check(cfg.bnn_prior_var > 0, "bnn_prior_var must be positive")
    check(cfg.mixture_theta2 is not None, "mixture_theta2 required")

    if cfg.track_regret:
        check(cfg.model == "linreg", "track_regret needs the linreg model (closed-form oracle)")
    if cfg.track_energy:
        check(cfg.model == "mixture", "track_energy needs the 2-d mixture model")
    if cfg.seen_so_far:
        check(cfg.stream_mode == "sequential", "seen_so_far only makes sense in sequential mode")
    if cfg.dataset is not None:
        check(cfg.model in ("bnn_regression", "bnn_classification"),
              "dataset files are only supported for the BNN models")
        path = cfg.dataset
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        check(os.path.isfile(path), f"dataset file not found: {path}")
        cfg.dataset = path
    if cfg.fitds:
        check(cfg.n_data >= cfg.rounds,
              f"infeasible FITDS budget: n_data={cfg.n_data} < rounds={cfg.rounds}")


def config_echo(cfg: ExperimentConfig) -> str:
    """Canonical resolved-config text (sorted keys, one per line)."""
    lines = []
    for f in sorted(fields(ExperimentConfig), key=lambda f: f.name):
        value = getattr(cfg, f.name)
        if value is None:
            value = ""
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
