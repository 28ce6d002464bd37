"""Online particle-based variational inference toolkit.

Particle samplers (online kernelized flow, SVGD, SGLD), a projected
online MAP baseline, batch-size / prior-weight / step-size schedules,
gradient-error diagnostics, and a deterministic experiment harness.
"""
from opvi.core import (
    ConfigError,
    NumericError,
    OpviError,
    ParticleEnsemble,
    RngStream,
    RoundTrace,
    TargetModel,
    ensemble_mean,
    init_ensemble,
)
from opvi.kernels import KernelSpec, kernel_eval, kernel_grad_x, median_bandwidth
from opvi.samplers import (
    MapState,
    SamplerConfig,
    online_map_step,
    opvi_step,
    project_ball,
    sgld_step,
    svgd_step,
)
from opvi.schedules import (
    BatchSpec,
    PriorWeightSpec,
    SchedulePack,
    StepSpec,
    batch_size,
    fitds_plan,
    prior_weight,
    step_size,
)
from opvi.stream import StreamPlan, next_batch, stream_audit
from opvi.metrics import (
    ErrorBudget,
    RegretLedger,
    dynamic_regret_update,
    energy_distance,
    gradient_error,
    predictive_metrics,
    sublinearity_exponent,
    validate_fpc_variance,
)

__version__ = "0.1.0"
