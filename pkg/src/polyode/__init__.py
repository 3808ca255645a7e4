"""polyode: polynomial ODE tensor encodings, multi-copy mean-field dynamics,
and history-state block solvers, with a verification-experiment harness."""

__version__ = "0.1.0"

from .encoding import (
    AugmentedSystem,
    Monomial,
    OdeSystemSpec,
    SpecError,
    augment_constant,
    encode,
    eval_f_direct,
    eval_f_tensor,
    load_spec,
    norm_closure,
    spec_from_json,
    taylor_inv_sqrt,
)
from .meanfield import (
    DensityMatrix,
    MultiCopyState,
    ResourceCapError,
    apply_generator,
    effective_generator,
    evolve_exact,
    product_state,
    reduce_site,
    trace_distance,
    trotter_step,
)
from .history import (
    BlockSystemSpec,
    HistoryState,
    apply_M,
    build_rhs,
    condition_estimate,
    forward_solve,
    matrix_step_system,
    multicopy_step_system,
    reduced_history_site,
)
from .reference import (
    StabilityReport,
    Trajectory,
    energy_scale,
    euler_forward,
    rk4_oracle,
    stability_margin,
    stability_report,
)
from .experiments import (
    ExperimentConfig,
    ScalingReport,
    generator_discrimination,
    overlap_fraction,
    run_example,
    scaling_vs_dt,
    scaling_vs_n,
)
from .systems import builtin_spec, quad2_system, resolve_system

__all__ = [
    "__version__",
    "AugmentedSystem",
    "Monomial",
    "OdeSystemSpec",
    "SpecError",
    "augment_constant",
    "encode",
    "eval_f_direct",
    "eval_f_tensor",
    "load_spec",
    "norm_closure",
    "spec_from_json",
    "taylor_inv_sqrt",
    "DensityMatrix",
    "MultiCopyState",
    "ResourceCapError",
    "apply_generator",
    "effective_generator",
    "evolve_exact",
    "product_state",
    "reduce_site",
    "trace_distance",
    "trotter_step",
    "BlockSystemSpec",
    "HistoryState",
    "apply_M",
    "build_rhs",
    "condition_estimate",
    "forward_solve",
    "matrix_step_system",
    "multicopy_step_system",
    "reduced_history_site",
    "StabilityReport",
    "Trajectory",
    "energy_scale",
    "euler_forward",
    "rk4_oracle",
    "stability_margin",
    "stability_report",
    "ExperimentConfig",
    "ScalingReport",
    "generator_discrimination",
    "overlap_fraction",
    "run_example",
    "scaling_vs_dt",
    "scaling_vs_n",
    "builtin_spec",
    "quad2_system",
    "resolve_system",
]
