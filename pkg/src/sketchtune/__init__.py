"""sketchtune: sketch-and-precondition least squares with a surrogate autotuner.

The library covers the full loop: synthetic problem generation and
diagnostics, sparse sketching operators (SJLT / LessUniform), preconditioned
LSQR and gradient-descent solvers, the timed/penalized tuning objective, GP
surrogate Bayesian tuning, bandit+multitask transfer learning, Sobol
sensitivity analysis, and a grid-sweep landscape harness.
"""

from .history import EvaluationRecord, HistoryStore, load_history, record_key
from .gridsearch import GridSpec, GridResult, LandscapeRow, build_landscape, run_grid, write_landscape_csv
from .objective import (
    DegenerateResidualError,
    ReferenceRunError,
    ReferenceResult,
    compute_arfe,
    evaluate,
    run_reference,
)
from .params import (
    Configuration,
    ConstantParams,
    PARAMETER_NAMES,
    TaskDescriptor,
    TuningSpace,
    decode,
    decode_ordinals,
    encode,
    encode_ordinals,
    lhs_sample,
    lhs_unit_design,
    load_tuning_description,
    save_tuning_description,
    validate_config,
)
from .problems import (
    GENERATOR_KINDS,
    LsProblem,
    MatrixDiagnostics,
    RankDeficiencyError,
    diagnostics,
    direct_solve,
    generate_problem,
    load_problem,
    planted_signal,
    problem_from_text,
    save_problem,
    task_descriptor,
)
from .sensitivity import (
    SaltelliDesign,
    SensitivityReport,
    analyze_tuning,
    saltelli_sample,
    sobol_indices,
)
from .sketching import SKETCH_KINDS, SketchOperator, apply, apply_vector, sample_operator
from .solvers import (
    Preconditioner,
    PreconditionerError,
    SolveFailure,
    SolveReport,
    SolverSettings,
    Termination,
    build_preconditioner,
    lsqr,
    pgd,
    presolve,
    settings_from_config,
    solve_sap,
)
from .surrogate import (
    GpModel,
    LcmModel,
    ReplayMismatchError,
    TunerState,
    acquire,
    expected_improvement,
    gp_fit,
    gp_predict,
    lcm_fit,
    lcm_predict,
    predicted_objective_seconds,
    random_search,
    tune,
    write_session_csv,
)
from .transfer import (
    CategoryCell,
    TlaState,
    cell_rewards,
    source_best_config,
    tla_tune,
    ucb_scores,
    ucb_select,
)

__version__ = "0.1.0"
