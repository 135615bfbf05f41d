"""Extra-step solvers for monotone variational inequalities, with
interchangeable gradient-estimation strategies, problem generators, and a
verification suite for the estimator contracts."""

from .core import FREE, ProxSpec, RngStream, Vector, project_simplex, prox_eval, rng_stream
from .estimators import (
    AssumptionConstants,
    CostLedger,
    EstimatorKind,
    EstimatorState,
    Quantizer,
    assumption_constants,
    constants_for_problem,
    coord,
    est_pair,
    fulldet,
    importance,
    importance_weights,
    init_estimator,
    local,
    noisy,
    optimal_tau,
    past,
    quant,
    quantize,
    qvr,
    snapshot_update,
    vr,
)
from .metrics import (
    CheckRow,
    GapReport,
    VerificationReport,
    distance_to_solution,
    duality_gap_bilinear,
    restricted_gap_ball,
    restricted_gap_bruteforce,
    verify_assumption2,
    verify_unbiasedness,
)
from .problems import (
    BilinearGame,
    MixingVI,
    QuadraticOperator,
    VIProblem,
    cell_distance,
    estimate_lipschitz,
    eval_component,
    eval_full,
    gen_mixing_vi,
    gen_policeman_burglar,
    gen_quadratic_vi,
    initial_point,
    random_feasible,
    wealth_base,
)
from .solver import (
    RunTrace,
    SolverConfig,
    averaged_iterate,
    iterate_once,
    lyapunov_value,
    run_solver,
    step_size_bound,
)

__version__ = "0.1.0"

__all__ = [
    "FREE",
    "ProxSpec",
    "RngStream",
    "Vector",
    "project_simplex",
    "prox_eval",
    "rng_stream",
    "AssumptionConstants",
    "CostLedger",
    "EstimatorKind",
    "EstimatorState",
    "Quantizer",
    "assumption_constants",
    "constants_for_problem",
    "coord",
    "est_pair",
    "fulldet",
    "importance",
    "importance_weights",
    "init_estimator",
    "local",
    "noisy",
    "optimal_tau",
    "past",
    "quant",
    "quantize",
    "qvr",
    "snapshot_update",
    "vr",
    "CheckRow",
    "GapReport",
    "VerificationReport",
    "distance_to_solution",
    "duality_gap_bilinear",
    "restricted_gap_ball",
    "restricted_gap_bruteforce",
    "verify_assumption2",
    "verify_unbiasedness",
    "BilinearGame",
    "MixingVI",
    "QuadraticOperator",
    "VIProblem",
    "cell_distance",
    "estimate_lipschitz",
    "eval_component",
    "eval_full",
    "gen_mixing_vi",
    "gen_policeman_burglar",
    "gen_quadratic_vi",
    "initial_point",
    "random_feasible",
    "wealth_base",
    "RunTrace",
    "SolverConfig",
    "averaged_iterate",
    "iterate_once",
    "lyapunov_value",
    "run_solver",
    "step_size_bound",
    "__version__",
]
