"""Risk-adaptive decision rules for parametric moving-target search."""

from .backend import active as active_backend, select as select_backend
from .bounds import (
    BoundInputs,
    constant_pattern_condition,
    diameter,
    direct_rule_bound,
    kappa0,
    lower_bound_certificate,
    mdr_amdr_bound,
)
from .datagen import (
    DataSpec,
    generate,
    load_points,
    save_points,
    shrinking_uniform,
    simplex_beta,
    simplex_uniform,
)
from .errors import (
    DegenerateLPError,
    DomainError,
    GenerationStallError,
    InfeasibleError,
    RankDeficientError,
    RiskRulesError,
    SizeError,
    StructuralError,
)
from .exactsolver import (
    SolveResult,
    brute_force,
    count_paths,
    emit_milp,
    emit_training_milp,
    milp_assignment,
    milp_filename,
    solve_exact,
)
from .lpformat import LPFile, constraint_violations, evaluate_objective, parse_lp
from .probspace import (
    DiscreteRV,
    FiniteProbSpace,
    RiskSpec,
    evaluate_risk,
    expectation,
    quantile,
    superquantile,
    worst_case,
)
from .rules import (
    AffineRule,
    ConstantRule,
    MarginSpec,
    TabularRule,
    amdr,
    bigM_equivalence_check,
    heaviside,
    in_margin_set,
    margin_flags,
    mdr,
    rule_from_json,
    rule_to_json,
)
from .searchmodel import (
    Grid,
    SearchInstance,
    build_instance,
    check_parameter,
    detect_counts,
    detection_rate,
    feasible,
    fixed_rng,
    gen_scenarios,
    load_instance,
    nondetect_prob,
    path_to_y,
    qvec,
    save_instance,
    structurally_feasible,
    y_to_path,
)
from .simplex import LPResult, SeparationResult, StandardLP, l1_separation, solve_lp
from .train import (
    DecompResult,
    TrainingConfig,
    decompose,
    recovery_check,
    training_objective,
)

__version__ = "0.1.0"
