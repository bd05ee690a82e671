"""Anytime decision-tree policies for influence diagrams, with an empirical
value-of-computation layer."""

from .diagram import (
    Context,
    DiagramError,
    InfluenceDiagram,
    Policy,
    PolicyLeaf,
    PolicySplit,
    PolicyTree,
    ValueLeaf,
    ValueSplit,
    Variable,
    diagram_from_json,
    diagram_to_json,
    enumerate_leaves,
    eval_value_tree,
    policy_from_json,
    policy_to_json,
    validate,
)
from .inference import (
    ActionValuation,
    SolveCapExceeded,
    SolveResult,
    action_valuation,
    context_probability,
    eval_policy,
    solve_optimal,
)
from .refinement import (
    RefinementEngine,
    RefinementProfile,
    RefinementStep,
    heuristic_H,
    initial_policy,
    refinable_contexts,
    refine_leaf,
    run_refinement,
)
from .generators import (
    Grid,
    MazeSpec,
    OneIdSpec,
    generate_1id,
    generate_corpus,
    generate_maze,
    parse_grid,
)
from .metamodel import (
    ControllerTrace,
    CostModel,
    MetaModel,
    TrainingPoint,
    comprehensive_profile,
    extract_training_point,
    fit_polynomial,
    latent_value,
    predict_ev_star,
    run_controller,
    step_cost,
)
from .estimators import (
    InformationRefinement,
    PolynomialSurface,
    RefinementController,
)

__version__ = "0.1.0"

__all__ = [
    "ActionValuation",
    "Context",
    "ControllerTrace",
    "CostModel",
    "DiagramError",
    "Grid",
    "InfluenceDiagram",
    "InformationRefinement",
    "MazeSpec",
    "MetaModel",
    "OneIdSpec",
    "Policy",
    "PolicyLeaf",
    "PolicySplit",
    "PolicyTree",
    "PolynomialSurface",
    "RefinementController",
    "RefinementEngine",
    "RefinementProfile",
    "RefinementStep",
    "SolveCapExceeded",
    "SolveResult",
    "TrainingPoint",
    "ValueLeaf",
    "ValueSplit",
    "Variable",
    "action_valuation",
    "comprehensive_profile",
    "context_probability",
    "diagram_from_json",
    "diagram_to_json",
    "enumerate_leaves",
    "eval_policy",
    "eval_value_tree",
    "extract_training_point",
    "fit_polynomial",
    "generate_1id",
    "generate_corpus",
    "generate_maze",
    "heuristic_H",
    "initial_policy",
    "latent_value",
    "parse_grid",
    "policy_from_json",
    "policy_to_json",
    "predict_ev_star",
    "refinable_contexts",
    "refine_leaf",
    "run_controller",
    "run_refinement",
    "solve_optimal",
    "step_cost",
    "validate",
]
