"""Margin-based risk minimization with worst-case-labeling safety machinery.

The package covers the full pipeline: margin losses, supervised and
responsibility-weighted semi-supervised risks, recovery of the supervised
solution from soft labels, worst-case labeling adversaries, and the
pessimistic minimax learner with its closed-form quadratic specialization.
"""

from .losses import (
    BUILTIN_LOSS_NAMES,
    LossKind,
    LossSpec,
    custom_loss,
    eval_deriv,
    eval_loss,
    get_loss,
    validate_loss,
)
from .optimize import (
    BoxLsqResult,
    SolverConfig,
    box_lsq,
    check_gradient,
    minimize_convex,
    project_box,
)
from .risk import (
    LabeledDataset,
    RiskConfig,
    UnlabeledDataset,
    as_responsibilities,
    concat_hard_labels,
    fit_semi,
    fit_supervised,
    risk_difference,
    semi_risk,
    semi_risk_grad,
    supervised_grad,
    supervised_risk,
)
from .responsibility import (
    FeasibilityRule,
    FeasibilityVerdict,
    PerObjectOutcome,
    RecoveryObject,
    RecoveryResult,
    in_constraint_set,
    outside_margin_condition,
    quadratic_improvement_condition,
    recover_q,
)
from .safe_learner import (
    AdversaryResult,
    MinimaxResult,
    QNewResult,
    adversary_max,
    construct_qnew,
    minimax_fit,
    minimax_fit_quadratic,
)
from .workbench import (
    ExperimentConfig,
    Report,
    SyntheticSpec,
    generate_outside_margin,
    generate_synthetic,
    load_csv,
    run_suite,
    write_csv,
)

__all__ = [
    "BUILTIN_LOSS_NAMES",
    "LossKind",
    "LossSpec",
    "custom_loss",
    "eval_deriv",
    "eval_loss",
    "get_loss",
    "validate_loss",
    "BoxLsqResult",
    "SolverConfig",
    "box_lsq",
    "check_gradient",
    "minimize_convex",
    "project_box",
    "LabeledDataset",
    "RiskConfig",
    "UnlabeledDataset",
    "as_responsibilities",
    "concat_hard_labels",
    "fit_semi",
    "fit_supervised",
    "risk_difference",
    "semi_risk",
    "semi_risk_grad",
    "supervised_grad",
    "supervised_risk",
    "FeasibilityRule",
    "FeasibilityVerdict",
    "PerObjectOutcome",
    "RecoveryObject",
    "RecoveryResult",
    "in_constraint_set",
    "outside_margin_condition",
    "quadratic_improvement_condition",
    "recover_q",
    "AdversaryResult",
    "MinimaxResult",
    "QNewResult",
    "adversary_max",
    "construct_qnew",
    "minimax_fit",
    "minimax_fit_quadratic",
    "ExperimentConfig",
    "Report",
    "SyntheticSpec",
    "generate_outside_margin",
    "generate_synthetic",
    "load_csv",
    "run_suite",
    "write_csv",
]

__version__ = "0.1.0"
