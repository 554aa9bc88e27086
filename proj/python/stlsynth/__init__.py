"""Neural feedback controller synthesis for signal temporal logic."""

from ._stlsynth import (
    FormulaParseError,
    HorizonError,
    adapt,
    bool_sat,
    check_feasible,
    count_structural_variants,
    default_config,
    parse_format,
    robustness,
    rollout,
    run_cli,
    sample_spec,
    smooth_robustness,
    smooth_robustness_grad,
    spec_graph,
    tokenize,
    train,
    unicycle_step,
)

__all__ = [
    "FormulaParseError",
    "HorizonError",
    "adapt",
    "bool_sat",
    "check_feasible",
    "count_structural_variants",
    "default_config",
    "parse_format",
    "robustness",
    "rollout",
    "run_cli",
    "sample_spec",
    "smooth_robustness",
    "smooth_robustness_grad",
    "spec_graph",
    "tokenize",
    "train",
    "unicycle_step",
]
