from .config import ExperimentConfig
from .results import ResultTable, ResultRow, emit_outputs
from .runners import (
    run_case_study,
    run_mask_compare,
    run_parse_eval,
    run_relations,
    run_verify_props,
)

__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "ResultRow",
    "emit_outputs",
    "run_case_study",
    "run_mask_compare",
    "run_parse_eval",
    "run_relations",
    "run_verify_props",
]
