"""Experiment orchestration, configuration, reporting, and the CLI."""

from .config import ExperimentConfig, hash_config, load_config, parse_config
from .report import ExperimentReport, Table, emit_report, validate_report
from .runs import (
    DataBundle,
    build_bundle,
    explain_representatives,
    run_consistency,
    run_disagreement,
    run_faithfulness,
    select_representative,
)

__all__ = [
    "DataBundle",
    "ExperimentConfig",
    "ExperimentReport",
    "Table",
    "build_bundle",
    "emit_report",
    "explain_representatives",
    "hash_config",
    "load_config",
    "parse_config",
    "run_consistency",
    "run_disagreement",
    "run_faithfulness",
    "select_representative",
    "validate_report",
]
