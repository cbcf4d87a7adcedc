"""Synthetic data, coverage experiments, trajectory ingestion, and reporting."""

from .experiment import (
    CoverageReport,
    ExperimentConfig,
    load_config,
    run_coverage_experiment,
    write_report,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .trajio import ingest_trajectories, write_trajectories

__all__ = [
    "CoverageReport",
    "ExperimentConfig",
    "load_config",
    "run_coverage_experiment",
    "write_report",
    "SyntheticSpec",
    "generate_synthetic",
    "ingest_trajectories",
    "write_trajectories",
]
