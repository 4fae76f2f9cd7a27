"""Experiment harness: configs, runners, outputs and the CLI."""

from .config import ExperimentSpec, config_hash, load_config, parse_config, preset
from .experiments import (
    LinearFit,
    ResourceModel,
    linear_fit,
    resource_report,
    run_ff_curve,
    run_montecarlo,
    run_relu_curve,
    run_trace,
)

__all__ = [
    "ExperimentSpec",
    "config_hash",
    "load_config",
    "parse_config",
    "preset",
    "LinearFit",
    "ResourceModel",
    "linear_fit",
    "resource_report",
    "run_ff_curve",
    "run_montecarlo",
    "run_relu_curve",
    "run_trace",
]
