"""Experiment harness: configuration, orchestration, file I/O and the CLI."""

from .analyze import AnalysisSpec, analyze
from .experiment import ExperimentSpec, ReplayReport, replay_check, run
from .io import load_checkpoint, save_checkpoint

__all__ = ["AnalysisSpec", "ExperimentSpec", "ReplayReport", "analyze",
           "load_checkpoint", "replay_check", "run", "save_checkpoint"]
