"""Saliency-forecast visual token pruning on a toy vision-language-action model."""

from .errors import ConfigError, ContractError
from .pipeline import BatchReport, PipelineVariant, StepTrace, run_batch, run_episode
from .pruner import PrunerConfig

__version__ = "0.1.0"

__all__ = [
    "BatchReport",
    "ConfigError",
    "ContractError",
    "PipelineVariant",
    "PrunerConfig",
    "StepTrace",
    "run_batch",
    "run_episode",
]
