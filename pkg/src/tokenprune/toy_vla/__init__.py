from .episodes import Episode, EpisodeConfig, TokenStream, generate_episode, suite_configs
from .layout import FeatureLayout
from .model import (
    ModelConfig,
    ToyModel,
    build_model,
    forward_full,
    forward_prefix,
    forward_pruned,
    forward_suffix,
)

__all__ = [
    "Episode",
    "EpisodeConfig",
    "FeatureLayout",
    "ModelConfig",
    "TokenStream",
    "ToyModel",
    "build_model",
    "forward_full",
    "forward_prefix",
    "forward_pruned",
    "forward_suffix",
    "generate_episode",
    "suite_configs",
]
