"""Residual-based rank-preserving warping for causal fair machine learning."""

from .causal_graph import CausalGraph, VariableSpec, WarpPlan, build_warp_plan, graph_from_lists, warp_set
from .glm import GlmFit, fit, predict_mean
from .warp import WarpModel, fit_warp_models, warp_features, warp_observation, warp_training

__version__ = "0.1.0"

__all__ = [
    "CausalGraph",
    "VariableSpec",
    "WarpPlan",
    "build_warp_plan",
    "graph_from_lists",
    "warp_set",
    "GlmFit",
    "fit",
    "predict_mean",
    "WarpModel",
    "fit_warp_models",
    "warp_features",
    "warp_observation",
    "warp_training",
]
