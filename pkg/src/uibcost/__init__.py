"""Analytic cost, roofline latency and architecture search for UIB-based mobile networks."""

__version__ = "0.1.0"

from .cost import CostReport, DTYPES, attention_delta, kv_downsample_delta, network_cost
from .ir import (
    UIB,
    AvgPool,
    ChannelMismatch,
    Conv2D,
    Dense,
    DWConv,
    FusedIB,
    IRError,
    MobileMQA,
    NetworkSpec,
    TensorShape,
    ValidationError,
    propagate_shapes,
)
from .metrics import arith_mean_normalized, dominates, geo_mean, geo_mean_normalized, pareto_front
from .roofline import HardwareTarget, fit_ridge_point, predict_latency, spearman, sweep_ridge_points
from .zoo import REGISTRY, build_mnv4, lookup

__all__ = [
    "AvgPool", "ChannelMismatch", "Conv2D", "CostReport", "DTYPES", "DWConv", "Dense", "FusedIB",
    "HardwareTarget", "IRError", "MobileMQA", "NetworkSpec", "REGISTRY", "TensorShape", "UIB",
    "ValidationError", "arith_mean_normalized", "attention_delta", "build_mnv4", "dominates",
    "fit_ridge_point", "geo_mean", "geo_mean_normalized", "kv_downsample_delta", "lookup",
    "network_cost", "pareto_front", "predict_latency", "propagate_shapes", "spearman",
    "sweep_ridge_points",
]
