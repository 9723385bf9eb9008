"""Cycle-level TCD-NPE simulator: memories, distribution network, controller."""

from .cast import CastPattern, make_cast_pattern
from .engine import Dataflow, EngineCounters, ModelRun, NpeEngine, ScheduleMismatch, run_model, sum_counters
from .memory import (
    LayerDoesNotFit,
    MemGeometry,
    MemImage,
    WeightLayout,
    feature_rows,
    layout_features,
    layout_weights,
    read_features,
    read_weights,
    weight_block_rows,
)
from .rlc import RlcError, rlc_decode, rlc_encode

__all__ = [
    "CastPattern", "Dataflow", "EngineCounters", "LayerDoesNotFit", "MemGeometry", "MemImage",
    "ModelRun", "NpeEngine", "RlcError", "ScheduleMismatch", "WeightLayout", "feature_rows",
    "layout_features", "layout_weights", "make_cast_pattern", "read_features", "read_weights",
    "rlc_decode", "rlc_encode", "run_model", "sum_counters", "weight_block_rows",
]
