"""Cycle-level model of a large-kernel CNN accelerator with Z-flow dataflow and layer fusion."""

from .errors import (CapacityError, FusionCapacityError, GeometryError, HFShapeError, PlanError,
                     SchemaError, ShapeError, SimError, StrategyError)
from .netmodel import (AcceleratorConfig, Activation, BlockKind, BlockSpec, LayerKind, LayerSpec,
                       NetworkSpec, build_mbconv, build_pyconv_block, build_replk_block, macs_of)

__all__ = [
    "AcceleratorConfig", "Activation", "BlockKind", "BlockSpec", "LayerKind", "LayerSpec",
    "NetworkSpec", "build_mbconv", "build_pyconv_block", "build_replk_block", "macs_of",
    "CapacityError", "FusionCapacityError", "GeometryError", "HFShapeError", "PlanError",
    "SchemaError", "ShapeError", "SimError", "StrategyError",
]
