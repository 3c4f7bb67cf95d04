"""Exception types raised by the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class GeometryError(SimError):
    """Receptive field does not fit the padded input."""


class ShapeError(SimError):
    """Tensor or channel dimensions are inconsistent."""


class PlanError(SimError):
    """A dataflow plan was requested outside its supported envelope."""


class CapacityError(SimError):
    """A layer cannot run because on-chip buffers are too small."""


class FusionCapacityError(CapacityError):
    """Fused intermediates or weights do not fit the on-chip buffers."""


class StrategyError(SimError):
    """Execution strategy does not apply to the given item."""


class HFShapeError(ShapeError):
    """Branches of a multi-branch block cannot be horizontally fused."""


class SchemaError(SimError):
    """Network description does not follow the JSON schema."""
