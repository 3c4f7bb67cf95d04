"""On-chip buffers, row tiling and the DRAM transfer model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import CapacityError, StrategyError
from .netmodel import AcceleratorConfig, BlockKind, BlockSpec, LayerSpec


class BufferId(str, enum.Enum):
    INPUT_A = "InputA"
    INPUT_B = "InputB"
    OUTPUT_A = "OutputA"
    OUTPUT_B = "OutputB"
    WEIGHT = "Weight"


INPUT_PAIR = (BufferId.INPUT_A, BufferId.INPUT_B)
OUTPUT_PAIR = (BufferId.OUTPUT_A, BufferId.OUTPUT_B)


class Strategy(str, enum.Enum):
    LAYER_BY_LAYER = "LayerByLayer"
    VF = "VF"
    HF = "HF"


class TransferKind(str, enum.Enum):
    LOAD_INPUT = "LoadInput"
    LOAD_WEIGHTS = "LoadWeights"
    STORE_OUTPUT = "StoreOutput"


def buffer_capacity(buf: BufferId, cfg: AcceleratorConfig) -> int:
    if buf in INPUT_PAIR:
        return cfg.input_buf_bytes
    if buf in OUTPUT_PAIR:
        return cfg.output_buf_bytes
    return cfg.weight_buf_bytes


@dataclass
class BufferState:
    """Occupancy of one buffer. Stepped by a single scheduler."""

    id: BufferId
    capacity_bytes: int
    occupied_bytes: int = 0
    resident: tuple | None = None  # (layer id, tile id, role)

    def fill(self, nbytes: int, resident: tuple | None = None) -> None:
        if nbytes > self.capacity_bytes:
            raise CapacityError(
                f"{self.id.value}: {nbytes} bytes exceed capacity {self.capacity_bytes}")
        self.occupied_bytes = nbytes
        self.resident = resident

    def release(self) -> None:
        self.occupied_bytes = 0
        self.resident = None


def make_buffers(cfg: AcceleratorConfig) -> dict[BufferId, BufferState]:
    return {b: BufferState(b, buffer_capacity(b, cfg)) for b in BufferId}


def transfer_latency(nbytes: int, cfg: AcceleratorConfig) -> int:
    """Fixed DMA latency plus bandwidth-limited streaming; empty transfers are free."""
    if nbytes < 0:
        raise ValueError("negative transfer size")
    if nbytes == 0:
        return 0
    return cfg.dram_fixed_latency_cycles + math.ceil(nbytes / cfg.dram_bytes_per_cycle)


@dataclass(frozen=True)
class TransferOp:
    kind: TransferKind
    bytes: int
    tile: int
    latency_cycles: int

    @classmethod
    def make(cls, kind: TransferKind, nbytes: int, tile: int, cfg: AcceleratorConfig) -> "TransferOp":
        return cls(kind, nbytes, tile, transfer_latency(nbytes, cfg))


@dataclass(frozen=True)
class TilePlan:
    """Row tiling of one layer. Whole rows and all input channels are buffered."""

    tix: int
    tif: int
    tiy: int
    toy: int
    tile_count: int
    halo_rows: int
    row_bands: tuple[tuple[int, int], ...] = field(default=())

    def input_rows(self, layer: LayerSpec, tile: int) -> tuple[int, int]:
        """Input rows ``[lo, hi)`` (unpadded, clipped) read by a tile, halo included."""
        lo, hi = self.row_bands[tile]
        return input_rows_for(layer, lo, hi)


def input_rows_for(layer: LayerSpec, lo: int, hi: int) -> tuple[int, int]:
    """Unpadded input rows needed for output rows ``[lo, hi)``."""
    if hi <= lo:
        return (0, 0)
    top = lo * layer.stride - layer.pad
    bottom = (hi - 1) * layer.stride - layer.pad + layer.nky
    return (max(top, 0), min(bottom, layer.niy))


def bands(total: int, size: int) -> tuple[tuple[int, int], ...]:
    return tuple((lo, min(lo + size, total)) for lo in range(0, total, size))


def choose_tiling(layer: LayerSpec, cfg: AcceleratorConfig) -> TilePlan:
    """Largest row tile that fits the input and output buffers."""
    row_bytes = layer.nix * layer.nif
    if row_bytes > cfg.input_buf_bytes:
        raise CapacityError(
            f"one input row ({row_bytes} bytes) exceeds the input buffer ({cfg.input_buf_bytes})")
    halo = max(layer.nky - layer.stride, 0)
    tiy = min(cfg.input_buf_bytes // row_bytes, layer.niy)
    if tiy == layer.niy:
        toy = layer.noy
    else:
        if tiy < layer.nky:
            raise CapacityError(
                f"input buffer holds {tiy} rows but the kernel spans {layer.nky}")
        toy = (tiy - layer.nky) // layer.stride + 1
    out_row_bytes = layer.nox * layer.nof
    if out_row_bytes > cfg.output_buf_bytes:
        raise CapacityError(
            f"one output row ({out_row_bytes} bytes) exceeds the output buffer")
    toy = min(toy, cfg.output_buf_bytes // out_row_bytes, layer.noy)
    if toy < layer.noy and toy >= cfg.poy:
        toy -= toy % cfg.poy  # keep row tiles aligned to the MAC array
    row_bands = bands(layer.noy, toy)
    return TilePlan(tix=layer.nix, tif=layer.nif, tiy=tiy, toy=toy,
                    tile_count=len(row_bands), halo_rows=halo if len(row_bands) > 1 else 0,
                    row_bands=row_bands)


def dram_traffic(item, strategy: Strategy | str) -> dict[str, int]:
    """Ideal DRAM bytes (no halo re-fetch) moved by an item under a strategy."""
    strategy = Strategy(strategy)
    if isinstance(item, LayerSpec):
        if strategy is not Strategy.LAYER_BY_LAYER:
            raise StrategyError(f"{strategy.value} needs a block, got a single layer")
        return {"input": item.input_bytes(), "weight": item.weight_bytes(),
                "output": item.output_bytes()}
    if not isinstance(item, BlockSpec):
        raise TypeError(f"expected LayerSpec or BlockSpec, got {type(item).__name__}")
    layers = item.layers
    weights = sum(l.weight_bytes() for l in layers)
    if strategy is Strategy.LAYER_BY_LAYER:
        return {"input": sum(l.input_bytes() for l in layers), "weight": weights,
                "output": sum(l.output_bytes() for l in layers)}
    if strategy is Strategy.VF:
        if item.kind is not BlockKind.BYPASS_BRANCH:
            raise StrategyError("VF applies to BypassBranch blocks")
        return {"input": layers[0].input_bytes(), "weight": weights,
                "output": layers[-1].output_bytes()}
    if item.kind is not BlockKind.MULTI_BRANCH:
        raise StrategyError("HF applies to MultiBranch blocks")
    return {"input": layers[0].input_bytes(), "weight": weights,
            "output": sum(l.output_bytes() for l in layers)}
