"""Layer, block, network and accelerator descriptions.

Dimension names follow the usual accelerator convention: ``N*`` are loop
dimensions of a layer (``nix`` input width, ``nof`` output channels, ...),
``P*`` are unrolling factors of the MAC array.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import GeometryError, ShapeError


class LayerKind(str, enum.Enum):
    CONV = "CONV"
    DWCV = "DWCV"
    GROUP_CONV = "GroupCONV"


class Activation(str, enum.Enum):
    NONE = "None"
    RELU = "ReLU"


class BlockKind(str, enum.Enum):
    BYPASS_BRANCH = "BypassBranch"
    MULTI_BRANCH = "MultiBranch"


def out_dim(n_in: int, k: int, pad: int, stride: int) -> int:
    """Output extent of a padded, strided convolution along one axis."""
    if n_in + 2 * pad < k:
        raise GeometryError(
            f"kernel extent {k} exceeds padded input {n_in} + 2*{pad}")
    return (n_in + 2 * pad - k) // stride + 1


@dataclass(frozen=True)
class LayerSpec:
    """One convolution layer. ``nox``/``noy`` are always derived."""

    kind: LayerKind
    nix: int
    niy: int
    nif: int
    nof: int
    nkx: int
    nky: int
    stride: int = 1
    pad: int = 0
    group_num: int = 1
    activation: Activation = Activation.NONE
    requant_shift: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        object.__setattr__(self, "activation", Activation(self.activation))
        for name in ("nix", "niy", "nif", "nof", "nkx", "nky", "group_num"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ShapeError(f"{name} must be a positive integer, got {v!r}")
        if self.stride not in (1, 2):
            raise ShapeError(f"stride must be 1 or 2, got {self.stride}")
        if self.pad < 0 or self.requant_shift < 0:
            raise ShapeError("pad and requant_shift must be non-negative")
        if self.kind is LayerKind.DWCV:
            if self.nif != self.nof:
                raise ShapeError(f"DWCV needs nif == nof, got {self.nif} != {self.nof}")
            if self.group_num != 1:
                raise ShapeError("DWCV layers carry group_num=1")
        elif self.kind is LayerKind.CONV:
            if self.group_num != 1:
                raise ShapeError("CONV layers carry group_num=1; use GroupCONV")
        elif self.nif % self.group_num or self.nof % self.group_num:
            raise ShapeError(
                f"group_num={self.group_num} must divide nif={self.nif} and nof={self.nof}")
        # raises GeometryError
        out_dim(self.nix, self.nkx, self.pad, self.stride)
        out_dim(self.niy, self.nky, self.pad, self.stride)

    @property
    def nox(self) -> int:
        return out_dim(self.nix, self.nkx, self.pad, self.stride)

    @property
    def noy(self) -> int:
        return out_dim(self.niy, self.nky, self.pad, self.stride)

    @property
    def nif_group(self) -> int:
        return self.nif // self.group_num

    @property
    def nof_group(self) -> int:
        return self.nof // self.group_num

    @property
    def in_channels_per_output(self) -> int:
        """Input channels each output channel reduces over."""
        if self.kind is LayerKind.DWCV:
            return 1
        if self.kind is LayerKind.GROUP_CONV:
            return self.nif_group
        return self.nif

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.nif, self.niy, self.nix)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return (self.nof, self.noy, self.nox)

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.nof, self.in_channels_per_output, self.nky, self.nkx)

    def input_bytes(self) -> int:
        return self.nif * self.niy * self.nix

    def output_bytes(self) -> int:
        return self.nof * self.noy * self.nox

    def weight_bytes(self) -> int:
        return int(np.prod(self.weight_shape))


def derive_output_dims(layer: LayerSpec) -> tuple[int, int]:
    """Return ``(nox, noy)`` for a layer, validating the geometry."""
    return (out_dim(layer.nix, layer.nkx, layer.pad, layer.stride),
            out_dim(layer.niy, layer.nky, layer.pad, layer.stride))


def macs_of(layer: LayerSpec) -> int:
    """Multiply-accumulate count. GOPS counts two operations per MAC."""
    return (layer.nkx * layer.nky * layer.in_channels_per_output
            * layer.nox * layer.noy * layer.nof)


@dataclass(frozen=True)
class AcceleratorConfig:
    pox: int = 8
    poy: int = 8
    pof: int = 16
    freq_mhz: float = 200.0
    input_buf_bytes: int = 256 * 1024
    output_buf_bytes: int = 256 * 1024
    weight_buf_bytes: int = 128 * 1024
    dram_bytes_per_cycle: float = 16.0
    dram_fixed_latency_cycles: int = 100
    dsp_count: int = 522

    def __post_init__(self):
        for name in ("pox", "poy", "pof", "input_buf_bytes", "output_buf_bytes",
                     "weight_buf_bytes", "dsp_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.freq_mhz <= 0 or self.dram_bytes_per_cycle <= 0:
            raise ValueError("freq_mhz and dram_bytes_per_cycle must be positive")
        if self.dram_fixed_latency_cycles < 0:
            raise ValueError("dram_fixed_latency_cycles must be non-negative")

    @property
    def macs_per_cycle(self) -> int:
        return self.pox * self.poy * self.pof

    @property
    def peak_gops(self) -> float:
        return 2 * self.macs_per_cycle * self.freq_mhz / 1e3


@dataclass(frozen=True)
class BlockSpec:
    """A bypass-branch chain or a multi-branch group sharing one input."""

    kind: BlockKind
    layers: tuple[LayerSpec, ...]
    shortcut: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind(self.kind))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ShapeError("block has no layers")
        if self.kind is BlockKind.BYPASS_BRANCH:
            for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
                if a.output_shape != b.input_shape:
                    raise ShapeError(
                        f"layer {i} output {a.output_shape} != layer {i + 1} input {b.input_shape}")
            if self.shortcut and self.layers[0].input_shape != self.layers[-1].output_shape:
                raise ShapeError("shortcut needs block input and output shapes to match")
        else:
            if self.shortcut:
                raise ShapeError("shortcut is only defined for BypassBranch blocks")
            first = self.layers[0]
            for i, br in enumerate(self.layers):
                if br.input_shape != first.input_shape:
                    raise ShapeError(f"branch {i} input differs from branch 0")
                if (br.noy, br.nox) != (first.noy, first.nox):
                    raise ShapeError(f"branch {i} output extent differs from branch 0")

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.layers[0].input_shape

    @property
    def output_shape(self) -> tuple[int, int, int]:
        if self.kind is BlockKind.BYPASS_BRANCH:
            return self.layers[-1].output_shape
        first = self.layers[0]
        return (sum(br.nof for br in self.layers), first.noy, first.nox)


Item = Union[LayerSpec, BlockSpec]


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    items: tuple[Item, ...] = field(default_factory=tuple)
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        for i, (a, b) in enumerate(zip(self.items, self.items[1:])):
            if a.output_shape != b.input_shape:
                raise ShapeError(
                    f"item {i} output {a.output_shape} != item {i + 1} input {b.input_shape}")


def item_layers(item: Item) -> tuple[LayerSpec, ...]:
    return item.layers if isinstance(item, BlockSpec) else (item,)


# -- 8-bit tensors ---------------------------------------------------------

def check_tensor_i8(arr: np.ndarray, shape: tuple[int, ...], what: str = "tensor") -> np.ndarray:
    """Validate an int8 tensor of the given shape and return it."""
    arr = np.asarray(arr)
    if arr.shape != tuple(shape):
        raise ShapeError(f"{what} has shape {arr.shape}, expected {tuple(shape)}")
    if arr.dtype != np.int8:
        if not np.issubdtype(arr.dtype, np.integer) or arr.min(initial=0) < -128 or arr.max(initial=0) > 127:
            raise ShapeError(f"{what} must hold int8 values")
        arr = arr.astype(np.int8)
    return arr


def requantize(acc: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """int32 accumulator -> arithmetic shift -> activation -> saturate to int8."""
    acc = np.asarray(acc, dtype=np.int64)
    if acc.size and (acc.max() > np.iinfo(np.int32).max or acc.min() < np.iinfo(np.int32).min):
        raise OverflowError("accumulator exceeds int32 range")
    out = acc >> layer.requant_shift
    if layer.activation is Activation.RELU:
        out = np.maximum(out, 0)
    return np.clip(out, -128, 127).astype(np.int8)


def default_shift(kind: LayerKind, fan_in: int) -> int:
    # keep typical accumulators inside int8 after rescale
    return 7 + max(0, math.ceil(math.log2(max(fan_in, 1))) // 2)


# -- builders for typical blocks ---------------------------------------------

def _layer(kind, c_in, c_out, k, stride, h, w, group_num=1, act=Activation.RELU):
    fan_in = k * k * (1 if kind is LayerKind.DWCV else c_in // group_num)
    return LayerSpec(kind, nix=w, niy=h, nif=c_in, nof=c_out, nkx=k, nky=k,
                     stride=stride, pad=k // 2, group_num=group_num,
                     activation=act, requant_shift=default_shift(kind, fan_in))


def build_mbconv(c_in: int, expansion: int, dwcv_k: int, stride: int, c_out: int,
                 h: int, w: int) -> BlockSpec:
    """Inverted bottleneck: 1x1 expand, kxk depthwise, 1x1 project."""
    if min(c_in, expansion, dwcv_k, stride, c_out, h, w) < 1:
        raise ShapeError("MBconv parameters must be positive")
    if dwcv_k % 2 == 0:
        raise ShapeError("MBconv depthwise kernel must be odd")
    mid = c_in * expansion
    expand = _layer(LayerKind.CONV, c_in, mid, 1, 1, h, w)
    dw = _layer(LayerKind.DWCV, mid, mid, dwcv_k, stride, h, w)
    project = _layer(LayerKind.CONV, mid, c_out, 1, 1, dw.noy, dw.nox, act=Activation.NONE)
    return BlockSpec(BlockKind.BYPASS_BRANCH, (expand, dw, project),
                     shortcut=(stride == 1 and c_in == c_out))


def build_replk_block(c: int, lk: int, h: int, w: int) -> BlockSpec:
    """Large-kernel depthwise block with residual: 1x1, lk x lk DWCV, 1x1."""
    if min(c, lk, h, w) < 1:
        raise ShapeError("RepLK parameters must be positive")
    if lk % 2 == 0:
        raise ShapeError("RepLK kernel must be odd")
    return BlockSpec(BlockKind.BYPASS_BRANCH, (
        _layer(LayerKind.CONV, c, c, 1, 1, h, w),
        _layer(LayerKind.DWCV, c, c, lk, 1, h, w),
        _layer(LayerKind.CONV, c, c, 1, 1, h, w, act=Activation.NONE),
    ), shortcut=True)


def build_pyconv_block(c_in: int, h: int, w: int, branch_kernels: list[int],
                       branch_groups: list[int], branch_nof: list[int]) -> BlockSpec:
    """Multi-branch block of group convolutions with per-branch kernel sizes."""
    n = len(branch_kernels)
    if n == 0 or len(branch_groups) != n or len(branch_nof) != n:
        raise ShapeError("branch lists must be non-empty and of equal length")
    branches = []
    for k, g, nof in zip(branch_kernels, branch_groups, branch_nof):
        if g < 1 or c_in % g or nof % g:
            raise ShapeError(f"group {g} must divide c_in={c_in} and nof={nof}")
        branches.append(_layer(LayerKind.GROUP_CONV, c_in, nof, k, 1, h, w, group_num=g))
    return BlockSpec(BlockKind.MULTI_BRANCH, tuple(branches))
