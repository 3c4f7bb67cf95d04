"""Metrics, the direct-convolution oracle and the split-kernel baseline model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .netmodel import AcceleratorConfig, LayerKind, LayerSpec, check_tensor_i8, requantize
from .zflow import register_file_size


# -- oracle ------------------------------------------------------------------
# Deliberately shares no code with zflow beyond the requantization rule.

def oracle_conv_acc(layer: LayerSpec, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Direct convolution into an int64 accumulator plane."""
    x = check_tensor_i8(x, layer.input_shape, "input").astype(np.int64)
    w = check_tensor_i8(w, layer.weight_shape, "weights").astype(np.int64)
    p, s = layer.pad, layer.stride
    xp = np.zeros((layer.nif, layer.niy + 2 * p, layer.nix + 2 * p), dtype=np.int64)
    xp[:, p:p + layer.niy, p:p + layer.nix] = x
    out = np.zeros(layer.output_shape, dtype=np.int64)
    ye, xe = s * (layer.noy - 1) + 1, s * (layer.nox - 1) + 1
    groups = layer.nif if layer.kind is LayerKind.DWCV else layer.group_num
    og = layer.nof // groups
    for ky in range(layer.nky):
        for kx in range(layer.nkx):
            window = xp[:, ky:ky + ye:s, kx:kx + xe:s].reshape(groups, -1, layer.noy * layer.nox)
            wk = w[:, :, ky, kx].reshape(groups, og, -1)
            out += np.matmul(wk, window).reshape(out.shape)
    return out


def oracle_conv(layer: LayerSpec, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return requantize(oracle_conv_acc(layer, x, w), layer)


# -- throughput metrics ---------------------------------------------------------

def dsp_efficiency(gops: float, dsp: int, freq_mhz: float) -> float:
    """Throughput per DSP per MHz, scaled by 1e3."""
    if gops <= 0 or dsp <= 0 or freq_mhz <= 0:
        raise ValueError("gops, dsp and freq_mhz must be positive")
    return gops / dsp / freq_mhz * 1e3


def gops(macs: int, cycles: int, freq_mhz: float) -> float:
    if cycles <= 0:
        return 0.0
    return 2 * macs * freq_mhz * 1e6 / cycles / 1e9


def pe_utilization(schedule, cfg: AcceleratorConfig) -> float:
    """Useful MACs over MAC-slot capacity of the compute phases."""
    mac_cycles = sum(ph.mac_cycles for ph in schedule.phases)
    if mac_cycles == 0:
        return 0.0
    return sum(ph.useful_macs for ph in schedule.phases) / (mac_cycles * cfg.macs_per_cycle)


# -- storage models ---------------------------------------------------------------

def zflow_arrangement_bits(cfg: AcceleratorConfig) -> int:
    """8-bit register slots used for data arrangement by the Z-flow engine."""
    return register_file_size(cfg) * 8


def line_buffer_bits(nkx: int, stride: int, nix: int) -> int:
    """Line-buffer storage of a sliding-window engine, per buffered channel."""
    return max(nkx - stride, 0) * nix * 8


@dataclass(frozen=True)
class BaselineSplit:
    cycles: int
    line_buffer_bits: int
    padded_mac_fraction: float
    sub_size: int
    useful_macs: int


def _padded_positions(k: int, sub: int) -> int:
    return math.ceil(k / sub) * sub


def baseline_split_model(layer: LayerSpec, cfg: AcceleratorConfig,
                         sub_sizes=frozenset({3, 5, 7})) -> BaselineSplit:
    """Comparator engine that splits kernels into fixed sub-kernels.

    The kernel is tiled with ``s x s`` sub-kernels for the single ``s`` in
    ``sub_sizes`` that pads least; padded positions take cycles but do no
    useful work. Overlapped rows sit in line buffers.
    """
    if layer.kind is LayerKind.GROUP_CONV:
        raise ShapeError("baseline split model covers CONV and DWCV layers")
    if not sub_sizes:
        raise ValueError("sub_sizes is empty")
    real = layer.nkx * layer.nky

    def padded_fraction(sub):
        return 1 - real / (_padded_positions(layer.nkx, sub) * _padded_positions(layer.nky, sub))

    sub = min(sorted(sub_sizes), key=padded_fraction)
    positions = _padded_positions(layer.nkx, sub) * _padded_positions(layer.nky, sub)
    tiles = (math.ceil(layer.nox / cfg.pox) * math.ceil(layer.noy / cfg.poy)
             * math.ceil(layer.nof / cfg.pof))
    cycles = tiles * (layer.in_channels_per_output * positions + cfg.pox - 1)
    useful = real * layer.in_channels_per_output * layer.nox * layer.noy * layer.nof
    return BaselineSplit(cycles=cycles,
                         line_buffer_bits=line_buffer_bits(layer.nkx, layer.stride, layer.nix),
                         padded_mac_fraction=padded_fraction(sub), sub_size=sub,
                         useful_macs=useful)


# -- reports ----------------------------------------------------------------------

@dataclass
class ItemReport:
    label: str
    strategy: str
    cycles: int
    wall_time_us: float
    gops: float
    utilization: float
    dram_bytes_in: int
    dram_bytes_wt: int
    dram_bytes_out: int
    macs: int
    notes: list[str] = field(default_factory=list)

    @property
    def dram_bytes(self) -> int:
        return self.dram_bytes_in + self.dram_bytes_wt + self.dram_bytes_out


@dataclass
class PerfReport:
    total_cycles: int
    wall_time_s: float
    gops: float
    pe_utilization: float
    dsp_efficiency: float
    dram_bytes: dict[str, int]
    arrangement_bits: int
    macs: int
    items: list[ItemReport] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_cycles": self.total_cycles,
            "wall_time_s": self.wall_time_s,
            "gops": self.gops,
            "pe_utilization": self.pe_utilization,
            "dsp_efficiency": self.dsp_efficiency,
            "dram_bytes": dict(self.dram_bytes),
            "arrangement_bits": self.arrangement_bits,
            "macs": self.macs,
        }


def summarize(schedule, cfg: AcceleratorConfig, macs: int, items: list[ItemReport]) -> PerfReport:
    cycles = schedule.total_cycles
    tput = gops(macs, cycles, cfg.freq_mhz)
    return PerfReport(
        total_cycles=cycles,
        wall_time_s=cycles / (cfg.freq_mhz * 1e6),
        gops=tput,
        pe_utilization=pe_utilization(schedule, cfg),
        dsp_efficiency=dsp_efficiency(tput, cfg.dsp_count, cfg.freq_mhz) if tput > 0 else 0.0,
        dram_bytes=schedule.dram_bytes(),
        arrangement_bits=zflow_arrangement_bits(cfg),
        macs=macs,
        items=items,
    )
