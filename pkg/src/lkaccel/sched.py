"""Timed execution schedules: layer-by-layer, vertical fusion, horizontal fusion.

A schedule is a list of phases on two engines (the DMA and the PE array).
Phases are placed greedily in issue order: a phase starts once its engine is
free, its dependencies have finished and every buffer it touches is no longer
used by an earlier phase. Transfers of the previous tile's outputs are always
issued before loads of the next tile's inputs.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace

from .errors import CapacityError, FusionCapacityError, HFShapeError, SimError, StrategyError
from .memsys import (INPUT_PAIR, OUTPUT_PAIR, BufferId, TilePlan, bands, choose_tiling,
                     input_rows_for, transfer_latency)
from .netmodel import (AcceleratorConfig, BlockKind, BlockSpec, LayerKind, LayerSpec,
                       NetworkSpec, macs_of)
from .perf import ItemReport, PerfReport, gops, summarize
from .zflow import layer_cycles, useful_macs

WEIGHT = BufferId.WEIGHT


class PhaseKind(str, enum.Enum):
    COMPUTE = "Compute"
    TRANS_PREV = "TransPrev"
    TRANS_NEXT = "TransNext"
    LOAD_WEIGHTS = "LoadWeights"


class Policy(str, enum.Enum):
    ALL_BASELINE = "AllBaseline"
    FUSE_WHERE_POSSIBLE = "FuseWherePossible"


DMA_KINDS = (PhaseKind.TRANS_PREV, PhaseKind.TRANS_NEXT, PhaseKind.LOAD_WEIGHTS)


@dataclass
class Phase:
    index: int
    kind: PhaseKind
    start: int
    end: int
    buffers: frozenset[BufferId]
    item: str = ""
    layer: int = -1
    tile: int = -1
    bytes: int = 0
    mac_cycles: int = 0
    useful_macs: int = 0
    deps: tuple[int, ...] = ()

    @property
    def engine(self) -> str:
        return "pe" if self.kind is PhaseKind.COMPUTE else "dma"

    @property
    def duration(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "item": self.item, "layer": self.layer,
                "tile": self.tile, "start": self.start, "end": self.end,
                "buffers": sorted(b.value for b in self.buffers), "bytes": self.bytes}


@dataclass
class ExecutionSchedule:
    phases: list[Phase]
    strategy: str
    notes: list[str] = field(default_factory=list)

    @property
    def total_cycles(self) -> int:
        return max((p.end for p in self.phases), default=0)

    @property
    def mac_cycles(self) -> int:
        return sum(p.mac_cycles for p in self.phases)

    @property
    def useful_macs(self) -> int:
        return sum(p.useful_macs for p in self.phases)

    @property
    def transfer_cycles(self) -> int:
        return sum(p.duration for p in self.phases if p.kind in DMA_KINDS)

    def dram_bytes(self) -> dict[str, int]:
        out = {"input": 0, "weight": 0, "output": 0}
        key = {PhaseKind.TRANS_NEXT: "input", PhaseKind.LOAD_WEIGHTS: "weight",
               PhaseKind.TRANS_PREV: "output"}
        for p in self.phases:
            if p.kind in key:
                out[key[p.kind]] += p.bytes
        return out

    def per_tile(self) -> dict[tuple[str, int], tuple[int, int]]:
        spans: dict[tuple[str, int], tuple[int, int]] = {}
        for p in self.phases:
            if p.tile < 0:
                continue
            k = (p.item, p.tile)
            lo, hi = spans.get(k, (p.start, p.end))
            spans[k] = (min(lo, p.start), max(hi, p.end))
        return spans

    def find(self, kind: PhaseKind, **attrs) -> list[Phase]:
        return [p for p in self.phases if p.kind is kind
                and all(getattr(p, k) == v for k, v in attrs.items())]

    def to_json(self) -> list[dict]:
        return [p.to_dict() for p in self.phases]


class _Timeline:
    def __init__(self):
        self.phases: list[Phase] = []
        self.engine_free = {"pe": 0, "dma": 0}
        self.buffer_free = {b: 0 for b in BufferId}

    def add(self, kind: PhaseKind, duration: int, buffers, deps=(), **attrs) -> int:
        deps = tuple(d for d in deps if d is not None)
        buffers = frozenset(buffers)
        engine = "pe" if kind is PhaseKind.COMPUTE else "dma"
        start = max([self.engine_free[engine]]
                    + [self.phases[d].end for d in deps]
                    + [self.buffer_free[b] for b in buffers])
        end = start + duration
        idx = len(self.phases)
        self.phases.append(Phase(idx, kind, start, end, buffers, deps=deps, **attrs))
        self.engine_free[engine] = end
        for b in buffers:
            self.buffer_free[b] = end
        return idx

    def last_end(self) -> int:
        return max((p.end for p in self.phases), default=0)


# -- generic double-buffered tile pipeline ------------------------------------------

@dataclass
class ComputeWork:
    cycles: int
    mac_cycles: int = 0
    useful_macs: int = 0
    layer: int = 0
    weight_load: tuple[int, int] | None = None  # (cycles, bytes) reloaded before this step


@dataclass
class TileWork:
    load: tuple[int, int]                # (cycles, bytes)
    computes: list[ComputeWork]
    store: tuple[int, int]


def _pipeline(tl: _Timeline, tiles: list[TileWork], label: str,
              weight_loads: list[tuple[int, int]] = (), after: int | None = None) -> int:
    """Double-buffered load / compute / store over tiles. Returns the last store index."""
    for cyc, nbytes in weight_loads:
        tl.add(PhaseKind.LOAD_WEIGHTS, cyc, {WEIGHT}, item=label, bytes=nbytes)
    n = len(tiles)
    loads: list[int] = [None] * n
    stores: list[int] = [None] * n
    last_comp: list[int] = [None] * n
    cyc, nbytes = tiles[0].load
    loads[0] = tl.add(PhaseKind.TRANS_NEXT, cyc, {INPUT_PAIR[0]}, deps=(after,),
                      item=label, tile=0, bytes=nbytes)
    for t, work in enumerate(tiles):
        bufs = {INPUT_PAIR[t % 2], OUTPUT_PAIR[t % 2], WEIGHT}
        prev = None
        for step in work.computes:
            wl = None
            if step.weight_load is not None:
                wl = tl.add(PhaseKind.LOAD_WEIGHTS, step.weight_load[0], {WEIGHT}, deps=(prev,),
                            item=label, layer=step.layer, tile=t, bytes=step.weight_load[1])
            prev = tl.add(PhaseKind.COMPUTE, step.cycles, bufs, deps=(loads[t], prev, wl),
                          item=label, layer=step.layer, tile=t,
                          mac_cycles=step.mac_cycles, useful_macs=step.useful_macs)
        last_comp[t] = prev if prev is not None else loads[t]
        if t >= 1:
            cyc, nbytes = tiles[t - 1].store
            stores[t - 1] = tl.add(PhaseKind.TRANS_PREV, cyc, {OUTPUT_PAIR[(t - 1) % 2]},
                                   deps=(last_comp[t - 1],), item=label, tile=t - 1, bytes=nbytes)
        if t + 1 < n:
            cyc, nbytes = tiles[t + 1].load
            loads[t + 1] = tl.add(PhaseKind.TRANS_NEXT, cyc, {INPUT_PAIR[(t + 1) % 2]},
                                  deps=(after,), item=label, tile=t + 1, bytes=nbytes)
    cyc, nbytes = tiles[-1].store
    stores[-1] = tl.add(PhaseKind.TRANS_PREV, cyc, {OUTPUT_PAIR[(n - 1) % 2]},
                        deps=(last_comp[-1],), item=label, tile=n - 1, bytes=nbytes)
    return stores[-1]


def schedule_tiles(compute_cycles, load_cycles, store_cycles) -> ExecutionSchedule:
    """Pipeline of tiles with given per-tile durations (no weights)."""
    tiles = [TileWork((l, 0), [ComputeWork(c, mac_cycles=c)], (s, 0))
             for c, l, s in zip(compute_cycles, load_cycles, store_cycles)]
    tl = _Timeline()
    _pipeline(tl, tiles, "tiles")
    return ExecutionSchedule(tl.phases, "LayerByLayer")


# -- layer-by-layer ---------------------------------------------------------------

def _per_channel_weight_bytes(layer: LayerSpec) -> int:
    return layer.in_channels_per_output * layer.nkx * layer.nky


def _weight_chunks(layer: LayerSpec, cfg: AcceleratorConfig) -> tuple[tuple[tuple[int, int], ...], bool]:
    """Output-channel chunks whose weights fit the weight buffer, and whether they reload."""
    if layer.weight_bytes() <= cfg.weight_buf_bytes:
        return ((0, layer.nof),), False
    tof = cfg.weight_buf_bytes // _per_channel_weight_bytes(layer)
    if tof == 0:
        raise CapacityError(
            f"weights of a single output channel ({_per_channel_weight_bytes(layer)} bytes) "
            f"exceed the weight buffer")
    if tof >= cfg.pof:
        tof -= tof % cfg.pof
    return bands(layer.nof, tof), True


def _layer_tiles(layer: LayerSpec, cfg: AcceleratorConfig, tiling: TilePlan, layer_idx: int = 0
                 ) -> tuple[list[TileWork], list[tuple[int, int]]]:
    chunks, reload = _weight_chunks(layer, cfg)
    tiles = []
    for t, (lo, hi) in enumerate(tiling.row_bands):
        rlo, rhi = input_rows_for(layer, lo, hi)
        in_bytes = (rhi - rlo) * layer.nix * layer.nif
        out_bytes = (hi - lo) * layer.nox * layer.nof
        computes = []
        for c in chunks:
            mac, pro = layer_cycles(layer, cfg, hi - lo, c)
            wl = None
            if reload:
                wb = (c[1] - c[0]) * _per_channel_weight_bytes(layer)
                wl = (transfer_latency(wb, cfg), wb)
            computes.append(ComputeWork(mac + pro, mac, useful_macs(layer, hi - lo, c),
                                        layer_idx, wl))
        tiles.append(TileWork((transfer_latency(in_bytes, cfg), in_bytes), computes,
                              (transfer_latency(out_bytes, cfg), out_bytes)))
    weights = [] if reload else [(transfer_latency(layer.weight_bytes(), cfg), layer.weight_bytes())]
    return tiles, weights


def _emit_layer(tl: _Timeline, layer: LayerSpec, cfg: AcceleratorConfig, label: str,
                tiling: TilePlan | None = None, after: int | None = None, layer_idx: int = 0) -> int:
    tiling = tiling if tiling is not None else choose_tiling(layer, cfg)
    tiles, weights = _layer_tiles(layer, cfg, tiling, layer_idx)
    return _pipeline(tl, tiles, label, weights, after)


def schedule_layer(layer: LayerSpec, cfg: AcceleratorConfig,
                   tiling: TilePlan | None = None) -> ExecutionSchedule:
    tl = _Timeline()
    _emit_layer(tl, layer, cfg, "0", tiling)
    return ExecutionSchedule(tl.phases, "LayerByLayer")


# -- vertical fusion ------------------------------------------------------------------

@dataclass(frozen=True)
class VFPlan:
    n_tiles: int
    out_bands: tuple[tuple[tuple[int, int], ...], ...]   # per layer, per tile
    in_bands: tuple[tuple[int, int], ...]                # first-layer input rows per tile


def _vf_plan(layers: tuple[LayerSpec, ...], n_tiles: int) -> VFPlan:
    last = layers[-1]
    if not 1 <= n_tiles <= last.noy:
        raise ValueError(f"n_tiles must be in [1, {last.noy}]")
    cuts = [round((t + 1) * last.noy / n_tiles) for t in range(n_tiles)]
    # cumulative rows of each layer's output that must exist after tile t
    cum = [[0] * n_tiles for _ in layers]
    for t in range(n_tiles):
        hi = cuts[t]
        for li in range(len(layers) - 1, -1, -1):
            cum[li][t] = layers[li].noy if t == n_tiles - 1 else min(hi, layers[li].noy)
            hi = input_rows_for(layers[li], 0, cum[li][t])[1] if cum[li][t] else 0
    out_bands = tuple(tuple((cum[li][t - 1] if t else 0, cum[li][t]) for t in range(n_tiles))
                      for li in range(len(layers)))
    first = layers[0]
    in_cum = [first.niy if t == n_tiles - 1 else input_rows_for(first, 0, cum[0][t])[1]
              for t in range(n_tiles)]
    in_bands = tuple((in_cum[t - 1] if t else 0, in_cum[t]) for t in range(n_tiles))
    return VFPlan(n_tiles, out_bands, in_bands)


def _span(*ranges) -> int:
    ranges = [r for r in ranges if r[1] > r[0]]
    if not ranges:
        return 0
    return max(hi for _, hi in ranges) - min(lo for lo, _ in ranges)


def _vf_fits(layers, plan: VFPlan, cfg: AcceleratorConfig) -> str | None:
    """Rows resident per tile: what is produced plus what the consumer still reads."""
    for t in range(plan.n_tiles):
        need = input_rows_for(layers[0], *plan.out_bands[0][t])
        if _span(plan.in_bands[t], need) * layers[0].nix * layers[0].nif > cfg.input_buf_bytes:
            return f"tile {t} input exceeds the input buffer"
        for li, layer in enumerate(layers):
            made = plan.out_bands[li][t]
            need = (input_rows_for(layers[li + 1], *plan.out_bands[li + 1][t])
                    if li + 1 < len(layers) else (0, 0))
            if _span(made, need) * layer.nox * layer.nof > cfg.output_buf_bytes:
                return f"tile {t} intermediate of layer {li} exceeds buffer capacity"
    return None


def _emit_vf(tl: _Timeline, layers: tuple[LayerSpec, ...], cfg: AcceleratorConfig, label: str,
             n_tiles: int | None, after: int | None, notes: list[str]) -> int:
    if n_tiles is None:
        for cand in range(1, layers[-1].noy + 1):
            if _vf_fits(layers, _vf_plan(layers, cand), cfg) is None:
                n_tiles = cand
                break
        else:
            raise FusionCapacityError(f"block not VF-fusible at this config ({label})")
    plan = _vf_plan(layers, n_tiles)
    why = _vf_fits(layers, plan, cfg)
    if why is not None:
        raise FusionCapacityError(f"block not VF-fusible at this config: {why}")
    wbytes = [l.weight_bytes() for l in layers]
    if sum(wbytes) > cfg.weight_buf_bytes:
        raise FusionCapacityError(
            f"fused weights ({sum(wbytes)} bytes) exceed the weight buffer")
    for li, wb in enumerate(wbytes):
        tl.add(PhaseKind.LOAD_WEIGHTS, transfer_latency(wb, cfg), {WEIGHT},
               item=label, layer=li, bytes=wb)

    first, last, n = layers[0], layers[-1], n_tiles
    loads, stores, last_comp = [None] * n, [None] * n, [None] * n

    def load(t):
        lo, hi = plan.in_bands[t]
        nbytes = (hi - lo) * first.nix * first.nif
        return tl.add(PhaseKind.TRANS_NEXT, transfer_latency(nbytes, cfg), {INPUT_PAIR[t % 2]},
                      deps=(after,), item=label, tile=t, bytes=nbytes)

    def store(t):
        lo, hi = plan.out_bands[-1][t]
        nbytes = (hi - lo) * last.nox * last.nof
        return tl.add(PhaseKind.TRANS_PREV, transfer_latency(nbytes, cfg), {OUTPUT_PAIR[t % 2]},
                      deps=(last_comp[t],), item=label, tile=t, bytes=nbytes)

    loads[0] = load(0)
    for t in range(n):
        prev = loads[t]
        for li, layer in enumerate(layers):
            bufs = {INPUT_PAIR[t % 2], OUTPUT_PAIR[t % 2], WEIGHT}
            if t == 0 and li == 0:
                bufs |= set(INPUT_PAIR)     # first-fused layer spreads over input A and B
            if t == n - 1 and li == len(layers) - 1:
                bufs |= set(OUTPUT_PAIR)    # last-fused layer spreads over output A and B
            lo, hi = plan.out_bands[li][t]
            mac, pro = layer_cycles(layer, cfg, hi - lo)
            if hi > lo:
                prev = tl.add(PhaseKind.COMPUTE, mac + pro, bufs, deps=(loads[t], prev),
                              item=label, layer=li, tile=t, mac_cycles=mac,
                              useful_macs=useful_macs(layer, hi - lo))
            if li == 0:
                if t >= 1:
                    stores[t - 1] = store(t - 1)
                if t + 1 < n:
                    loads[t + 1] = load(t + 1)
        last_comp[t] = prev
    stores[-1] = store(n - 1)
    return stores[-1]


def _vf_windows(block: BlockSpec) -> list[tuple[LayerSpec, ...]]:
    layers = block.layers
    return [layers[i:i + 3] for i in range(0, len(layers), 3)]


def schedule_vf(block: BlockSpec, cfg: AcceleratorConfig, n_tiles: int | None = None
                ) -> ExecutionSchedule:
    """Fuse a bypass-branch chain tile by tile with intermediates kept on chip."""
    if not isinstance(block, BlockSpec) or block.kind is not BlockKind.BYPASS_BRANCH:
        raise StrategyError("VF applies to BypassBranch blocks")
    tl = _Timeline()
    notes: list[str] = []
    _emit_vf_block(tl, block, cfg, "0", n_tiles, None, notes)
    return ExecutionSchedule(tl.phases, "VF", notes)


def _emit_vf_block(tl, block, cfg, label, n_tiles, after, notes) -> int:
    windows = _vf_windows(block)
    if len(windows) > 1:
        notes.append(f"{label}: chain of {len(block.layers)} layers fused in windows of 3")
    for w in windows:
        after = _emit_vf(tl, w, cfg, label, n_tiles if len(windows) == 1 else None, after, notes)
    return after


# -- horizontal fusion -------------------------------------------------------------------

def hf_cycles_eq1(group_num: int, nkx_unify: int, nky_unify: int, nif_group: int,
                  nox: int, noy: int, nof_groups, cfg: AcceleratorConfig) -> int:
    """Cycle count of horizontally fused group convolutions (rounded up)."""
    num = group_num * nkx_unify * nky_unify * nif_group * nox * noy * sum(nof_groups)
    return -(-num // cfg.macs_per_cycle)


def _hf_params(block: BlockSpec):
    if not isinstance(block, BlockSpec) or block.kind is not BlockKind.MULTI_BRANCH:
        raise StrategyError("HF applies to MultiBranch blocks")
    branches = block.layers
    for br in branches:
        if br.kind is LayerKind.DWCV:
            raise HFShapeError("HF packs CONV / GroupCONV branches only")
    groups = {br.group_num for br in branches}
    nifg = {br.nif_group for br in branches}
    strides = {br.stride for br in branches}
    if len(groups) != 1 or len(nifg) != 1 or len(strides) != 1:
        raise HFShapeError(
            f"branches disagree on group_num {sorted(groups)} / nif_group {sorted(nifg)}"
            f" / stride {sorted(strides)}")
    widest = max(branches, key=lambda b: (b.nky, b.nkx))
    nkx_u = max(b.nkx for b in branches)
    nky_u = max(b.nky for b in branches)
    unified = replace(widest, kind=LayerKind.CONV, group_num=1, nkx=nkx_u, nky=nky_u,
                      pad=max(b.pad for b in branches), nof=sum(b.nof for b in branches))
    return groups.pop(), nifg.pop(), nkx_u, nky_u, unified


def _emit_hf(tl: _Timeline, block: BlockSpec, cfg: AcceleratorConfig, label: str,
             after: int | None, notes: list[str]) -> int:
    group_num, nif_group, nkx_u, nky_u, unified = _hf_params(block)
    first = block.layers[0]
    nox, noy = first.nox, first.noy
    nofg = [b.nof_group for b in block.layers]
    tiling = choose_tiling(unified, cfg)
    total_useful = sum(macs_of(b) for b in block.layers)
    wbytes = sum(b.weight_bytes() for b in block.layers)
    if wbytes > cfg.weight_buf_bytes:
        raise CapacityError("HF branch weights exceed the weight buffer")
    tiles = []
    done_cycles = done_useful = 0
    for t, (lo, hi) in enumerate(tiling.row_bands):
        cum = hf_cycles_eq1(group_num, nkx_u, nky_u, nif_group, nox, hi, nofg, cfg)
        cum_useful = total_useful * hi // noy
        mac, useful = cum - done_cycles, cum_useful - done_useful
        done_cycles, done_useful = cum, cum_useful
        prologue = math.ceil(nox / cfg.pox) * math.ceil((hi - lo) / cfg.poy) * group_num * (cfg.pox - 1)
        rlo, rhi = input_rows_for(unified, lo, hi)
        in_bytes = (rhi - rlo) * first.nix * first.nif
        out_bytes = (hi - lo) * nox * unified.nof
        tiles.append(TileWork((transfer_latency(in_bytes, cfg), in_bytes),
                              [ComputeWork(mac + prologue, mac, useful)],
                              (transfer_latency(out_bytes, cfg), out_bytes)))
    notes.append(f"{label}: kernels unified to {nkx_u}x{nky_u}; outputs rearranged at no cost")
    return _pipeline(tl, tiles, label, [(transfer_latency(wbytes, cfg), wbytes)], after)


def schedule_hf(block: BlockSpec, cfg: AcceleratorConfig) -> ExecutionSchedule:
    """Run the parallel group convolutions of a multi-branch block as one packed layer."""
    tl = _Timeline()
    notes: list[str] = []
    _emit_hf(tl, block, cfg, "0", None, notes)
    return ExecutionSchedule(tl.phases, "HF", notes)


# -- networks -----------------------------------------------------------------------------

def _emit_baseline_item(tl, item, cfg, label, after) -> tuple[int, list[tuple[str, str, object]]]:
    if isinstance(item, LayerSpec):
        return _emit_layer(tl, item, cfg, label, after=after), [(label, "LayerByLayer", item)]
    units = []
    if item.kind is BlockKind.BYPASS_BRANCH:
        for j, layer in enumerate(item.layers):
            sub = f"{label}.{j}"
            after = _emit_layer(tl, layer, cfg, sub, after=after)
            units.append((sub, "LayerByLayer", layer))
        return after, units
    block_after = after
    for j, br in enumerate(item.layers):
        sub = f"{label}.b{j}"
        # every branch re-reads the shared input; only the producer gates the load
        after = _emit_layer(tl, br, cfg, sub, after=block_after)
        units.append((sub, "LayerByLayer", br))
    return after, units


def schedule_block(block: BlockSpec, cfg: AcceleratorConfig, fused: bool,
                   n_tiles: int | None = None) -> ExecutionSchedule:
    tl = _Timeline()
    notes: list[str] = []
    if not fused:
        _emit_baseline_item(tl, block, cfg, "0", None)
        return ExecutionSchedule(tl.phases, "LayerByLayer", notes)
    if block.kind is BlockKind.BYPASS_BRANCH:
        _emit_vf_block(tl, block, cfg, "0", n_tiles, None, notes)
        return ExecutionSchedule(tl.phases, "VF", notes)
    _emit_hf(tl, block, cfg, "0", None, notes)
    return ExecutionSchedule(tl.phases, "HF", notes)


def _item_macs(item) -> int:
    return sum(macs_of(l) for l in (item.layers if isinstance(item, BlockSpec) else (item,)))


def _unit_report(phases: list[Phase], label: str, strategy: str, macs: int,
                 cfg: AcceleratorConfig, notes: list[str]) -> ItemReport:
    mine = [p for p in phases if p.item == label]
    cycles = max(p.end for p in mine) - min(p.start for p in mine)
    mac_cycles = sum(p.mac_cycles for p in mine)
    util = (sum(p.useful_macs for p in mine) / (mac_cycles * cfg.macs_per_cycle)
            if mac_cycles else 0.0)
    by = {k: sum(p.bytes for p in mine if p.kind is k) for k in DMA_KINDS}
    return ItemReport(label=label, strategy=strategy, cycles=cycles,
                      wall_time_us=cycles / cfg.freq_mhz, gops=gops(macs, cycles, cfg.freq_mhz),
                      utilization=util, dram_bytes_in=by[PhaseKind.TRANS_NEXT],
                      dram_bytes_wt=by[PhaseKind.LOAD_WEIGHTS],
                      dram_bytes_out=by[PhaseKind.TRANS_PREV], macs=macs,
                      notes=[n for n in notes if n.startswith(label + ":")])


def schedule_network(net: NetworkSpec, cfg: AcceleratorConfig,
                     policy: Policy | str = Policy.FUSE_WHERE_POSSIBLE
                     ) -> tuple[ExecutionSchedule, PerfReport]:
    policy = Policy(policy)
    tl = _Timeline()
    notes: list[str] = []
    units: list[tuple[str, str, int]] = []
    after = None
    for i, item in enumerate(net.items):
        label = str(i)
        try:
            fused = None
            if policy is Policy.FUSE_WHERE_POSSIBLE and isinstance(item, BlockSpec):
                # fusion falls back to layer-by-layer; restart from a snapshot on failure
                saved = (len(tl.phases), dict(tl.engine_free), dict(tl.buffer_free))
                try:
                    if item.kind is BlockKind.BYPASS_BRANCH:
                        after = _emit_vf_block(tl, item, cfg, label, None, after, notes)
                        fused = "VF"
                    else:
                        after = _emit_hf(tl, item, cfg, label, after, notes)
                        fused = "HF"
                except (FusionCapacityError, HFShapeError, CapacityError) as exc:
                    del tl.phases[saved[0]:]
                    tl.engine_free, tl.buffer_free = saved[1], saved[2]
                    notes.append(f"{label}: fusion not applied ({exc})")
            if fused is not None:
                units.append((label, fused, _item_macs(item)))
            else:
                after, sub = _emit_baseline_item(tl, item, cfg, label, after)
                units.extend((lab, strat, macs_of(l)) for lab, strat, l in sub)
        except SimError as exc:
            raise type(exc)(f"item {i}: {exc}") from exc
    sched = ExecutionSchedule(tl.phases, policy.value, notes)
    items = [_unit_report(tl.phases, lab, strat, macs, cfg, notes) for lab, strat, macs in units]
    return sched, summarize(sched, cfg, sum(_item_macs(it) for it in net.items), items)


# -- checkers -----------------------------------------------------------------------------

def check_conflicts(schedule: ExecutionSchedule) -> list[str]:
    """Phases sharing a buffer or an engine must not overlap in time."""
    problems = []
    lanes: dict[object, list[Phase]] = defaultdict(list)
    for p in schedule.phases:
        if p.duration == 0:
            continue
        lanes[p.engine].append(p)
        for b in p.buffers:
            lanes[b].append(p)
    for key, ps in lanes.items():
        ps = sorted(ps, key=lambda p: (p.start, p.end))
        for a, b in zip(ps, ps[1:]):
            if b.start < a.end:
                name = key.value if isinstance(key, BufferId) else key
                problems.append(f"{name}: phase {a.index} [{a.start},{a.end}) overlaps "
                                f"phase {b.index} [{b.start},{b.end})")
    return problems


def check_dependencies(schedule: ExecutionSchedule) -> list[str]:
    problems = []
    by_idx = {p.index: p for p in schedule.phases}
    for p in schedule.phases:
        for d in p.deps:
            if p.start < by_idx[d].end:
                problems.append(f"phase {p.index} starts before dependency {d} ends")
        if p.kind is PhaseKind.COMPUTE and p.tile >= 0:
            if not any(by_idx[d].kind is PhaseKind.TRANS_NEXT and by_idx[d].tile == p.tile
                       for d in p.deps):
                problems.append(f"compute phase {p.index} has no input load dependency")
        if p.kind is PhaseKind.TRANS_PREV:
            if not any(by_idx[d].kind is PhaseKind.COMPUTE for d in p.deps):
                problems.append(f"store phase {p.index} does not depend on a compute")
    return problems

