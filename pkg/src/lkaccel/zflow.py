"""Z-flow dataflow: register-level planning and functional execution.

The MAC array has ``poy`` register arrays (one per output row of a tile), each
holding ``pox`` pixels (one per output column). Kernel positions are visited
one per cycle in serpentine order. Inside a kernel row every array shifts by
one slot and takes a single new pixel at its leading edge. At a kernel-row
transition (the inflection point) array ``r`` takes over the whole contents of
array ``r + 1``, and the bottom array is filled from the prefetch row. On the
reversed row the edge pixels an array needs are exactly the ones its lower
neighbour shifted out during the previous row, in reverse order; each array
keeps them in a turnaround stack that is bounded by the sub-kernel width, hence
by ``2 * pox - 1`` once wide kernels are segmented.

Stride-2 layers are split into stride phases (kernel rows/columns of equal
parity) and each phase is traversed as a stride-1 lattice.

The plan is computed on lattice coordinates once per geometry and cached;
functional execution gathers pixels exactly as the simulated registers hold
them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import PlanError, ShapeError
from .kseg import compose_partials, segment_kernel
from .netmodel import AcceleratorConfig, LayerKind, LayerSpec, check_tensor_i8, requantize


class Direction(str, enum.Enum):
    LEFT_TO_RIGHT = "LeftToRight"
    RIGHT_TO_LEFT = "RightToLeft"


class SourceTag(str, enum.Enum):
    BUFFER_READ = "BufferRead"
    NEIGHBOR_REUSE = "NeighborReuse"
    PREFETCH_REGISTER = "PrefetchRegister"
    ZERO_PAD = "ZeroPad"


_BUF, _NBR, _PRE = 0, 1, 2


@dataclass(frozen=True)
class PixelSource:
    tag: SourceTag
    coord: tuple[int, int] | None = None  # (y, x) input coordinate
    from_array: int | None = None


@dataclass(frozen=True)
class CycleEvent:
    cycle: int
    kernel_pos: tuple[int, int] | None  # (kx, ky) within the sub-kernel; None in prologue
    direction: Direction
    # one tuple per register array; longer than one only on bulk (inflection) cycles
    per_array_sources: tuple[tuple[PixelSource, ...], ...]
    prefetch_issued: tuple[tuple[int, int], ...] = ()
    shift_reuse: int = 0
    bulk: bool = False


@dataclass
class DataflowTrace:
    events: list[CycleEvent] = field(default_factory=list)
    buffer_read_count: int = 0      # every input-buffer fetch, prefetches at issue
    direct_read_count: int = 0      # fetches delivered straight to a register array
    neighbor_reuse_count: int = 0
    prefetch_count: int = 0
    zero_pad_count: int = 0
    shift_reuse_count: int = 0
    total_cycles: int = 0
    register_file_size: int = 0

    @property
    def deliveries(self) -> int:
        return (self.direct_read_count + self.neighbor_reuse_count
                + self.prefetch_count + self.zero_pad_count)

    def add(self, other: "DataflowTrace", times: int = 1) -> None:
        for name in ("buffer_read_count", "direct_read_count", "neighbor_reuse_count",
                     "prefetch_count", "zero_pad_count", "shift_reuse_count", "total_cycles"):
            setattr(self, name, getattr(self, name) + times * getattr(other, name))
        self.register_file_size = max(self.register_file_size, other.register_file_size)

    def dump_lines(self) -> list[str]:
        """``cycle,kx,ky,direction,array_index,source_tag,coord`` records."""
        lines = []
        for ev in self.events:
            kx, ky = ev.kernel_pos if ev.kernel_pos is not None else ("", "")
            for a, sources in enumerate(ev.per_array_sources):
                for src in sources:
                    coord = "" if src.coord is None else f"{src.coord[0]}:{src.coord[1]}"
                    lines.append(f"{ev.cycle},{kx},{ky},{ev.direction.value},{a},"
                                 f"{src.tag.value},{coord}")
        return lines


def register_file_size(cfg: AcceleratorConfig) -> int:
    """Register slots of the arrangement logic: arrays, prefetch row, turnaround stacks."""
    return cfg.pox * cfg.poy + cfg.pox + (cfg.poy - 1) * (2 * cfg.pox - 1)


# -- lattice-level register simulation ---------------------------------------

@dataclass(frozen=True)
class _Program:
    """Register choreography of one stride-1 lattice traversal.

    Coordinates are lattice (u, v): slot (r, c) at kernel lattice position
    (m, n) must hold lattice pixel (c + m, r + n).
    """
    n_cycles: int
    positions: np.ndarray          # (n_cycles, 2) m, n; -1 in prologue
    directions: tuple[Direction, ...]
    snapshots: np.ndarray          # (n_compute, poy, pox, 2) u, v held at each compute cycle
    compute_cycles: np.ndarray     # cycle index of each compute step
    deliveries: np.ndarray         # (N, 6) cycle, array, tag, u, v, from_array
    prefetches: np.ndarray         # (P, 3) cycle, u, v
    shift_reuse: np.ndarray        # (n_cycles,)
    bulk: np.ndarray               # (n_cycles,) bool
    max_stack: int


@lru_cache(maxsize=512)
def _lattice_program(w: int, h: int, pox: int, poy: int, with_prologue: bool) -> _Program:
    regs = np.full((poy, pox, 2), -1, dtype=np.int64)
    # two banks per array: one drained by the current row, one filled for the next;
    # their combined occupancy never exceeds w - 1 (one physical bank, address
    # direction alternating per row)
    stacks: list[list[list[tuple[int, int]]]] = [[[] for _ in range(poy)] for _ in range(2)]
    prefetch_row: list[tuple[int, int]] = []
    positions, directions, snaps, compute_idx = [], [], [], []
    deliveries, prefetches, shifts, bulk = [], [], [], []
    max_stack = 0
    cycle = 0

    def order(n):
        return range(w) if n % 2 == 0 else range(w - 1, -1, -1)

    def pending_prefetch(n):
        # window the bottom array needs at the inflection into row n + 1
        if n + 1 >= h:
            return []
        m_end = w - 1 if n % 2 == 0 else 0
        return [(m_end + c, poy + n) for c in range(pox)]

    def issue_prefetch(n, j):
        want = pending_prefetch(n)
        lo, hi = j * pox // w, (j + 1) * pox // w
        for u, v in want[lo:hi]:
            prefetch_row.append((u, v))
            prefetches.append((cycle, u, v))

    def finish_cycle(m, n, direction, n_shift, is_bulk):
        nonlocal cycle
        positions.append((m, n))
        directions.append(direction)
        shifts.append(n_shift)
        bulk.append(is_bulk)
        if m >= 0:
            expect_u = np.arange(pox)[None, :] + m
            expect_v = np.arange(poy)[:, None] + n
            if not ((regs[..., 0] == expect_u).all() and (regs[..., 1] == expect_v).all()):
                raise AssertionError(f"register contents wrong at m={m}, n={n}")
            snaps.append(regs.copy())
            compute_idx.append(cycle)
        cycle += 1

    # initial window of row 0
    if with_prologue:
        for t in range(pox):
            for r in range(poy):
                regs[r, :-1] = regs[r, 1:]
                regs[r, -1] = (t, r)
                deliveries.append((cycle, r, _BUF, t, r, -1))
            if t < pox - 1:
                finish_cycle(-1, -1, Direction.LEFT_TO_RIGHT, 0, False)
        first_bulk = False
    else:
        for r in range(poy):
            for c in range(pox):
                regs[r, c] = (c, r)
                deliveries.append((cycle, r, _BUF, c, r, -1))
        first_bulk = True
    issue_prefetch(0, 0)
    finish_cycle(0, 0, Direction.LEFT_TO_RIGHT, 0, first_bulk)

    for n in range(h):
        direction = Direction.LEFT_TO_RIGHT if n % 2 == 0 else Direction.RIGHT_TO_LEFT
        for j, m in enumerate(order(n)):
            if n == 0 and j == 0:
                continue
            if j == 0:
                # inflection: vertical reuse from the array below, bottom from prefetch
                for r in range(poy - 1):
                    regs[r] = regs[r + 1]
                    for c in range(pox):
                        deliveries.append((cycle, r, _NBR, *regs[r, c], r + 1))
                if len(prefetch_row) != pox:
                    raise AssertionError("prefetch row incomplete at inflection")
                for c, (u, v) in enumerate(prefetch_row):
                    regs[poy - 1, c] = (u, v)
                    deliveries.append((cycle, poy - 1, _PRE, u, v, -1))
                prefetch_row.clear()
                issue_prefetch(n, j)
                finish_cycle(m, n, direction, 0, True)
                continue
            for r in range(poy):
                if direction is Direction.LEFT_TO_RIGHT:
                    dropped = tuple(regs[r, 0])
                    regs[r, :-1] = regs[r, 1:]
                    need, slot = (m + pox - 1, r + n), pox - 1
                else:
                    dropped = tuple(regs[r, -1])
                    regs[r, 1:] = regs[r, :-1]
                    need, slot = (m, r + n), 0
                if n == 0 or r == poy - 1:
                    deliveries.append((cycle, r, _BUF, *need, -1))
                else:
                    got = stacks[n % 2][r].pop()
                    if got != need:
                        raise AssertionError(f"turnaround stack of array {r} out of order")
                    deliveries.append((cycle, r, _NBR, *need, r + 1))
                regs[r, slot] = need
                if r >= 1 and n + 1 < h:
                    stacks[(n + 1) % 2][r - 1].append(dropped)
                    live = len(stacks[0][r - 1]) + len(stacks[1][r - 1])
                    max_stack = max(max_stack, live)
            issue_prefetch(n, j)
            finish_cycle(m, n, direction, poy * (pox - 1), False)
        if any(stacks[n % 2][r] for r in range(poy)):
            raise AssertionError("turnaround stack not drained at end of row")

    return _Program(
        n_cycles=cycle,
        positions=np.array(positions, dtype=np.int64),
        directions=tuple(directions),
        snapshots=np.array(snaps, dtype=np.int64),
        compute_cycles=np.array(compute_idx, dtype=np.int64),
        deliveries=np.array(deliveries, dtype=np.int64).reshape(-1, 6),
        prefetches=np.array(prefetches, dtype=np.int64).reshape(-1, 3),
        shift_reuse=np.array(shifts, dtype=np.int64),
        bulk=np.array(bulk, dtype=bool),
        max_stack=max_stack,
    )


# -- sub-kernel programs in input coordinates ---------------------------------

@dataclass(frozen=True)
class _SegmentProgram:
    """A whole sub-kernel traversal for one tile and one input channel.

    All coordinates are offsets (dy, dx) from the tile's input origin
    ``(stride * oy0 - pad, stride * ox0 - pad)``.
    """
    n_cycles: int
    kernel_pos: np.ndarray      # (n_cycles, 2) kx, ky in the full kernel; -1 in prologue
    directions: tuple[Direction, ...]
    snap_dy: np.ndarray         # (n_compute, poy, pox)
    snap_dx: np.ndarray
    snap_kx: np.ndarray         # (n_compute,)
    snap_ky: np.ndarray
    deliveries: np.ndarray      # (N, 6) cycle, array, tag, dy, dx, from_array
    prefetches: np.ndarray      # (P, 3) cycle, dy, dx
    shift_reuse: np.ndarray
    bulk: np.ndarray
    max_stack: int


@lru_cache(maxsize=512)
def _segment_program(off: int, width: int, nky: int, stride: int, pox: int, poy: int) -> _SegmentProgram:
    kpos, dirs, sdy, sdx, skx, sky, dels, pres, shifts, bulks = ([] for _ in range(10))
    base = 0
    max_stack = 0
    first = True
    for py in range(stride):
        for px in range(stride):
            w_lat = len(range(px, width, stride))
            h_lat = len(range(py, nky, stride))
            if w_lat == 0 or h_lat == 0:
                continue
            prog = _lattice_program(w_lat, h_lat, pox, poy, first)
            first = False
            m, n = prog.positions[:, 0], prog.positions[:, 1]
            active = m >= 0
            kx = np.where(active, off + px + stride * m, -1)
            ky = np.where(active, py + stride * n, -1)
            kpos.append(np.stack([kx, ky], axis=1))
            dirs.extend(prog.directions)
            sdy.append(py + stride * prog.snapshots[..., 1])
            sdx.append(off + px + stride * prog.snapshots[..., 0])
            cm = prog.positions[prog.compute_cycles]
            skx.append(off + px + stride * cm[:, 0])
            sky.append(py + stride * cm[:, 1])
            d = prog.deliveries.copy()
            d[:, 0] += base
            u, v = d[:, 3].copy(), d[:, 4].copy()
            d[:, 3] = py + stride * v
            d[:, 4] = off + px + stride * u
            dels.append(d)
            p = prog.prefetches.copy()
            p[:, 0] += base
            u, v = p[:, 1].copy(), p[:, 2].copy()
            p[:, 1] = py + stride * v
            p[:, 2] = off + px + stride * u
            pres.append(p)
            shifts.append(prog.shift_reuse)
            bulks.append(prog.bulk)
            max_stack = max(max_stack, prog.max_stack)
            base += prog.n_cycles
    return _SegmentProgram(
        n_cycles=base,
        kernel_pos=np.concatenate(kpos),
        directions=tuple(dirs),
        snap_dy=np.concatenate(sdy),
        snap_dx=np.concatenate(sdx),
        snap_kx=np.concatenate(skx),
        snap_ky=np.concatenate(sky),
        deliveries=np.concatenate(dels),
        prefetches=np.concatenate(pres),
        shift_reuse=np.concatenate(shifts),
        bulk=np.concatenate(bulks),
        max_stack=max_stack,
    )


def _check_width(width: int, cfg: AcceleratorConfig) -> None:
    if width > 2 * cfg.pox:
        raise PlanError(f"sub-kernel width {width} exceeds 2*pox={2 * cfg.pox}; segment first")


def _tile_counts(prog: _SegmentProgram, layer: LayerSpec, y0, x0) -> DataflowTrace:
    """Delivery counters for tiles whose input origins are ``(y0, x0)`` (arrays)."""
    y0 = np.atleast_1d(y0)[:, None]
    x0 = np.atleast_1d(x0)[:, None]
    d = prog.deliveries
    ys, xs = y0 + d[None, :, 3], x0 + d[None, :, 4]
    inb = (ys >= 0) & (ys < layer.niy) & (xs >= 0) & (xs < layer.nix)
    tag = d[None, :, 2]
    p = prog.prefetches
    py_, px_ = y0 + p[None, :, 1], x0 + p[None, :, 2]
    pinb = (py_ >= 0) & (py_ < layer.niy) & (px_ >= 0) & (px_ < layer.nix)
    direct = int(((tag == _BUF) & inb).sum())
    pre = int(((tag == _PRE) & inb).sum())
    return DataflowTrace(
        buffer_read_count=direct + int(pinb.sum()),
        direct_read_count=direct,
        neighbor_reuse_count=int((tag == _NBR).sum()),
        prefetch_count=pre,
        zero_pad_count=int((((tag == _BUF) | (tag == _PRE)) & ~inb).sum()),
        shift_reuse_count=int(prog.shift_reuse.sum()) * y0.shape[0],
        total_cycles=prog.n_cycles * y0.shape[0],
    )


def plan_zflow(layer: LayerSpec, cfg: AcceleratorConfig, tile_origin: tuple[int, int] = (0, 0),
               sub_kernel_x_range: tuple[int, int] | None = None) -> DataflowTrace:
    """Cycle-by-cycle Z-flow trace for one tile, one input channel, one sub-kernel.

    ``tile_origin`` is the output coordinate ``(ox0, oy0)`` of the tile's
    top-left PE. ``sub_kernel_x_range`` is ``(x_offset, width)``; the default is
    the whole kernel width. Kernel positions in the trace are local to the
    sub-kernel.
    """
    off, width = sub_kernel_x_range if sub_kernel_x_range is not None else (0, layer.nkx)
    if off < 0 or width < 1 or off + width > layer.nkx:
        raise PlanError(f"sub-kernel range {(off, width)} outside kernel width {layer.nkx}")
    _check_width(width, cfg)
    ox0, oy0 = tile_origin
    prog = _segment_program(off, width, layer.nky, layer.stride, cfg.pox, cfg.poy)
    y0 = layer.stride * oy0 - layer.pad
    x0 = layer.stride * ox0 - layer.pad
    trace = _tile_counts(prog, layer, y0, x0)
    trace.register_file_size = register_file_size(cfg)

    by_cycle: dict[int, list[list[PixelSource]]] = {}
    for cyc, arr, tag, dy, dx, frm in prog.deliveries.tolist():
        y, x = y0 + dy, x0 + dx
        slots = by_cycle.setdefault(cyc, [[] for _ in range(cfg.poy)])
        if tag == _NBR:
            src = PixelSource(SourceTag.NEIGHBOR_REUSE, (y, x), frm)
        elif 0 <= y < layer.niy and 0 <= x < layer.nix:
            src = PixelSource(SourceTag.BUFFER_READ if tag == _BUF else SourceTag.PREFETCH_REGISTER, (y, x))
        else:
            src = PixelSource(SourceTag.ZERO_PAD, (y, x))
        slots[arr].append(src)
    pre_by_cycle: dict[int, list[tuple[int, int]]] = {}
    for cyc, dy, dx in prog.prefetches.tolist():
        y, x = y0 + dy, x0 + dx
        if 0 <= y < layer.niy and 0 <= x < layer.nix:
            pre_by_cycle.setdefault(cyc, []).append((y, x))
    for cyc in range(prog.n_cycles):
        kx, ky = prog.kernel_pos[cyc]
        pos = None if kx < 0 else (int(kx) - off, int(ky))
        slots = by_cycle.get(cyc, [[] for _ in range(cfg.poy)])
        trace.events.append(CycleEvent(
            cycle=cyc, kernel_pos=pos, direction=prog.directions[cyc],
            per_array_sources=tuple(tuple(s) for s in slots),
            prefetch_issued=tuple(pre_by_cycle.get(cyc, ())),
            shift_reuse=int(prog.shift_reuse[cyc]), bulk=bool(prog.bulk[cyc])))
    return trace


def stride2_plan(layer: LayerSpec, cfg: AcceleratorConfig, tile_origin: tuple[int, int] = (0, 0),
                 sub_kernel_x_range: tuple[int, int] | None = None) -> DataflowTrace:
    """Z-flow plan for a stride-2 layer (stride phases traversed one after another)."""
    if layer.stride != 2:
        raise PlanError("stride2_plan needs a stride-2 layer")
    return plan_zflow(layer, cfg, tile_origin, sub_kernel_x_range)


# -- cycle model ---------------------------------------------------------------

def output_channel_groups(layer: LayerSpec, cfg: AcceleratorConfig,
                          channels: tuple[int, int] | None = None) -> int:
    """Passes over the Pof lanes needed for an output-channel range.

    Lanes share the broadcast input pixel, so a group convolution can only
    pack channels of one group into a pass.
    """
    lo, hi = channels if channels is not None else (0, layer.nof)
    if layer.kind is LayerKind.GROUP_CONV:
        g = layer.nof_group
        passes = 0
        for grp in range(lo // g, (hi - 1) // g + 1):
            count = min(hi, (grp + 1) * g) - max(lo, grp * g)
            passes += math.ceil(count / cfg.pof)
        return passes
    return math.ceil((hi - lo) / cfg.pof)


def layer_cycles(layer: LayerSpec, cfg: AcceleratorConfig, rows: int | None = None,
                 channels: tuple[int, int] | None = None) -> tuple[int, int]:
    """``(mac_cycles, prologue_cycles)`` for ``rows`` output rows and a channel range."""
    rows = layer.noy if rows is None else rows
    if rows == 0:
        return 0, 0
    tiles = (math.ceil(layer.nox / cfg.pox) * math.ceil(rows / cfg.poy)
             * output_channel_groups(layer, cfg, channels))
    mac = tiles * layer.in_channels_per_output * layer.nkx * layer.nky
    return mac, tiles * (cfg.pox - 1)


def useful_macs(layer: LayerSpec, rows: int | None = None,
                channels: tuple[int, int] | None = None) -> int:
    rows = layer.noy if rows is None else rows
    lo, hi = channels if channels is not None else (0, layer.nof)
    return layer.nkx * layer.nky * layer.in_channels_per_output * layer.nox * rows * (hi - lo)


def compute_cycles(layer: LayerSpec, cfg: AcceleratorConfig) -> int:
    mac, prologue = layer_cycles(layer, cfg)
    return mac + prologue


# -- functional execution -------------------------------------------------------

def _padded(x: np.ndarray, layer: LayerSpec, cfg: AcceleratorConfig) -> np.ndarray:
    s = layer.stride
    n_tx = math.ceil(layer.nox / cfg.pox)
    n_ty = math.ceil(layer.noy / cfg.poy)
    hgt = s * (n_ty * cfg.poy - 1) + layer.nky
    wid = s * (n_tx * cfg.pox - 1) + layer.nkx
    hgt = max(hgt, layer.niy + layer.pad)
    wid = max(wid, layer.nix + layer.pad)
    xp = np.zeros((x.shape[0], hgt, wid), dtype=np.float64)
    xp[:, layer.pad:layer.pad + layer.niy, layer.pad:layer.pad + layer.nix] = x
    return xp


def _run_segment(layer: LayerSpec, cfg: AcceleratorConfig, xp: np.ndarray, w: np.ndarray,
                 prog: _SegmentProgram) -> np.ndarray:
    """Partial int64 output plane of one sub-kernel, all tiles, all channels."""
    s = layer.stride
    pox, poy = cfg.pox, cfg.poy
    n_tx = math.ceil(layer.nox / pox)
    n_ty = math.ceil(layer.noy / poy)
    acc = np.zeros((layer.nof, n_ty * poy, n_tx * pox), dtype=np.float64)
    ox0 = s * pox * np.arange(n_tx)
    wk = w[:, :, prog.snap_ky, prog.snap_kx].astype(np.float64)   # (F, Cper, T)
    n_t = prog.snap_dy.shape[0]
    for ty in range(n_ty):
        ys = s * poy * ty + prog.snap_dy                            # (T, poy, pox)
        xs = ox0[:, None, None, None] + prog.snap_dx[None]          # (ntx, T, poy, pox)
        ys = np.broadcast_to(ys[None], xs.shape)
        patch = xp[:, ys, xs]                                       # (C, ntx, T, poy, pox)
        patch = patch.transpose(0, 2, 1, 3, 4).reshape(xp.shape[0], n_t, -1)
        if layer.kind is LayerKind.DWCV:
            out = np.einsum("ct,ctm->cm", wk[:, 0], patch)
        elif layer.kind is LayerKind.CONV:
            out = wk.reshape(layer.nof, -1) @ patch.reshape(-1, patch.shape[-1])
        else:
            out = np.empty((layer.nof, patch.shape[-1]))
            gi, go = layer.nif_group, layer.nof_group
            for g in range(layer.group_num):
                wg = wk[g * go:(g + 1) * go].reshape(go, -1)
                out[g * go:(g + 1) * go] = wg @ patch[g * gi:(g + 1) * gi].reshape(-1, patch.shape[-1])
        out = out.reshape(layer.nof, n_tx, poy, pox).transpose(0, 2, 1, 3)
        acc[:, ty * poy:(ty + 1) * poy] = out.reshape(layer.nof, poy, n_tx * pox)
    return np.rint(acc[:, :layer.noy, :layer.nox]).astype(np.int64)


def execute_layer_partials(layer: LayerSpec, x: np.ndarray, w: np.ndarray,
                           cfg: AcceleratorConfig) -> tuple[list[np.ndarray], DataflowTrace]:
    """Per-segment int64 partial planes and the aggregate trace."""
    x = check_tensor_i8(x, layer.input_shape, "input")
    w = check_tensor_i8(w, layer.weight_shape, "weights")
    plan = segment_kernel(layer.nkx, cfg.pox, layer.stride, layer.nky)
    xp = _padded(x, layer, cfg)
    n_tx = math.ceil(layer.nox / cfg.pox)
    n_ty = math.ceil(layer.noy / cfg.poy)
    oy0, ox0 = np.meshgrid(np.arange(n_ty) * cfg.poy, np.arange(n_tx) * cfg.pox, indexing="ij")
    y0 = (layer.stride * oy0 - layer.pad).ravel()
    x0 = (layer.stride * ox0 - layer.pad).ravel()
    if layer.kind is LayerKind.DWCV:
        # lanes of a pass stream different channels: one traversal per channel
        channel_passes = layer.nof
    else:
        channel_passes = output_channel_groups(layer, cfg) * layer.in_channels_per_output
    partials = []
    agg = DataflowTrace(register_file_size=register_file_size(cfg))
    for off, width in plan:
        prog = _segment_program(off, width, layer.nky, layer.stride, cfg.pox, cfg.poy)
        partials.append(_run_segment(layer, cfg, xp, w, prog))
        agg.add(_tile_counts(prog, layer, y0, x0), channel_passes)
    return partials, agg


def execute_layer(layer: LayerSpec, x: np.ndarray, w: np.ndarray, cfg: AcceleratorConfig
                  ) -> tuple[np.ndarray, DataflowTrace, int]:
    """Run a layer through the Z-flow engine.

    ``x`` is an int8 ``(nif, niy, nix)`` tensor, ``w`` an int8
    ``(nof, nif_per_output, nky, nkx)`` tensor. Returns the int8 output, the
    aggregate trace counters and the compute-cycle estimate.
    """
    partials, agg = execute_layer_partials(layer, x, w, cfg)
    acc = compose_partials(partials)
    agg.total_cycles = compute_cycles(layer, cfg)
    return requantize(acc, layer), agg, agg.total_cycles


def execute_layer_acc(layer: LayerSpec, x: np.ndarray, w: np.ndarray, cfg: AcceleratorConfig) -> np.ndarray:
    """int64 accumulator plane before requantization."""
    partials, _ = execute_layer_partials(layer, x, w, cfg)
    return compose_partials(partials)


def check_weights_shape(layer: LayerSpec, w: np.ndarray) -> None:
    if tuple(w.shape) != layer.weight_shape:
        raise ShapeError(f"weights shape {w.shape} != {layer.weight_shape}")
