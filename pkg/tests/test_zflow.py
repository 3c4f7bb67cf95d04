import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lkaccel.errors import PlanError, ShapeError
from lkaccel.netmodel import AcceleratorConfig, LayerKind, LayerSpec
from lkaccel.perf import oracle_conv
from lkaccel.zflow import (Direction, SourceTag, compute_cycles, execute_layer, plan_zflow,
                           register_file_size, stride2_plan)


def footprint(layer, cfg, ox0, oy0):
    """Distinct in-bounds input pixels read by one output tile (brute force)."""
    px = set()
    for oy in range(oy0, oy0 + cfg.poy):
        for ox in range(ox0, ox0 + cfg.pox):
            for ky in range(layer.nky):
                for kx in range(layer.nkx):
                    y = oy * layer.stride + ky - layer.pad
                    x = ox * layer.stride + kx - layer.pad
                    if 0 <= y < layer.niy and 0 <= x < layer.nix:
                        px.add((y, x))
    return len(px)


def single(k, ky=None, stride=1, pad=0, n=64):
    return LayerSpec(LayerKind.CONV, n, n, 1, 1, k, ky or k, stride=stride, pad=pad)


def test_3x3_interior_reads(cfg):
    t = plan_zflow(single(3), cfg, (8, 8))
    assert t.buffer_read_count == 100 == footprint(single(3), cfg, 8, 8)
    assert t.total_cycles == 9 + cfg.pox - 1


def test_pointwise_has_no_reuse(cfg):
    t = plan_zflow(single(1), cfg, (8, 8))
    assert (t.buffer_read_count, t.neighbor_reuse_count, t.shift_reuse_count) == (64, 0, 0)
    assert t.total_cycles == 1 + cfg.pox - 1


def test_horizontal_shift_serves_two_of_three_columns(cfg):
    t = plan_zflow(single(3, 1), cfg, (8, 8))
    compute = [e for e in t.events if e.kernel_pos is not None]
    assert [e.kernel_pos for e in compute] == [(0, 0), (1, 0), (2, 0)]
    for e in compute[1:]:
        assert e.shift_reuse == (cfg.pox - 1) * cfg.poy
        assert all(len(a) == 1 for a in e.per_array_sources)
    assert compute[0].shift_reuse == 0


@pytest.mark.parametrize("k", [2, 3, 5, 7, 11, 16])
def test_serpentine_order_and_directions(cfg, k):
    t = plan_zflow(single(k, 3), cfg, (8, 8))
    pos = [e.kernel_pos for e in t.events if e.kernel_pos is not None]
    assert sorted(pos) == sorted((x, y) for y in range(3) for x in range(k))
    for e in t.events:
        if e.kernel_pos is None:
            continue
        kx, ky = e.kernel_pos
        want = Direction.LEFT_TO_RIGHT if ky % 2 == 0 else Direction.RIGHT_TO_LEFT
        assert e.direction is want
    rows = [y for _, y in pos]
    assert rows == sorted(rows)


def test_counters_match_event_tallies(cfg):
    layer = single(5, pad=2, n=20)
    for origin in [(0, 0), (8, 8), (16, 16)]:
        t = plan_zflow(layer, cfg, origin)
        tags = [s.tag for e in t.events for arr in e.per_array_sources for s in arr]
        assert t.direct_read_count == tags.count(SourceTag.BUFFER_READ)
        assert t.neighbor_reuse_count == tags.count(SourceTag.NEIGHBOR_REUSE)
        assert t.prefetch_count == tags.count(SourceTag.PREFETCH_REGISTER)
        assert t.zero_pad_count == tags.count(SourceTag.ZERO_PAD)
        assert t.buffer_read_count == t.direct_read_count + sum(len(e.prefetch_issued) for e in t.events)
        assert t.deliveries == len(tags)
        # every buffer read lies inside the input; zero pads lie outside
        for e in t.events:
            for arr in e.per_array_sources:
                for s in arr:
                    inside = 0 <= s.coord[0] < layer.niy and 0 <= s.coord[1] < layer.nix
                    if s.tag is SourceTag.ZERO_PAD:
                        assert not inside
                    elif s.tag is SourceTag.BUFFER_READ:
                        assert inside
        # edge tiles read exactly the in-bounds footprint as well
        assert t.buffer_read_count == footprint(layer, cfg, *origin)


def test_one_new_pixel_per_array_except_inflection(cfg):
    t = plan_zflow(single(7), cfg, (8, 8))
    for e in t.events:
        if not e.bulk:
            assert all(len(a) <= 1 for a in e.per_array_sources)
            assert sum(len(a) for a in e.per_array_sources) <= cfg.poy


@pytest.mark.parametrize("k,bound", [(3, 17 * 17), (1, 64), (7, 21 * 21)])
def test_stride2_read_bounds(cfg, k, bound):
    layer = single(k, stride=2)
    t = stride2_plan(layer, cfg, (1, 1))
    assert t.buffer_read_count <= bound
    assert t.buffer_read_count == footprint(layer, cfg, 1, 1)
    assert t.total_cycles == k * k + cfg.pox - 1
    if k == 1:
        assert t.buffer_read_count == 64


def test_stride2_plan_requires_stride2(cfg):
    with pytest.raises(PlanError):
        stride2_plan(single(3), cfg)


def test_wide_subkernel_rejected(cfg):
    with pytest.raises(PlanError):
        plan_zflow(single(17, 1), cfg)
    assert plan_zflow(single(17, 1), cfg, sub_kernel_x_range=(8, 8)).total_cycles == 8 + 7


def test_register_file_constant_in_kernel_size(cfg):
    sizes = {plan_zflow(single(k, 2), cfg, (8, 8)).register_file_size for k in range(1, 17)}
    assert sizes == {register_file_size(cfg)}
    assert register_file_size(AcceleratorConfig(pox=4, poy=4)) == 16 + 4 + 3 * 7


def test_cycle_formula_example(cfg):
    layer = LayerSpec(LayerKind.CONV, 8, 8, 1, 16, 3, 3, pad=1)
    assert compute_cycles(layer, cfg) == 9 + cfg.pox - 1


def test_zero_weights_give_zero(cfg, rng):
    layer = LayerSpec(LayerKind.DWCV, 11, 9, 3, 3, 5, 5, pad=2)
    x = rng.integers(-128, 128, layer.input_shape, dtype=np.int8)
    out, _, _ = execute_layer(layer, x, np.zeros(layer.weight_shape, np.int8), cfg)
    assert not out.any()


def test_conv5_stride2_matches_direct(cfg, rng):
    layer = LayerSpec(LayerKind.CONV, 21, 21, 3, 4, 5, 5, stride=2, pad=2, requant_shift=6)
    x = rng.integers(-128, 128, layer.input_shape, dtype=np.int8)
    w = rng.integers(-128, 128, layer.weight_shape, dtype=np.int8)
    out, trace, cycles = execute_layer(layer, x, w, cfg)
    assert np.array_equal(out, oracle_conv(layer, x, w))
    assert trace.total_cycles == cycles


def test_shape_errors(cfg):
    layer = LayerSpec(LayerKind.CONV, 8, 8, 2, 2, 3, 3, pad=1)
    with pytest.raises(ShapeError):
        execute_layer(layer, np.zeros((2, 8, 7), np.int8), np.zeros(layer.weight_shape, np.int8), cfg)
    with pytest.raises(ShapeError):
        execute_layer(layer, np.zeros(layer.input_shape, np.int8), np.zeros((2, 2, 3, 2), np.int8), cfg)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(list(LayerKind)), k=st.integers(1, 20), s=st.sampled_from([1, 2]),
       n=st.integers(1, 24), c=st.sampled_from([1, 2, 4]), seed=st.integers(0, 2**16))
def test_matches_oracle_property(kind, k, s, n, c, seed):
    n = max(n, k)
    g = 2 if kind is LayerKind.GROUP_CONV else 1
    cin = c * g
    layer = LayerSpec(kind, n, n, cin, cin, k, k, stride=s, pad=k // 2, group_num=g,
                      requant_shift=8)
    r = np.random.default_rng(seed)
    x = r.integers(-128, 128, layer.input_shape, dtype=np.int8)
    w = r.integers(-128, 128, layer.weight_shape, dtype=np.int8)
    out, _, _ = execute_layer(layer, x, w, AcceleratorConfig(pox=4, poy=4, pof=4))
    assert np.array_equal(out, oracle_conv(layer, x, w))


def test_dump_lines_format(cfg):
    lines = plan_zflow(single(3), cfg, (8, 8)).dump_lines()
    assert lines[0].count(",") == 6
    assert any(",NeighborReuse," in l for l in lines)
