import numpy as np
import pytest

from lkaccel.errors import ShapeError
from lkaccel.kseg import (compose_partials, first_read_column, segment_kernel, split_weights,
                          sub_input_offset)
from lkaccel.netmodel import LayerKind, LayerSpec
from lkaccel.perf import oracle_conv_acc


def test_examples():
    assert segment_kernel(31, 8).sub_kernels == ((0, 8), (8, 8), (16, 8), (24, 7))
    assert segment_kernel(16, 8).sub_kernels == ((0, 16),)
    assert segment_kernel(17, 8).sub_kernels == ((0, 8), (8, 8), (16, 1))
    assert segment_kernel(24, 8).sub_kernels == ((0, 8), (8, 8), (16, 8))


@pytest.mark.parametrize("pox", [4, 8, 16])
def test_plan_invariants_exhaustive(pox):
    for nkx in range(1, 65):
        for stride in (1, 2):
            plan = segment_kernel(nkx, pox, stride)
            widths = [w for _, w in plan]
            offs = [o for o, _ in plan]
            assert sum(widths) == nkx
            assert offs == list(np.cumsum([0] + widths[:-1]))
            assert all(1 <= w <= 2 * pox for w in widths)
            assert all(w == pox for w in widths[:-1])
            if nkx <= 2 * pox:
                assert widths == [nkx]
            else:
                assert widths[0] % pox == 0


def test_offsets():
    assert sub_input_offset((8, 8), 1) == 8
    assert sub_input_offset((0, 8), 2) == 0
    assert first_read_column((24, 7), 2, 3) == 30


def _partials(layer, x, w, cuts):
    out = []
    for lo, hi in cuts:
        wz = np.zeros_like(w)
        wz[..., lo:hi] = w[..., lo:hi]
        out.append(oracle_conv_acc(layer, x, wz))
    return out


def test_compose_split_5_as_4_plus_1(rng):
    layer = LayerSpec(LayerKind.CONV, 12, 10, 3, 2, 5, 5, pad=2)
    x = rng.integers(-128, 128, layer.input_shape, dtype=np.int8)
    w = rng.integers(-128, 128, layer.weight_shape, dtype=np.int8)
    full = oracle_conv_acc(layer, x, w)
    assert np.array_equal(compose_partials(_partials(layer, x, w, [(0, 4), (4, 5)])), full)
    assert np.array_equal(compose_partials([full]), full)
    zero_second = w.copy()
    zero_second[..., 4:] = 0
    first = _partials(layer, x, zero_second, [(0, 4)])[0]
    assert np.array_equal(compose_partials([first, np.zeros_like(first)]), first)


def test_split_weights_pieces():
    w = np.arange(2 * 3 * 17).reshape(2, 1, 3, 17)
    pieces = split_weights(w, segment_kernel(17, 8))
    assert [p.shape[-1] for p in pieces] == [8, 8, 1]
    assert np.array_equal(np.concatenate(pieces, axis=-1), w)


def test_compose_shape_mismatch():
    with pytest.raises(ShapeError):
        compose_partials([np.zeros((1, 2, 2), int), np.zeros((1, 2, 3), int)])
    with pytest.raises(ShapeError):
        compose_partials([])
    with pytest.raises(TypeError):
        compose_partials([np.zeros((1, 2, 2))])
