"""Regenerate the builtin network JSON assets under src/lkaccel/networks/.

The large networks approximate the published architectures at the block
level; what was simplified is written into each file's ``provenance`` field.
"""

from __future__ import annotations

from pathlib import Path

from lkaccel.netio import dumps_network
from lkaccel.netmodel import (Activation, BlockKind, BlockSpec, LayerKind, LayerSpec, NetworkSpec,
                              build_mbconv, build_pyconv_block, build_replk_block, default_shift)

OUT = Path(__file__).resolve().parents[1] / "src" / "lkaccel" / "networks"


def conv(kind, c_in, c_out, k, stride, hw, groups=1, act=Activation.RELU):
    fan_in = k * k * (1 if kind is LayerKind.DWCV else c_in // groups)
    return LayerSpec(kind, nix=hw, niy=hw, nif=c_in, nof=c_out, nkx=k, nky=k, stride=stride,
                     pad=k // 2, group_num=groups, activation=act,
                     requant_shift=default_shift(kind, fan_in))


def mbconv_demo() -> NetworkSpec:
    return NetworkSpec("mbconv-demo", (
        build_mbconv(24, 6, 3, 1, 24, 28, 28),
        build_mbconv(24, 6, 3, 1, 24, 28, 28),
        build_mbconv(24, 6, 5, 2, 40, 28, 28),
    ), "three expansion-6 inverted bottlenecks at 28x28")


def pyconv_demo() -> NetworkSpec:
    return NetworkSpec("pyconv-demo", (
        build_pyconv_block(64, 56, 56, [9, 7, 5, 3], [4, 4, 4, 4], [4, 8, 16, 32]),
    ), "one four-branch pyramid block, equal groups so the branches can be packed together")


def replk_demo() -> NetworkSpec:
    return NetworkSpec("replk-demo", (
        build_replk_block(64, 13, 28, 28),
        build_replk_block(64, 31, 28, 28),
    ), "two large-kernel depthwise blocks (13x13 and 31x31) at 28x28x64")


def mobilenetv2() -> NetworkSpec:
    items: list = [conv(LayerKind.CONV, 3, 32, 3, 2, 224)]
    c, hw = 32, 112
    for t, c_out, n, s in [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
                           (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]:
        for i in range(n):
            stride = s if i == 0 else 1
            if t == 1:
                dw = conv(LayerKind.DWCV, c, c, 3, stride, hw)
                proj = conv(LayerKind.CONV, c, c_out, 1, 1, dw.noy, act=Activation.NONE)
                blk = BlockSpec(BlockKind.BYPASS_BRANCH, (dw, proj))
            else:
                blk = build_mbconv(c, t, 3, stride, c_out, hw, hw)
            items.append(blk)
            c, hw = c_out, blk.output_shape[1]
    items.append(conv(LayerKind.CONV, c, 1280, 1, 1, hw))
    return NetworkSpec("mobilenetv2", tuple(items),
                       "MobileNetV2 1.0 at 224x224 (t,c,n,s table); classifier omitted")


def _bottleneck(c_in, width, stride, hw):
    a = conv(LayerKind.CONV, c_in, width, 1, 1, hw)
    b = conv(LayerKind.CONV, width, width, 3, stride, hw)
    c = conv(LayerKind.CONV, width, 4 * width, 1, 1, b.noy, act=Activation.NONE)
    return BlockSpec(BlockKind.BYPASS_BRANCH, (a, b, c),
                     shortcut=(stride == 1 and c_in == 4 * width))


def resnet50() -> NetworkSpec:
    items: list = [conv(LayerKind.CONV, 3, 64, 7, 2, 224),
                   conv(LayerKind.DWCV, 64, 64, 3, 2, 112, act=Activation.NONE)]
    c, hw = 64, 56
    for width, n, s in [(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)]:
        for i in range(n):
            blk = _bottleneck(c, width, s if i == 0 else 1, hw)
            items.append(blk)
            c, hw = blk.output_shape[0], blk.output_shape[1]
    return NetworkSpec("resnet50", tuple(items),
                       "ResNet-50 (stride on the 3x3) at 224x224; max-pool replaced by a stride-2 "
                       "3x3 depthwise stand-in; projection shortcuts and classifier omitted")


def replknet31_like() -> NetworkSpec:
    items: list = [conv(LayerKind.CONV, 3, 128, 3, 2, 224),
                   conv(LayerKind.DWCV, 128, 128, 3, 2, 112)]
    c, hw = 128, 56
    for stage, (width, n, lk) in enumerate([(128, 2, 31), (256, 2, 29), (512, 18, 27), (1024, 2, 13)]):
        if stage:
            items.append(conv(LayerKind.CONV, c, width, 1, 1, hw))
            items.append(conv(LayerKind.DWCV, width, width, 3, 2, hw))
            c, hw = width, hw // 2
        for _ in range(n):
            items.append(build_replk_block(c, lk, hw, hw))
    return NetworkSpec("replknet31-like", tuple(items),
                       "RepLKNet-31B stage layout (channels 128-1024, depths 2/2/18/2, kernels "
                       "31/29/27/13) at 224x224; ConvFFN and norm layers omitted")


def pyconvresnet50_like() -> NetworkSpec:
    items: list = [conv(LayerKind.CONV, 3, 64, 7, 2, 224),
                   conv(LayerKind.DWCV, 64, 64, 3, 2, 112, act=Activation.NONE)]
    c, hw = 64, 56
    stages = [(64, 3, 1, [3, 5, 7, 9]), (128, 4, 2, [3, 5, 7]), (256, 6, 2, [3, 5]), (512, 3, 2, [3])]
    for width, n, s, kernels in stages:
        for i in range(n):
            stride = s if i == 0 else 1
            reduce = conv(LayerKind.CONV, c, width, 1, stride, hw)
            hw = reduce.noy
            per = width // len(kernels)
            per -= per % 4
            nofs = [per] * (len(kernels) - 1) + [width - per * (len(kernels) - 1)]
            pyr = build_pyconv_block(width, hw, hw, kernels, [4] * len(kernels), nofs)
            expand = conv(LayerKind.CONV, width, 4 * width, 1, 1, hw, act=Activation.NONE)
            items += [reduce, pyr, expand]
            c = 4 * width
    return NetworkSpec("pyconvresnet50-like", tuple(items),
                       "PyConvResNet-50 pyramid kernels per stage at 224x224 with four groups in "
                       "every branch (equal groups keep the branches packable); stride on the "
                       "first 1x1; shortcuts and classifier omitted")


BUILDERS = [mbconv_demo, pyconv_demo, replk_demo, mobilenetv2, resnet50, replknet31_like,
            pyconvresnet50_like]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for make in BUILDERS:
        net = make()
        path = OUT / f"{net.name}.json"
        path.write_text(dumps_network(net), encoding="utf-8")
        print(f"{path.name}: {len(net.items)} items")


if __name__ == "__main__":
    main()
