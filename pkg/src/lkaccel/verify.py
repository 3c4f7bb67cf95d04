"""Seeded self-checks: Z-flow against the direct oracle, Kseg partitions, schedules."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .kseg import compose_partials, segment_kernel
from .netmodel import (Activation, AcceleratorConfig, LayerKind, LayerSpec, build_mbconv,
                       build_pyconv_block, build_replk_block, requantize)
from .perf import oracle_conv_acc
from .sched import (check_conflicts, check_dependencies, schedule_block, schedule_layer)
from .zflow import execute_layer_partials, plan_zflow

KERNELS = (1, 3, 5, 7, 9, 13, 17, 24, 31, 33)
STRIDES = (1, 2)
KINDS = tuple(LayerKind)
DEFAULT_SEED = 20240607


def random_layer(rng: np.random.Generator, max_hw: int = 64, max_c: int = 16) -> LayerSpec:
    kind = KINDS[rng.integers(len(KINDS))]
    k = int(rng.choice(KERNELS))
    stride = int(rng.choice(STRIDES))
    pad = k // 2 if rng.random() < 0.7 else int(rng.integers(0, k // 2 + 1))
    lo = max(1, k - 2 * pad)
    nix = int(rng.integers(lo, max(lo, max_hw) + 1))
    niy = int(rng.integers(lo, max(lo, max_hw) + 1))
    if kind is LayerKind.CONV:
        nif, nof, groups = int(rng.integers(1, max_c + 1)), int(rng.integers(1, max_c + 1)), 1
    elif kind is LayerKind.DWCV:
        nif = nof = int(rng.integers(1, max_c + 1))
        groups = 1
    else:
        groups = int(rng.choice([2, 4]))
        nif = groups * int(rng.integers(1, max_c // groups + 1))
        nof = groups * int(rng.integers(1, max_c // groups + 1))
    act = Activation.RELU if rng.random() < 0.5 else Activation.NONE
    return LayerSpec(kind, nix=nix, niy=niy, nif=nif, nof=nof, nkx=k, nky=k, stride=stride,
                     pad=pad, group_num=groups, activation=act,
                     requant_shift=int(rng.integers(0, 13)))


def random_tensors(layer: LayerSpec, rng: np.random.Generator):
    x = rng.integers(-128, 128, size=layer.input_shape, dtype=np.int8)
    w = rng.integers(-128, 128, size=layer.weight_shape, dtype=np.int8)
    return x, w


@dataclass
class CaseResult:
    index: int
    layer: LayerSpec
    ok: bool

    def describe(self) -> str:
        d = asdict(self.layer)
        d["kind"] = self.layer.kind.value
        d["activation"] = self.layer.activation.value
        return f"case {self.index}: " + ", ".join(f"{k}={v}" for k, v in d.items())


@dataclass
class VerifyReport:
    oracle: list[CaseResult] = field(default_factory=list)
    kseg: list[tuple[str, bool]] = field(default_factory=list)
    schedules: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (all(c.ok for c in self.oracle) and all(ok for _, ok in self.kseg)
                and all(ok for _, ok in self.schedules))

    def lines(self) -> list[str]:
        def count(rows):
            return sum(1 for r in rows if (r.ok if isinstance(r, CaseResult) else r[1]))
        out = [f"{count(self.oracle)}/{len(self.oracle)} oracle matches",
               f"{count(self.kseg)}/{len(self.kseg)} kseg partition checks",
               f"{count(self.schedules)}/{len(self.schedules)} schedule checks"]
        bad = next((c for c in self.oracle if not c.ok), None)
        if bad is not None:
            out.append("first mismatch: " + bad.describe())
        bad = next((name for name, ok in self.kseg + self.schedules if not ok), None)
        if bad is not None:
            out.append("first failing check: " + bad)
        out.append("PASS" if self.ok else "FAIL")
        return out


def oracle_case(layer: LayerSpec, x, w, cfg: AcceleratorConfig, fault: bool = False) -> bool:
    w_engine = w.copy()
    if fault:
        w_engine.flat[0] = np.int8(w_engine.flat[0] ^ 1)
    partials, _ = execute_layer_partials(layer, x, w_engine, cfg)
    acc = compose_partials(partials)
    ref_acc = oracle_conv_acc(layer, x, w)
    return bool(np.array_equal(acc, ref_acc)
                and np.array_equal(requantize(acc, layer), requantize(ref_acc, layer)))


def kseg_checks(cfg: AcceleratorConfig, rng: np.random.Generator) -> list[tuple[str, bool]]:
    out = []
    for k in (17, 24, 31, 33):
        for s in (1, 2):
            layer = LayerSpec(LayerKind.CONV, nix=40, niy=20, nif=2, nof=3, nkx=k, nky=3,
                              stride=s, pad=k // 2)
            x, w = random_tensors(layer, rng)
            plan = segment_kernel(k, cfg.pox, s, layer.nky)
            seg_cycles = sum(plan_zflow(layer, cfg, sub_kernel_x_range=e).total_cycles - (cfg.pox - 1)
                             for e in plan)
            ok = oracle_case(layer, x, w, cfg) and seg_cycles == k * layer.nky
            out.append((f"kseg nkx={k} stride={s}", ok))
    return out


def schedule_checks(cfg: AcceleratorConfig) -> list[tuple[str, bool]]:
    cases = {
        "layer 56x56x64 k3": lambda: schedule_layer(
            LayerSpec(LayerKind.CONV, 56, 56, 64, 64, 3, 3, pad=1), cfg),
        "mbconv baseline": lambda: schedule_block(build_mbconv(24, 6, 3, 1, 24, 28, 28), cfg, False),
        "mbconv VF 3 tiles": lambda: schedule_block(build_mbconv(24, 6, 3, 1, 24, 28, 28), cfg, True, 3),
        "replk31 VF": lambda: schedule_block(build_replk_block(64, 31, 28, 28), cfg, True),
        "pyconv HF": lambda: schedule_block(
            build_pyconv_block(64, 56, 56, [9, 7, 5, 3], [4, 4, 4, 4], [4, 8, 16, 32]), cfg, True),
    }
    out = []
    for name, make in cases.items():
        s = make()
        out.append((name, not check_conflicts(s) and not check_dependencies(s)))
    return out


def run_verify(seed: int = DEFAULT_SEED, n_cases: int = 500, cfg: AcceleratorConfig | None = None,
               inject_fault: bool = False, stop_on_failure: bool = False) -> VerifyReport:
    cfg = cfg or AcceleratorConfig()
    rng = np.random.default_rng(seed)
    report = VerifyReport()
    for i in range(n_cases):
        layer = random_layer(rng)
        x, w = random_tensors(layer, rng)
        ok = oracle_case(layer, x, w, cfg, fault=inject_fault and i == 0)
        report.oracle.append(CaseResult(i, layer, ok))
        if not ok and stop_on_failure:
            return report
    report.kseg = kseg_checks(cfg, rng)
    report.schedules = schedule_checks(cfg)
    return report
