"""Command-line frontend: ``lkaccel simulate | sweep-kernel | compare-fusion | verify``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import CapacityError, SchemaError, SimError
from .netio import builtin_names, load_builtin, load_network
from .netmodel import AcceleratorConfig, BlockSpec, LayerKind, LayerSpec, NetworkSpec, macs_of
from .perf import baseline_split_model, gops, zflow_arrangement_bits
from .sched import Policy, schedule_block, schedule_network
from .verify import DEFAULT_SEED, run_verify
from .kseg import segment_kernel
from .zflow import compute_cycles, plan_zflow

EXIT_OK, EXIT_VERIFY, EXIT_SCHEMA, EXIT_CAPACITY = 0, 1, 2, 3

SIM_COLUMNS = ["policy", "item", "strategy", "cycles", "wall_time_us", "gops", "utilization",
               "dram_bytes_in", "dram_bytes_wt", "dram_bytes_out"]
SWEEP_COLUMNS = ["k", "zflow_gops_model", "baseline_gops_model", "zflow_arrangement_bits",
                 "baseline_line_buffer_bits", "padded_fraction"]
FUSION_COLUMNS = ["item", "block_kind", "fused_strategy", "baseline_cycles", "fused_cycles",
                  "baseline_transfer_cycles", "fused_transfer_cycles", "baseline_dram_bytes",
                  "fused_dram_bytes", "overall_savings_pct", "transmission_savings_pct",
                  "transmission_bytes_savings_pct", "note"]

SWEEP_GEOMETRY = dict(nix=56, niy=56, nif=64, nof=64)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_csv(rows: list[dict], columns: list[str], out: str | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return text


def _sidecar(out: str | None, suffix: str) -> Path | None:
    return None if not out else Path(out).with_suffix(suffix)


def _write_json(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path is None:
        sys.stderr.write(text)
    else:
        path.write_text(text, encoding="utf-8", newline="")


# -- argument handling ------------------------------------------------------------------

def parse_sizes(text: str) -> list[int]:
    """``a,b,c`` or ``a..b`` (inclusive)."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split("..", 1))
            sizes = list(range(lo, hi + 1))
        else:
            sizes = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be a non-empty list of positive integers")
    return sizes


def parse_bufs(text: str) -> tuple[int, int, int]:
    try:
        vals = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad buffer sizes {text!r}") from None
    if len(vals) != 3 or min(vals) < 1:
        raise argparse.ArgumentTypeError("--bufs takes IN,OUT,WT positive byte counts")
    return vals


def config_from_args(args) -> AcceleratorConfig:
    cfg = AcceleratorConfig()
    over = {}
    for flag, name in (("pox", "pox"), ("poy", "poy"), ("pof", "pof"), ("freq", "freq_mhz"),
                       ("bw", "dram_bytes_per_cycle"), ("dram_latency", "dram_fixed_latency_cycles")):
        v = getattr(args, flag, None)
        if v is not None:
            over[name] = v
    if getattr(args, "bufs", None):
        over.update(zip(("input_buf_bytes", "output_buf_bytes", "weight_buf_bytes"), args.bufs))
    return replace(cfg, **over)


def network_from_args(args) -> NetworkSpec:
    if bool(args.network) == bool(args.builtin):
        raise SchemaError("give exactly one of --network PATH or --builtin NAME")
    return load_network(args.network) if args.network else load_builtin(args.builtin)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lkaccel", description="Large-kernel CNN accelerator model")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, network=True):
        if network:
            src = sp.add_argument_group("network source")
            src.add_argument("--network", metavar="PATH")
            src.add_argument("--builtin", metavar="NAME", help=f"one of {', '.join(builtin_names())}")
        sp.add_argument("--out", metavar="PATH", help="CSV output path (default stdout)")
        sp.add_argument("--pox", type=int)
        sp.add_argument("--poy", type=int)
        sp.add_argument("--pof", type=int)
        sp.add_argument("--freq", type=float, metavar="MHZ")
        sp.add_argument("--bw", type=float, metavar="BYTES_PER_CYCLE")
        sp.add_argument("--dram-latency", type=int, metavar="CYCLES")
        sp.add_argument("--bufs", type=parse_bufs, metavar="IN,OUT,WT")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)

    sp = sub.add_parser("simulate", help="per-item cycles, throughput and traffic")
    common(sp)
    sp.add_argument("--strategy", choices=["baseline", "fused"],
                    help="only one policy (default both)")
    sp.add_argument("--dump-trace", action="store_true", help="write the phase list (JSON) and register-level Z-flow records (CSV)")

    sp = sub.add_parser("sweep-kernel", help="Z-flow vs split-kernel baseline over kernel sizes")
    common(sp, network=False)
    sp.add_argument("--sizes", type=parse_sizes, default=parse_sizes("3..31"))

    sp = sub.add_parser("compare-fusion", help="baseline vs fused cost of each block")
    common(sp)

    sp = sub.add_parser("verify", help="seeded oracle, Kseg and schedule self-checks")
    common(sp, network=False)
    sp.add_argument("--cases", type=int, default=500)
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


# -- commands --------------------------------------------------------------------------

def cmd_simulate(args, cfg: AcceleratorConfig) -> int:
    net = network_from_args(args)
    policies = {"baseline": [Policy.ALL_BASELINE], "fused": [Policy.FUSE_WHERE_POSSIBLE],
                None: [Policy.ALL_BASELINE, Policy.FUSE_WHERE_POSSIBLE]}[args.strategy]
    rows, summary, traces = [], {"network": net.name, "policies": {}}, {}
    for pol in policies:
        sched, report = schedule_network(net, cfg, pol)
        for it in report.items:
            rows.append({"policy": pol.value, "item": it.label, "strategy": it.strategy,
                         "cycles": it.cycles, "wall_time_us": it.wall_time_us, "gops": it.gops,
                         "utilization": it.utilization, "dram_bytes_in": it.dram_bytes_in,
                         "dram_bytes_wt": it.dram_bytes_wt, "dram_bytes_out": it.dram_bytes_out})
        summary["policies"][pol.value] = dict(report.to_dict(), notes=sched.notes)
        traces[pol.value] = sched.to_json()
    write_csv(rows, SIM_COLUMNS, args.out)
    _write_json(summary, _sidecar(args.out, ".summary.json"))
    if args.dump_trace:
        _write_json(traces, _sidecar(args.out, ".trace.json"))
        _write_zflow_dump(net, cfg, _sidecar(args.out, ".zflow.csv"))
    return EXIT_OK


def _write_zflow_dump(net: NetworkSpec, cfg: AcceleratorConfig, path: Path | None) -> None:
    """Register-level trace of the first tile, first channel, first segment of every layer."""
    lines = ["layer,cycle,kx,ky,direction,array_index,source_tag,coord"]
    for i, item in enumerate(net.items):
        layers = item.layers if isinstance(item, BlockSpec) else (item,)
        for j, layer in enumerate(layers):
            label = f"{i}.{j}" if isinstance(item, BlockSpec) else str(i)
            seg = segment_kernel(layer.nkx, cfg.pox, layer.stride, layer.nky).sub_kernels[0]
            lines += [f"{label},{rec}" for rec in plan_zflow(layer, cfg, (0, 0), seg).dump_lines()]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stderr.write(text)
    else:
        path.write_text(text, encoding="utf-8", newline="")


def sweep_rows(sizes, cfg: AcceleratorConfig) -> list[dict]:
    rows = []
    for k in sorted(set(sizes)):
        layer = LayerSpec(LayerKind.CONV, nkx=k, nky=k, pad=k // 2, **SWEEP_GEOMETRY)
        macs = macs_of(layer)
        base = baseline_split_model(layer, cfg)
        rows.append({
            "k": k,
            "zflow_gops_model": gops(macs, compute_cycles(layer, cfg), cfg.freq_mhz),
            "baseline_gops_model": gops(base.useful_macs, base.cycles, cfg.freq_mhz),
            "zflow_arrangement_bits": zflow_arrangement_bits(cfg),
            # every input channel of the layer needs its own line buffer
            "baseline_line_buffer_bits": base.line_buffer_bits * layer.nif,
            "padded_fraction": base.padded_mac_fraction,
        })
    return rows


def cmd_sweep_kernel(args, cfg: AcceleratorConfig) -> int:
    write_csv(sweep_rows(args.sizes, cfg), SWEEP_COLUMNS, args.out)
    return EXIT_OK


def _pct(before: float, after: float) -> float:
    return 100.0 * (before - after) / before if before else 0.0


def fusion_rows(items, cfg: AcceleratorConfig) -> list[dict]:
    rows = []
    for i, item in enumerate(items):
        if not isinstance(item, BlockSpec):
            continue
        try:
            base = schedule_block(item, cfg, fused=False)
        except SimError as exc:
            raise type(exc)(f"item {i}: {exc}") from exc
        note = ""
        try:
            fused = schedule_block(item, cfg, fused=True)
        except (CapacityError, SimError) as exc:
            fused, note = base, f"fusion not applied: {exc}"
        if fused.notes and not note:
            note = "; ".join(n.split(": ", 1)[-1] for n in fused.notes)
        bb, fb = sum(base.dram_bytes().values()), sum(fused.dram_bytes().values())
        rows.append({
            "item": i, "block_kind": item.kind.value, "fused_strategy": fused.strategy,
            "baseline_cycles": base.total_cycles, "fused_cycles": fused.total_cycles,
            "baseline_transfer_cycles": base.transfer_cycles,
            "fused_transfer_cycles": fused.transfer_cycles,
            "baseline_dram_bytes": bb, "fused_dram_bytes": fb,
            "overall_savings_pct": _pct(base.total_cycles, fused.total_cycles),
            "transmission_savings_pct": _pct(base.transfer_cycles, fused.transfer_cycles),
            "transmission_bytes_savings_pct": _pct(bb, fb),
            "note": note,
        })
    return rows


def cmd_compare_fusion(args, cfg: AcceleratorConfig) -> int:
    write_csv(fusion_rows(network_from_args(args).items, cfg), FUSION_COLUMNS, args.out)
    return EXIT_OK


def cmd_verify(args, cfg: AcceleratorConfig) -> int:
    report = run_verify(seed=args.seed, n_cases=args.cases, cfg=cfg, inject_fault=args.inject_fault)
    text = "\n".join(report.lines()) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    sys.stdout.write(text)
    return EXIT_OK if report.ok else EXIT_VERIFY


COMMANDS = {"simulate": cmd_simulate, "sweep-kernel": cmd_sweep_kernel,
            "compare-fusion": cmd_compare_fusion, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](args, cfg)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (SimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
