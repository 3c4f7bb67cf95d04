"""Throughput and arrangement storage vs kernel size: Z-flow against split kernels.

    python3 scripts/fig3_kernel_sweep.py --out results/kernel_sweep.csv
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from lkaccel.cli import SWEEP_COLUMNS, sweep_rows, write_csv
from lkaccel.netmodel import AcceleratorConfig


@dataclass
class SweepConfig:
    k_min: int = 3
    k_max: int = 31
    odd_only: bool = False
    out: str | None = None


def run(sc: SweepConfig, cfg: AcceleratorConfig = AcceleratorConfig()) -> list[dict]:
    sizes = [k for k in range(sc.k_min, sc.k_max + 1) if k % 2 or not sc.odd_only]
    rows = sweep_rows(sizes, cfg)
    write_csv(rows, SWEEP_COLUMNS, sc.out)
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-min", type=int, default=3)
    ap.add_argument("--k-max", type=int, default=31)
    ap.add_argument("--odd-only", action="store_true")
    ap.add_argument("--out")
    a = ap.parse_args()
    run(SweepConfig(a.k_min, a.k_max, a.odd_only, a.out))
