"""Layer-by-layer vs fused execution of typical blocks (MBconv, RepLK, PyConv).

    python3 scripts/fig4_fusion.py --out results/fusion.csv
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field

from lkaccel.cli import FUSION_COLUMNS, fusion_rows, write_csv
from lkaccel.netmodel import (AcceleratorConfig, build_mbconv, build_pyconv_block,
                              build_replk_block)


@dataclass
class FusionConfig:
    mbconv: list[tuple] = field(default_factory=lambda: [(24, 6, 3, 1, 24, 28, 28),
                                                         (40, 6, 5, 1, 40, 14, 14),
                                                         (16, 6, 3, 1, 16, 56, 56)])
    replk: list[tuple] = field(default_factory=lambda: [(64, 13, 28, 28), (64, 31, 28, 28),
                                                        (32, 31, 56, 56)])
    pyconv: list[tuple] = field(default_factory=lambda: [
        (64, 56, 56, [9, 7, 5, 3], [4, 4, 4, 4], [4, 8, 16, 32]),
        (128, 28, 28, [7, 5, 3], [8, 8, 8], [32, 32, 64])])
    out: str | None = None


def blocks(fc: FusionConfig) -> list:
    return ([build_mbconv(*p) for p in fc.mbconv] + [build_replk_block(*p) for p in fc.replk]
            + [build_pyconv_block(*p) for p in fc.pyconv])


def run(fc: FusionConfig, cfg: AcceleratorConfig = AcceleratorConfig()) -> list[dict]:
    rows = fusion_rows(blocks(fc), cfg)
    write_csv(rows, FUSION_COLUMNS, fc.out)
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out")
    run(FusionConfig(out=ap.parse_args().out))
