"""Kernel segmentation for kernels wider than twice the output-column unroll.

Wide kernels are cut along x into sub-kernels of width ``pox`` (the last one
takes the remainder), so every piece fits the Z-flow register arrays. Partial
outputs of the pieces are summed in the int32 accumulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class KsegPlan:
    sub_kernels: tuple[tuple[int, int], ...]   # (x_offset, width)
    nky: int = 1

    @property
    def nkx(self) -> int:
        return sum(w for _, w in self.sub_kernels)

    def __len__(self) -> int:
        return len(self.sub_kernels)

    def __iter__(self):
        return iter(self.sub_kernels)


def segment_kernel(nkx: int, pox: int, stride: int = 1, nky: int = 1) -> KsegPlan:
    if nkx < 1 or pox < 1:
        raise ValueError("nkx and pox must be positive")
    if stride not in (1, 2):
        raise ValueError(f"stride must be 1 or 2, got {stride}")
    if nkx <= 2 * pox:
        return KsegPlan(((0, nkx),), nky)
    widths = [pox] * (nkx // pox)
    if nkx % pox:
        widths.append(nkx % pox)
    offsets = np.concatenate(([0], np.cumsum(widths)[:-1]))
    return KsegPlan(tuple((int(o), w) for o, w in zip(offsets, widths)), nky)


def sub_input_offset(entry: tuple[int, int], stride: int = 1) -> int:
    """Input-column base of a sub-kernel relative to ``ox * stride``.

    Output column ``ox`` of sub-kernel ``(off, w)`` reads input columns
    ``ox * stride + off + kx`` for ``kx in range(w)``. Because every non-final
    width is ``pox``, each sub-kernel base is a multiple of ``pox`` and lands on
    the same bank of the ``pox`` parallel input buffers.
    """
    off, width = entry
    if off < 0 or width < 1 or stride < 1:
        raise ValueError(f"invalid plan entry {entry} / stride {stride}")
    return off


def first_read_column(entry: tuple[int, int], stride: int, ox: int) -> int:
    return ox * stride + sub_input_offset(entry, stride)


def split_weights(weights: np.ndarray, plan: KsegPlan) -> list[np.ndarray]:
    """Slice an (..., nky, nkx) weight array into per-segment pieces."""
    return [weights[..., off:off + w] for off, w in plan]


def compose_partials(partials: list[np.ndarray]) -> np.ndarray:
    """Elementwise integer sum of sub-kernel partial outputs."""
    if not partials:
        raise ShapeError("no partials to compose")
    shape = partials[0].shape
    total = np.zeros(shape, dtype=np.int64)
    for p in partials:
        if p.shape != shape:
            raise ShapeError(f"partial shape {p.shape} != {shape}")
        if not np.issubdtype(np.asarray(p).dtype, np.integer):
            raise TypeError("partials must be integer planes")
        total += p
    return total
