"""Instrumented dense linear algebra with dispatch accounting.

Problem: the engine's whole latency story is told in *dispatches*, not FLOPs.
Every public operation here models exactly one device launch and appends one
event to a recorder, so traces can later be priced by a launch-cost model.
The segmented kernel is the point of the module: it applies one low-rank
update per segment to many distinct targets inside a single recorded
dispatch, which is what lets a decode step swap every layer's adapter delta
in one launch instead of one (or more) per layer.

Components:
  * Matrix           -- dense row-major 2-D array with a precision tag.
  * TileConfig       -- m x n x k tile extents for the segmented kernel.
  * DispatchRecorder -- append-only log of DispatchEvents.
  * gemm / gemm_accumulate_inplace -- single-launch matrix products.
  * sgmm             -- segmented batched multiply-accumulate, one launch
                        for a whole SegmentTable.
  * sgmm_sequential  -- the same arithmetic as one launch per segment,
                        kept as the reference slow path.

Determinism contract: within every segment the rank dimension is reduced in
ascending rank-index order, one rank-1 update at a time, into an accumulator
that persists across k-tile boundaries. Tile extents therefore change only
the iteration blocking, never the order in which floating-point additions
reach a given output element, so results are bit-identical across any valid
TileConfig at fixed precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingError, DimensionError, PrecisionError

# ---------------------------------------------------------------------------
# Matrix
# ---------------------------------------------------------------------------

PRECISION_DTYPES = {"single": np.float32, "double": np.float64}
_DTYPE_PRECISIONS = {np.dtype(np.float32): "single", np.dtype(np.float64): "double"}


class Matrix:
    """Dense 2-D array, row-major, tagged "single" (f32) or "double" (f64).

    The flat row-major layout required by the kernel contracts is realized
    as a C-contiguous ndarray; ``data`` is always 2-D and contiguous.
    """

    __slots__ = ("data", "precision")

    def __init__(self, data, precision: str | None = None):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise DimensionError(f"Matrix requires a 2-D array, got ndim={arr.ndim}")
        if precision is None:
            precision = _DTYPE_PRECISIONS.get(arr.dtype, "double")
        if precision not in PRECISION_DTYPES:
            raise PrecisionError(f"unknown precision tag {precision!r}")
        self.data = np.ascontiguousarray(arr, dtype=PRECISION_DTYPES[precision])
        self.precision = precision

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def itemsize(self) -> int:
        return self.data.itemsize

    @classmethod
    def zeros(cls, rows: int, cols: int, precision: str = "double") -> "Matrix":
        if rows < 0 or cols < 0:
            raise DimensionError("matrix dimensions must be non-negative")
        if precision not in PRECISION_DTYPES:
            raise PrecisionError(f"unknown precision tag {precision!r}")
        return cls(np.zeros((rows, cols), dtype=PRECISION_DTYPES[precision]), precision)

    @classmethod
    def identity(cls, n: int, precision: str = "double") -> "Matrix":
        return cls(np.eye(n, dtype=PRECISION_DTYPES[precision]), precision)

    def copy(self) -> "Matrix":
        return Matrix(self.data.copy(), self.precision)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"Matrix({self.rows}x{self.cols}, {self.precision})"


# ---------------------------------------------------------------------------
# Dispatch recording
# ---------------------------------------------------------------------------

EVENT_KINDS = ("gemm", "sgmm", "elementwise", "reduce")


@dataclass(frozen=True, slots=True)
class DispatchEvent:
    """One modeled device launch."""

    kind: str
    flops: int
    bytes_touched: int
    label: str = "other"


@dataclass(frozen=True, slots=True)
class DispatchSummary:
    """Counts per event kind plus total work since the last reset."""

    counts: dict
    total_flops: int
    total_bytes: int


class DispatchRecorder:
    """Append-only event log. One recorder per engine; never shared."""

    def __init__(self):
        self.events: list[DispatchEvent] = []

    def record(self, kind: str, flops: int, bytes_touched: int, label: str = "other") -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if flops < 0 or bytes_touched < 0:
            raise ValueError("flops and bytes_touched must be non-negative")
        self.events.append(DispatchEvent(kind, int(flops), int(bytes_touched), label))

    def mark(self) -> int:
        """Position marker; use with events_since to slice out one step."""
        return len(self.events)

    def events_since(self, mark: int) -> list[DispatchEvent]:
        return self.events[mark:]

    def counts(self) -> dict:
        out = {k: 0 for k in EVENT_KINDS}
        for ev in self.events:
            out[ev.kind] += 1
        return out

    def reset_and_report(self) -> DispatchSummary:
        """Return per-kind counts and total flops/bytes, then clear the log."""
        summary = DispatchSummary(
            counts=self.counts(),
            total_flops=sum(ev.flops for ev in self.events),
            total_bytes=sum(ev.bytes_touched for ev in self.events),
        )
        self.events.clear()
        return summary


# ---------------------------------------------------------------------------
# Segments and tiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TileConfig:
    """Tile extents for the segmented kernel. Defaults are the shipped ones."""

    m: int = 32
    n: int = 32
    k: int = 8

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.k < 1:
            raise ValueError(f"tile extents must be positive, got {self}")


DEFAULT_TILE = TileConfig()


@dataclass(slots=True)
class Segment:
    """One low-rank update: target += sign * up @ down.

    ``down`` is (s x d_in), ``up`` is (d_out x s), ``target`` is (d_out x d_in).
    s == 0 is legal and degenerates to a no-op update.
    """

    down: Matrix
    up: Matrix
    target: Matrix

    @property
    def rank_total(self) -> int:
        return self.down.rows

    def validate(self) -> None:
        if self.up.cols != self.down.rows:
            raise DimensionError(
                f"segment rank mismatch: up has {self.up.cols} columns, down has {self.down.rows} rows"
            )
        if self.up.rows != self.target.rows or self.down.cols != self.target.cols:
            raise DimensionError(
                f"segment target is {self.target.rows}x{self.target.cols}, "
                f"update is {self.up.rows}x{self.down.cols}"
            )
        if not (self.up.precision == self.down.precision == self.target.precision):
            raise PrecisionError("segment operands carry mixed precision tags")


@dataclass(slots=True)
class SegmentTable:
    """Non-empty list of segments with pairwise-distinct targets."""

    segments: list = field(default_factory=list)

    def validate(self) -> None:
        if not self.segments:
            raise DimensionError("segment table is empty")
        seen = set()
        for seg in self.segments:
            seg.validate()
            key = id(seg.target.data)
            if key in seen:
                raise AliasingError("two segments share one target matrix")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.segments)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def _check_pair(a: Matrix, b: Matrix) -> None:
    if a.precision != b.precision:
        raise PrecisionError(f"precision mismatch: {a.precision} vs {b.precision}")
    if a.cols != b.rows:
        raise DimensionError(f"inner dimensions differ: {a.rows}x{a.cols} @ {b.rows}x{b.cols}")


def gemm(a: Matrix, b: Matrix, recorder: DispatchRecorder, label: str = "other") -> Matrix:
    """C = A @ B as one launch: records exactly one gemm event.

    flops = 2 * m * k * n; bytes = all three operand footprints.
    """
    _check_pair(a, b)
    out = Matrix(a.data @ b.data, a.precision)
    recorder.record(
        "gemm",
        flops=2 * a.rows * a.cols * b.cols,
        bytes_touched=(a.rows * a.cols + b.rows * b.cols + a.rows * b.cols) * a.itemsize,
        label=label,
    )
    return out


def gemm_accumulate_inplace(
    c: Matrix,
    a: Matrix,
    b: Matrix,
    sign: int,
    recorder: DispatchRecorder,
    label: str = "other",
) -> None:
    """C += sign * A @ B, fused product-and-add in one recorded gemm event."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    _check_pair(a, b)
    if c.rows != a.rows or c.cols != b.cols:
        raise DimensionError(
            f"accumulate target is {c.rows}x{c.cols}, product is {a.rows}x{b.cols}"
        )
    if c.precision != a.precision:
        raise PrecisionError(f"precision mismatch: {c.precision} vs {a.precision}")
    prod = a.data @ b.data
    if sign > 0:
        np.add(c.data, prod, out=c.data)
    else:
        np.subtract(c.data, prod, out=c.data)
    recorder.record(
        "gemm",
        flops=2 * a.rows * a.cols * b.cols,
        bytes_touched=(a.rows * a.cols + b.rows * b.cols + 2 * c.rows * c.cols) * a.itemsize,
        label=label,
    )


def _table_flops(table: SegmentTable) -> int:
    return sum(2 * s.up.rows * s.rank_total * s.down.cols for s in table.segments)


def _table_bytes(table: SegmentTable) -> int:
    total = 0
    for s in table.segments:
        total += (
            s.up.rows * s.up.cols + s.down.rows * s.down.cols + 2 * s.target.rows * s.target.cols
        ) * s.target.itemsize
    return total


def sgmm(
    table: SegmentTable,
    sign: int,
    recorder: DispatchRecorder,
    tile: TileConfig = DEFAULT_TILE,
    label: str = "other",
) -> None:
    """Apply every segment's update in one recorded sgmm event.

    For each segment: target += sign * up @ down, walked as m x n output
    tiles with the rank dimension chunked by tile.k. The accumulation for
    each output element is a strict ascending-rank sequence of rank-1
    updates into the target itself, so the k-chunk boundaries (and the m/n
    blocking) never reorder additions: any TileConfig yields bit-identical
    targets. Exactly one event is recorded no matter how many segments or
    tiles were walked.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    table.validate()
    for seg in table.segments:
        up = seg.up.data
        down = seg.down.data
        tgt = seg.target.data
        rows, cols = tgt.shape
        s_total = seg.rank_total
        for m0 in range(0, rows, tile.m):
            m1 = min(m0 + tile.m, rows)
            for n0 in range(0, cols, tile.n):
                n1 = min(n0 + tile.n, cols)
                block = tgt[m0:m1, n0:n1]
                for k0 in range(0, s_total, tile.k):
                    for s in range(k0, min(k0 + tile.k, s_total)):
                        outer = up[m0:m1, s : s + 1] * down[s : s + 1, n0:n1]
                        if sign > 0:
                            block += outer
                        else:
                            block -= outer
    recorder.record(
        "sgmm", flops=_table_flops(table), bytes_touched=_table_bytes(table), label=label
    )


def sgmm_sequential(
    table: SegmentTable,
    sign: int,
    recorder: DispatchRecorder,
    label: str = "other",
) -> None:
    """Reference slow path: same updates as sgmm, one gemm event per segment."""
    table.validate()
    for seg in table.segments:
        gemm_accumulate_inplace(seg.target, seg.up, seg.down, sign, recorder, label=label)
