"""Dispatch-count latency model.

Each recorded event is priced as

    cost = launch_seconds + max(flops / flops_throughput,
                                bytes_touched / bytes_bandwidth)

i.e. a fixed launch charge plus whichever of compute or traffic dominates.
At desk scale the matrices are tiny, so the launch charge dominates and
estimated latency is effectively proportional to the dispatch count; that
is the regime the engine's strategy comparisons are about. Only orderings
and ratios between strategies are meaningful -- absolute milliseconds from
the defaults are not calibrated to any real device.

The default constants (10 us launch, 10 TFLOP/s, effectively unlimited
bandwidth) keep per-event compute far under the launch charge for every
desk-scale shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError
from .linalg import EVENT_KINDS, DispatchEvent

COMPONENT_LABELS = ("adapter", "backbone", "other", "router", "switch")

DEFAULT_LAUNCH_SECONDS = 1e-5
DEFAULT_FLOPS_THROUGHPUT = 1e13
DEFAULT_BYTES_BANDWIDTH = 1e30  # effectively unlimited


@dataclass(frozen=True, slots=True)
class CostModel:
    launch_seconds: float = DEFAULT_LAUNCH_SECONDS
    flops_throughput: float = DEFAULT_FLOPS_THROUGHPUT
    bytes_bandwidth: float = DEFAULT_BYTES_BANDWIDTH

    def __post_init__(self):
        for name in ("launch_seconds", "flops_throughput", "bytes_bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_COST_MODEL = CostModel()


@dataclass(frozen=True, slots=True)
class DispatchTrace:
    """An ordered tuple of events whose labels name engine components."""

    events: tuple

    def __post_init__(self):
        for ev in self.events:
            if ev.label not in COMPONENT_LABELS:
                raise ValueError(f"unknown component label {ev.label!r}")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def total_flops(self) -> int:
        return sum(ev.flops for ev in self.events)


@dataclass(frozen=True, slots=True)
class LatencyEstimate:
    total_ms_per_token: float
    per_component_ms: dict  # label -> ms/token, all labels present
    dispatch_counts: dict  # kind -> count over the whole trace


def event_cost(ev: DispatchEvent, cm: CostModel) -> float:
    """Seconds for one launch under the given cost model."""
    compute = max(ev.flops / cm.flops_throughput, ev.bytes_touched / cm.bytes_bandwidth)
    return cm.launch_seconds + compute


def estimate(trace, cm: CostModel, n_tokens: int) -> LatencyEstimate:
    """Price a trace and report ms/token, split by component label.

    The total is computed as the sum of the per-component figures, so the
    split always reconciles exactly.
    """
    if n_tokens < 1:
        raise ValueError(f"n_tokens must be >= 1, got {n_tokens}")
    per_component = {label: 0.0 for label in COMPONENT_LABELS}
    counts = {kind: 0 for kind in EVENT_KINDS}
    for ev in trace:
        per_component[ev.label] += event_cost(ev, cm)
        counts[ev.kind] += 1
    per_component_ms = {k: v * 1e3 / n_tokens for k, v in per_component.items()}
    return LatencyEstimate(
        total_ms_per_token=sum(per_component_ms.values()),
        per_component_ms=per_component_ms,
        dispatch_counts=counts,
    )


def max_compute_fraction(trace, cm: CostModel) -> float:
    """Largest per-event share of cost that is compute rather than launch.

    Small values mean the trace is launch-dominated and latency tracks the
    dispatch count.
    """
    worst = 0.0
    for ev in trace:
        cost = event_cost(ev, cm)
        worst = max(worst, (cost - cm.launch_seconds) / cost)
    return worst


# ---------------------------------------------------------------------------
# Breakdown
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BreakdownRow:
    label: str
    kind: str
    count: int
    flops: int


def breakdown(trace) -> list:
    """Aggregate a trace into (label, kind, count, flops) rows.

    Rows are sorted by label then kind so output is deterministic.
    """
    cells: dict = {}
    for ev in trace:
        key = (ev.label, ev.kind)
        count, flops = cells.get(key, (0, 0))
        cells[key] = (count + 1, flops + ev.flops)
    return [
        BreakdownRow(label, kind, count, flops)
        for (label, kind), (count, flops) in sorted(cells.items())
    ]


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CalibrationResult:
    cost_model: CostModel
    residuals: np.ndarray  # measured minus fitted, one per sample


def calibrate(samples) -> CalibrationResult:
    """Fit launch_seconds and flops_throughput from (trace, seconds) pairs.

    Least squares on measured ~= launch_seconds * n_events + flops / throughput.
    Bandwidth is not fitted; the returned model keeps the huge default.
    Raises CalibrationError when the design cannot identify a parameter.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise CalibrationError(
            "need at least 2 samples to fit launch_seconds and flops_throughput"
        )
    n_events = []
    flops = []
    measured = []
    for i, (trace, seconds) in enumerate(samples):
        events = list(trace)
        if not events:
            raise CalibrationError(f"sample {i} has an empty trace")
        n_events.append(len(events))
        flops.append(sum(ev.flops for ev in events))
        measured.append(float(seconds))
    design = np.column_stack([np.asarray(n_events, float), np.asarray(flops, float)])
    y = np.asarray(measured)
    if not np.any(design[:, 1]):
        raise CalibrationError(
            "flops_throughput is unidentifiable: every sample records zero flops"
        )
    if np.linalg.matrix_rank(design) < 2:
        raise CalibrationError(
            "flops_throughput is unidentifiable: all samples share one "
            "events-to-flops mix, so launch cost and compute cannot be separated"
        )
    theta, *_ = np.linalg.lstsq(design, y, rcond=None)
    launch, inv_throughput = float(theta[0]), float(theta[1])
    if launch <= 0 or inv_throughput <= 0:
        raise CalibrationError(
            f"fit produced non-positive parameters (launch_seconds={launch:.3e}, "
            f"1/flops_throughput={inv_throughput:.3e}); samples contradict the cost model"
        )
    fitted = CostModel(launch_seconds=launch, flops_throughput=1.0 / inv_throughput)
    return CalibrationResult(cost_model=fitted, residuals=y - design @ theta)
