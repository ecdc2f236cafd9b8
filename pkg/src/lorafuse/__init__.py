"""Desk-scale decoder engine for token-wise pre-gated LoRA mixtures.

One routing decision per token, reused across every layer; adapter deltas
swapped between consecutive tokens by a single segmented dispatch; latency
modeled by counting launches rather than flops.
"""

from .adapters import (
    ConcatAdapter,
    ExpertBank,
    LoraExpert,
    build_switch,
    concat_gated,
    expert_apply,
    load_bank,
    merge_all,
    save_bank,
)
from .errors import (
    AliasingError,
    CalibrationError,
    ConfigError,
    DimensionError,
    InputError,
    PrecisionError,
    StateError,
)
from .linalg import (
    DEFAULT_TILE,
    DispatchEvent,
    DispatchRecorder,
    DispatchSummary,
    Matrix,
    Segment,
    SegmentTable,
    TileConfig,
    gemm,
    gemm_accumulate_inplace,
    sgmm,
    sgmm_sequential,
)
from .model import (
    DecodeState,
    DecoderModel,
    ModelConfig,
    Strategy,
    build_model,
    decode_step,
    finalize_generation,
    forward_layer,
    generate,
    load_checkpoint,
    max_backbone_deviation,
    prefill,
    save_checkpoint,
    weights_digest,
)
from .perf import (
    DEFAULT_COST_MODEL,
    BreakdownRow,
    CalibrationResult,
    CostModel,
    DispatchTrace,
    LatencyEstimate,
    breakdown,
    calibrate,
    estimate,
    event_cost,
    max_compute_fraction,
)
from .routing import GateDecision, RouterParams, pre_gate, route

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "BreakdownRow",
    "CalibrationError",
    "CalibrationResult",
    "ConcatAdapter",
    "ConfigError",
    "CostModel",
    "DEFAULT_COST_MODEL",
    "DEFAULT_TILE",
    "DecodeState",
    "DecoderModel",
    "DimensionError",
    "DispatchEvent",
    "DispatchRecorder",
    "DispatchSummary",
    "DispatchTrace",
    "ExpertBank",
    "GateDecision",
    "InputError",
    "LatencyEstimate",
    "LoraExpert",
    "Matrix",
    "ModelConfig",
    "PrecisionError",
    "RouterParams",
    "Segment",
    "SegmentTable",
    "StateError",
    "Strategy",
    "TileConfig",
    "breakdown",
    "build_model",
    "build_switch",
    "calibrate",
    "concat_gated",
    "decode_step",
    "estimate",
    "event_cost",
    "expert_apply",
    "finalize_generation",
    "forward_layer",
    "gemm",
    "gemm_accumulate_inplace",
    "generate",
    "load_bank",
    "load_checkpoint",
    "max_backbone_deviation",
    "max_compute_fraction",
    "merge_all",
    "pre_gate",
    "prefill",
    "route",
    "save_bank",
    "save_checkpoint",
    "sgmm",
    "sgmm_sequential",
    "weights_digest",
]
