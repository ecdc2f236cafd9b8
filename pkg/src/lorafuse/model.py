"""Desk-scale decoder engine with five adapter-handling strategies.

The model is deliberately small: embed -> L square backbone matrices with a
smooth (erf-based, tanh-free) GELU and a residual add per layer -> unembed
-> greedy argmax. No attention, no KV state: each token's forward pass is
independent, which isolates the adapter-dispatch story the engine exists to
measure.

Strategies over identical weights:
  * BASE                   -- backbone only; adapters ignored.
  * LAYER_WISE_ROUTED      -- route at every layer, apply k experts unmerged.
  * PRE_GATED_NAIVE        -- route once per token, apply experts unmerged
                              at every layer.
  * PRE_GATED_SIMPLE_MERGE -- route once; per layer unmerge the previous
                              token's concat and merge the current one as
                              separate in-place products.
  * PRE_GATED_FUSED        -- route once; swap every layer's delta with one
                              segmented dispatch, then run the plain stack.

The last three are mathematically equivalent (same gate, same delta, merged
or not), so their hidden states and token choices agree to round-off.

Dispatch accounting per decode step (GEMM-class = gemm + sgmm events, k=2,
steady state): every strategy embeds (elementwise), evaluates the shared
first-layer router once (1 gemm; layer-wise consumes it as its first
layer's decision, BASE ignores it), unembeds (1 gemm), and argmaxes
(reduce). That puts BASE at L+2, LAYER_WISE_ROUTED at L*(2+2k)+1 (its
remaining L-1 routers are in-layer), PRE_GATED_NAIVE at L*(1+2k)+2,
PRE_GATED_SIMPLE_MERGE at 3L+2, and PRE_GATED_FUSED at L+3.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

from .adapters import (
    ConcatAdapter,
    ExpertBank,
    LoraExpert,
    build_switch,
    concat_gated,
    expert_apply,
    merge_all,
)
from .errors import DimensionError, InputError, StateError
from .linalg import (
    PRECISION_DTYPES,
    DispatchRecorder,
    Matrix,
    gemm,
    gemm_accumulate_inplace,
)
from .perf import DispatchTrace
from .routing import GateDecision, RouterParams, route

_SQRT2 = math.sqrt(2.0)


class Strategy(Enum):
    BASE = "base"
    LAYER_WISE_ROUTED = "layer_wise_routed"
    PRE_GATED_NAIVE = "pre_gated_naive"
    PRE_GATED_SIMPLE_MERGE = "pre_gated_simple_merge"
    PRE_GATED_FUSED = "pre_gated_fused"

    @property
    def pre_gated(self) -> bool:
        return self in (
            Strategy.PRE_GATED_NAIVE,
            Strategy.PRE_GATED_SIMPLE_MERGE,
            Strategy.PRE_GATED_FUSED,
        )

    @property
    def merges_backbone(self) -> bool:
        return self in (Strategy.PRE_GATED_SIMPLE_MERGE, Strategy.PRE_GATED_FUSED)


@dataclass(frozen=True, slots=True)
class ModelConfig:
    """Shape and run parameters. Defaults are the desk-scale reference size."""

    layers: int = 8
    hidden: int = 64
    vocab: int = 256
    experts: int = 8
    rank: int = 4
    top_k: int = 2
    precision: str = "double"
    seed: int = 0
    strategy: Strategy = Strategy.PRE_GATED_FUSED
    refresh_every: int = 0  # 0 = never re-fuse from pristine mid-generation

    def validate(self) -> None:
        for name in ("layers", "hidden", "vocab", "experts", "rank", "top_k"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.vocab < 2:
            raise ValueError("vocab must be >= 2")
        if self.top_k > self.experts:
            raise ValueError(f"top_k={self.top_k} exceeds experts={self.experts}")
        if self.rank > self.hidden:
            raise ValueError(f"rank={self.rank} exceeds hidden={self.hidden}")
        if self.precision not in PRECISION_DTYPES:
            raise ValueError(f"unknown precision {self.precision!r}")
        if not isinstance(self.strategy, Strategy):
            raise ValueError(f"strategy must be a Strategy, got {self.strategy!r}")
        if not isinstance(self.refresh_every, int) or self.refresh_every < 0:
            raise ValueError("refresh_every must be a non-negative integer")
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "hidden": self.hidden,
            "vocab": self.vocab,
            "experts": self.experts,
            "rank": self.rank,
            "top_k": self.top_k,
            "precision": self.precision,
            "seed": self.seed,
            "strategy": self.strategy.value,
            "refresh_every": self.refresh_every,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        data = dict(raw)
        if "strategy" in data and not isinstance(data["strategy"], Strategy):
            data["strategy"] = Strategy(data["strategy"])
        config = cls(**data)
        config.validate()
        return config


@dataclass(slots=True)
class DecoderModel:
    config: ModelConfig
    embed: Matrix  # vocab x d, one row per token
    backbone: list  # L matrices, d x d; mutated by merge strategies
    bank: ExpertBank
    router: RouterParams
    unembed: Matrix  # d x vocab
    pristine_backbone: list  # untouched copies for restore/verification


@dataclass(slots=True)
class DecodeState:
    """Per-generation state: the previous token's merged concats, if any."""

    prev_concats: list | None = None
    last_hidden: np.ndarray | None = None
    tokens_done: int = 0


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def build_model(config: ModelConfig) -> DecoderModel:
    """Deterministically initialize all weights from config.seed.

    PRNG is numpy PCG64. Every matrix is drawn uniform in
    [-1/sqrt(fan_in), +1/sqrt(fan_in)] where fan_in is the input width of
    the map it implements (embed, router, unembed and backbone use d; the
    rank-r up factors use r). Draw order is fixed: embed, router, unembed,
    then per layer the backbone matrix followed by each expert's down and
    up factors. Draws happen in double and are cast to config.precision,
    so one seed names one model at any precision.
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    d, r = config.hidden, config.rank
    bound_d = 1.0 / math.sqrt(d)
    bound_r = 1.0 / math.sqrt(r)

    def draw(rows: int, cols: int, bound: float) -> Matrix:
        block = rng.uniform(-bound, bound, size=(rows, cols))
        return Matrix(block.astype(PRECISION_DTYPES[config.precision]), config.precision)

    embed = draw(config.vocab, d, bound_d)
    router = RouterParams(weight=draw(config.experts, d, bound_d))
    unembed = draw(d, config.vocab, bound_d)
    backbone = []
    layers = []
    for _ in range(config.layers):
        backbone.append(draw(d, d, bound_d))
        experts = []
        for _ in range(config.experts):
            down = draw(r, d, bound_d)
            up = draw(d, r, bound_r)
            experts.append(LoraExpert(down=down, up=up))
        layers.append(tuple(experts))
    bank = ExpertBank(layers=tuple(layers))
    bank.validate()
    return DecoderModel(
        config=config,
        embed=embed,
        backbone=backbone,
        bank=bank,
        router=router,
        unembed=unembed,
        pristine_backbone=[m.copy() for m in backbone],
    )


def weights_digest(model: DecoderModel) -> str:
    """SHA-256 over all weights in draw order; a model identity witness."""
    h = hashlib.sha256()
    h.update(model.embed.data.tobytes())
    h.update(model.router.weight.data.tobytes())
    h.update(model.unembed.data.tobytes())
    for li in range(model.config.layers):
        h.update(model.pristine_backbone[li].data.tobytes())
        for expert in model.bank.layers[li]:
            h.update(expert.down.data.tobytes())
            h.update(expert.up.data.tobytes())
    return h.hexdigest()


def max_backbone_deviation(model: DecoderModel) -> float:
    """Largest |backbone - pristine| entry across all layers."""
    return max(
        float(np.max(np.abs(live.data - ref.data)))
        for live, ref in zip(model.backbone, model.pristine_backbone)
    )


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def _smooth_gelu(a: np.ndarray) -> np.ndarray:
    return 0.5 * a * (1.0 + erf(a / _SQRT2))


def _embed_token(model: DecoderModel, token: int, recorder: DispatchRecorder) -> Matrix:
    if not isinstance(token, (int, np.integer)) or not 0 <= token < model.config.vocab:
        raise InputError(f"token {token!r} outside vocab of {model.config.vocab}")
    column = model.embed.data[int(token)].reshape(-1, 1).copy()
    recorder.record(
        "elementwise",
        flops=0,
        bytes_touched=2 * model.config.hidden * model.embed.itemsize,
        label="other",
    )
    return Matrix(column, model.embed.precision)


def _unembed(model: DecoderModel, x: Matrix, recorder: DispatchRecorder) -> np.ndarray:
    logits = gemm(Matrix(x.data.T, x.precision), model.unembed, recorder, label="other")
    return logits.data[0]


def forward_layer(
    model: DecoderModel,
    layer_idx: int,
    x: Matrix,
    gate: GateDecision | None,
    recorder: DispatchRecorder,
    strategy: Strategy | None = None,
) -> Matrix:
    """One layer: residual + gelu(layer map of x) under the given strategy.

    BASE and the merge strategies run the backbone matrix alone (for merge
    strategies the adapter delta is already inside it). The unmerged
    strategies add the k gated expert outputs to the backbone product
    before the nonlinearity. LAYER_WISE_ROUTED consumes the provided gate
    at layer 0 -- identical to routing in-layer, since both read the same
    input -- and re-routes at deeper layers.
    """
    if strategy is None:
        strategy = model.config.strategy
    if not 0 <= layer_idx < model.config.layers:
        raise IndexError(f"layer {layer_idx} outside stack of {model.config.layers}")
    f = model.backbone[layer_idx]
    y = gemm(f, x, recorder, label="backbone")
    if strategy in (Strategy.LAYER_WISE_ROUTED, Strategy.PRE_GATED_NAIVE):
        if strategy is Strategy.LAYER_WISE_ROUTED and layer_idx > 0:
            gate = route(model.router, x, model.config.top_k, recorder)
        if gate is None:
            raise StateError(f"{strategy.value} needs a gate decision at layer {layer_idx}")
        bank_layer = model.bank.layers[layer_idx]
        for expert_id, weight in zip(gate.expert_ids, gate.weights):
            contribution = expert_apply(bank_layer[expert_id], x, weight, recorder)
            y.data += contribution.data  # host-side add; no event
    h = _smooth_gelu(y.data)
    recorder.record(
        "elementwise",
        flops=model.config.hidden,
        bytes_touched=2 * model.config.hidden * x.itemsize,
        label="backbone",
    )
    return Matrix(x.data + h, x.precision)  # residual add is host work


def _refresh_from_pristine(model: DecoderModel, state: DecodeState) -> None:
    # Host-side copy; models a weight re-upload, not a device launch.
    for live, ref in zip(model.backbone, model.pristine_backbone):
        np.copyto(live.data, ref.data)
    state.prev_concats = None


def _unmerged_pass(
    model: DecoderModel,
    token: int,
    recorder: DispatchRecorder,
    strategy: Strategy,
    capture: list | None = None,
) -> tuple[Matrix, np.ndarray]:
    """Embed -> shared router -> unmerged layer stack -> logits."""
    x = _embed_token(model, token, recorder)
    gate = route(model.router, x, model.config.top_k, recorder)
    for layer_idx in range(model.config.layers):
        x = forward_layer(model, layer_idx, x, gate, recorder, strategy=strategy)
        if capture is not None:
            capture.append(x.data[:, 0].copy())
    return x, _unembed(model, x, recorder)


def _merged_pass(
    model: DecoderModel,
    state: DecodeState,
    token: int,
    recorder: DispatchRecorder,
    capture: list | None = None,
) -> tuple[Matrix, np.ndarray]:
    """Embed -> shared router -> delta swap -> plain layer stack -> logits."""
    config = model.config
    strategy = config.strategy
    x = _embed_token(model, token, recorder)
    gate = route(model.router, x, config.top_k, recorder)
    if (
        config.refresh_every > 0
        and state.tokens_done > 0
        and state.tokens_done % config.refresh_every == 0
    ):
        _refresh_from_pristine(model, state)
    cur = [concat_gated(model.bank.layers[li], gate) for li in range(config.layers)]
    if strategy is Strategy.PRE_GATED_FUSED:
        d = config.hidden
        prev = state.prev_concats or [
            ConcatAdapter.empty(d, d, config.precision) for _ in range(config.layers)
        ]
        switches = [build_switch(p, c) for p, c in zip(prev, cur)]
        merge_all(model.backbone, switches, +1, recorder)
    else:  # PRE_GATED_SIMPLE_MERGE: two in-place products per layer
        for li in range(config.layers):
            f = model.backbone[li]
            if state.prev_concats is not None:
                p = state.prev_concats[li]
                gemm_accumulate_inplace(f, p.up_cat, p.down_cat, -1, recorder, label="switch")
            c = cur[li]
            gemm_accumulate_inplace(f, c.up_cat, c.down_cat, +1, recorder, label="switch")
    state.prev_concats = cur
    for layer_idx in range(config.layers):
        x = forward_layer(model, layer_idx, x, None, recorder, strategy=strategy)
        if capture is not None:
            capture.append(x.data[:, 0].copy())
    return x, _unembed(model, x, recorder)


def decode_step(
    model: DecoderModel,
    state: DecodeState,
    token: int,
    recorder: DispatchRecorder,
    capture: list | None = None,
) -> tuple[int, list]:
    """One greedy decode step: consume ``token``, emit the next token id.

    Every strategy shares the same preamble (embed as an elementwise event,
    one shared-router evaluation) and postamble (unembed gemm, argmax as a
    reduce event; ties pick the lowest token id). Merge strategies swap the
    backbone delta before the layer stack; the fused strategy does it in
    exactly one sgmm event. Returns the chosen token and the events this
    step appended.
    """
    mark = recorder.mark()
    strategy = model.config.strategy
    if strategy.merges_backbone:
        x, logits = _merged_pass(model, state, token, recorder, capture=capture)
    else:
        x, logits = _unmerged_pass(model, token, recorder, strategy, capture=capture)
    next_token = int(np.argmax(logits))
    recorder.record(
        "reduce",
        flops=model.config.vocab,
        bytes_touched=model.config.vocab * x.itemsize,
        label="other",
    )
    state.last_hidden = x.data[:, 0].copy()
    state.tokens_done += 1
    return next_token, recorder.events_since(mark)


def prefill(model: DecoderModel, tokens, recorder: DispatchRecorder) -> DecodeState:
    """Process a prompt along the unfused per-token path.

    Pre-gated strategies route each prompt token independently and apply
    experts unmerged (the fused path is a decode-phase optimization, so a
    prefill trace never contains sgmm events). Returns a fresh state with
    an empty fusion record: the first decoded token merges from pristine.
    """
    tokens = list(tokens)
    if not tokens:
        raise InputError("prompt must contain at least one token")
    strategy = model.config.strategy
    if strategy.pre_gated:
        strategy = Strategy.PRE_GATED_NAIVE
    x = None
    for token in tokens:
        x, _ = _unmerged_pass(model, token, recorder, strategy)
    return DecodeState(prev_concats=None, last_hidden=x.data[:, 0].copy(), tokens_done=0)


def generate(
    model: DecoderModel,
    prompt,
    n_new: int,
    recorder: DispatchRecorder,
    hidden_sink: list | None = None,
) -> tuple[list, DispatchTrace]:
    """Prefill, then n_new greedy decode steps, then restore the backbone.

    The step after prefill consumes the last prompt token. After the final
    step any merged delta is unmerged arithmetically (one in-place product
    per layer -- the segmented kernel stays a per-token cost, so a fused
    trace carries exactly one sgmm event per generated token). If
    hidden_sink is given, it receives one list of per-layer hidden vectors
    per decode step. Returns (generated tokens, trace of all events).
    """
    if n_new < 1:
        raise InputError(f"n_new must be >= 1, got {n_new}")
    mark = recorder.mark()
    state = prefill(model, prompt, recorder)
    token = int(list(prompt)[-1])
    generated = []
    for _ in range(n_new):
        capture = [] if hidden_sink is not None else None
        token, _ = decode_step(model, state, token, recorder, capture=capture)
        generated.append(token)
        if hidden_sink is not None:
            hidden_sink.append(capture)
    finalize_generation(model, state, recorder)
    return generated, DispatchTrace(tuple(recorder.events_since(mark)))


def finalize_generation(
    model: DecoderModel, state: DecodeState, recorder: DispatchRecorder
) -> None:
    """Unmerge the last token's delta so backbone returns to pristine.

    Arithmetic removal (one in-place product per layer), not a copy from
    the pristine snapshot: residual drift stays visible and measurable via
    max_backbone_deviation. A one-off end-of-sequence cost, so it takes the
    per-layer path rather than spending the segmented kernel on it.
    """
    if state.prev_concats is None:
        return
    for f, concat in zip(model.backbone, state.prev_concats):
        gemm_accumulate_inplace(f, concat.up_cat, concat.down_cat, -1, recorder, label="switch")
    state.prev_concats = None


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CHECKPOINT_FORMAT = "lorafuse-checkpoint-v1"


def save_checkpoint(model: DecoderModel, path) -> None:
    """Write config plus all weights as an npz container.

    The pristine backbone is what gets saved: a checkpoint captures the
    unmerged model even if a token's delta is currently fused in.
    """
    header = {"format": _CHECKPOINT_FORMAT, "config": model.config.to_dict()}
    arrays = {
        "header": np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
        "embed": model.embed.data,
        "router": model.router.weight.data,
        "unembed": model.unembed.data,
    }
    for li in range(model.config.layers):
        arrays[f"backbone{li}"] = model.pristine_backbone[li].data
        for ei, expert in enumerate(model.bank.layers[li]):
            arrays[f"layer{li}/expert{ei}/down"] = expert.down.data
            arrays[f"layer{li}/expert{ei}/up"] = expert.up.data
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> DecoderModel:
    with np.load(path) as archive:
        header = json.loads(bytes(archive["header"]).decode("utf-8"))
        if header.get("format") != _CHECKPOINT_FORMAT:
            raise ValueError(f"not a {_CHECKPOINT_FORMAT} container: {path}")
        config = ModelConfig.from_dict(header["config"])
        p = config.precision
        embed = Matrix(archive["embed"], p)
        router = RouterParams(weight=Matrix(archive["router"], p))
        unembed = Matrix(archive["unembed"], p)
        backbone = [Matrix(archive[f"backbone{li}"], p) for li in range(config.layers)]
        layers = []
        for li in range(config.layers):
            experts = []
            for ei in range(config.experts):
                experts.append(
                    LoraExpert(
                        down=Matrix(archive[f"layer{li}/expert{ei}/down"], p),
                        up=Matrix(archive[f"layer{li}/expert{ei}/up"], p),
                    )
                )
            layers.append(tuple(experts))
    bank = ExpertBank(layers=tuple(layers))
    bank.validate()
    model = DecoderModel(
        config=config,
        embed=embed,
        backbone=backbone,
        bank=bank,
        router=router,
        unembed=unembed,
        pristine_backbone=[m.copy() for m in backbone],
    )
    if embed.rows != config.vocab or embed.cols != config.hidden:
        raise DimensionError("checkpoint embed shape disagrees with its config")
    return model
