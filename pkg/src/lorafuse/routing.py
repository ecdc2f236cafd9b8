"""Top-k expert routing.

A router is a single linear map from the hidden state to one logit per
expert. Selection keeps the k largest logits (ties go to the lower expert
index), masks the rest to -inf, and softmaxes; masking to -inf is computed
equivalently as a softmax over the selected logits only. The engine's
pre-gated strategies call the router once per token, on the hidden state
entering the first expanded layer, and reuse that one decision at every
layer; the layer-wise strategy re-routes at each layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import DispatchRecorder, Matrix, gemm


@dataclass(frozen=True, slots=True)
class RouterParams:
    """Routing weights, one row of ``weight`` (N x d) per expert."""

    weight: Matrix

    @property
    def n_experts(self) -> int:
        return self.weight.rows

    @property
    def hidden(self) -> int:
        return self.weight.cols


@dataclass(frozen=True, slots=True)
class GateDecision:
    """Chosen experts and their mixture weights.

    expert_ids are ordered by descending logit (ties: ascending index);
    weights are strictly positive and sum to 1.
    """

    expert_ids: tuple
    weights: tuple


def route(
    router: RouterParams, x: Matrix, k: int, recorder: DispatchRecorder
) -> GateDecision:
    """Score experts for one hidden state and pick the top k.

    Records one gemm event (the logit projection) and one elementwise event
    (the masked softmax), both labeled "router".
    """
    if not 1 <= k <= router.n_experts:
        raise ValueError(f"k={k} must be in [1, {router.n_experts}]")
    if x.rows != router.hidden or x.cols != 1:
        raise DimensionError(
            f"router expects a {router.hidden}x1 hidden state, got {x.rows}x{x.cols}"
        )
    logits = gemm(router.weight, x, recorder, label="router").data[:, 0]
    # Stable sort on negated logits: descending by logit, ascending index on ties.
    order = np.argsort(-logits, kind="stable")[:k]
    selected = logits[order]
    shifted = np.exp(selected - selected.max())
    weights = shifted / shifted.sum()
    recorder.record(
        "elementwise",
        flops=router.n_experts,
        bytes_touched=2 * router.n_experts * x.itemsize,
        label="router",
    )
    return GateDecision(
        expert_ids=tuple(int(i) for i in order),
        weights=tuple(float(w) for w in weights),
    )


def pre_gate(
    router: RouterParams, x_first: Matrix, k: int, recorder: DispatchRecorder
) -> GateDecision:
    """Route once on the hidden state entering the first expanded layer.

    The returned decision is the one a pre-gated engine reuses for every
    layer of the current token.
    """
    return route(router, x_first, k, recorder)
