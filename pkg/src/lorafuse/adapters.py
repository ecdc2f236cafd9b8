"""Low-rank experts, gated concatenation, and fused switching.

An expert is a rank-r factor pair (down: r x d_in, up: d_out x r) whose
product is a low-rank delta on one backbone matrix. Applying experts the
naive way costs two launches each, every layer, every token. The merge path
instead concatenates the k chosen experts of a layer into one block pair:
gate weights are folded into the DOWN blocks only (the UP blocks stay
unscaled, so the concatenated product equals the gated sum exactly), and
the whole delta lands on the backbone with a single product.

Switching between consecutive tokens is the trick worth having: instead of
unmerging the previous token's delta and merging the current one in two
passes, ``build_switch`` stacks the previous blocks (DOWN negated) next to
the current blocks. One product of the combined pair simultaneously removes
the old delta and installs the new one, and ``merge_all`` applies that
switch for every layer of the stack inside a single segmented dispatch.

First/last token handling: an empty "previous" concat makes the switch
degenerate to a plain merge, and the end of a generation unmerges the final
concat so the backbone returns to its pristine values (drift is bounded by
round-off only, and is measured rather than hidden).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PrecisionError
from .linalg import (
    DEFAULT_TILE,
    DispatchRecorder,
    Matrix,
    Segment,
    SegmentTable,
    TileConfig,
    gemm,
    sgmm,
)
from .routing import GateDecision

# ---------------------------------------------------------------------------
# Expert containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LoraExpert:
    """One rank-r factor pair for one backbone matrix."""

    down: Matrix  # r x d_in
    up: Matrix  # d_out x r

    @property
    def rank(self) -> int:
        return self.down.rows

    def validate(self) -> None:
        if self.down.rows != self.up.cols:
            raise DimensionError(
                f"expert rank mismatch: down has {self.down.rows} rows, up has {self.up.cols} columns"
            )
        if self.down.rows < 1:
            raise DimensionError("expert rank must be >= 1")
        if self.down.precision != self.up.precision:
            raise PrecisionError("expert factors carry mixed precision tags")


@dataclass(frozen=True, slots=True)
class ExpertBank:
    """Per-layer lists of experts: layers[l][i] adapts backbone matrix l.

    Every layer holds the same number of experts and every expert has the
    same rank and input/output shape.
    """

    layers: tuple

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_experts(self) -> int:
        return len(self.layers[0])

    @property
    def rank(self) -> int:
        return self.layers[0][0].rank

    def validate(self) -> None:
        if not self.layers or not self.layers[0]:
            raise DimensionError("expert bank has no layers or no experts")
        n = len(self.layers[0])
        first = self.layers[0][0]
        for li, layer in enumerate(self.layers):
            if len(layer) != n:
                raise DimensionError(f"layer {li} holds {len(layer)} experts, expected {n}")
            for expert in layer:
                expert.validate()
                if expert.rank != first.rank:
                    raise DimensionError("experts must share one rank")
                if (
                    expert.down.cols != first.down.cols
                    or expert.up.rows != first.up.rows
                ):
                    raise DimensionError("experts must share one input/output shape")


# ---------------------------------------------------------------------------
# Concatenated adapters
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ConcatAdapter:
    """Stacked expert blocks for one layer.

    down_cat is (s x d_in), up_cat is (d_out x s) where s is the summed rank
    of all blocks. provenance lists one (expert_id, gate_weight, sign)
    triple per block, in stacking order. Gate weights live in the DOWN
    blocks only; sign -1 marks blocks staged for removal.
    """

    down_cat: Matrix
    up_cat: Matrix
    provenance: tuple

    @property
    def s(self) -> int:
        return self.down_cat.rows

    @property
    def d_in(self) -> int:
        return self.down_cat.cols

    @property
    def d_out(self) -> int:
        return self.up_cat.rows

    @classmethod
    def empty(cls, d_out: int, d_in: int, precision: str = "double") -> "ConcatAdapter":
        return cls(
            down_cat=Matrix.zeros(0, d_in, precision),
            up_cat=Matrix.zeros(d_out, 0, precision),
            provenance=(),
        )

    def validate(self) -> None:
        if self.up_cat.cols != self.down_cat.rows:
            raise DimensionError(
                f"concat rank mismatch: up_cat has {self.up_cat.cols} columns, "
                f"down_cat has {self.down_cat.rows} rows"
            )
        if self.provenance:
            block = self.s / len(self.provenance)
            if block != int(block) or int(block) < 1:
                raise DimensionError("summed rank does not divide into provenance blocks")
        elif self.s != 0:
            raise DimensionError("non-empty concat carries no provenance")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def expert_apply(
    expert: LoraExpert, x: Matrix, gate_weight: float, recorder: DispatchRecorder
) -> Matrix:
    """gate_weight * up @ (down @ x), recorded as exactly two gemm events.

    This is the unmerged path: two launches per expert per layer. The gate
    scale itself is host work folded into the returned vector.
    """
    expert.validate()
    if x.rows != expert.down.cols or x.cols != 1:
        raise DimensionError(
            f"expert expects a {expert.down.cols}x1 input, got {x.rows}x{x.cols}"
        )
    t = gemm(expert.down, x, recorder, label="adapter")
    u = gemm(expert.up, t, recorder, label="adapter")
    return Matrix(gate_weight * u.data, u.precision)


def concat_gated(bank_layer, gate: GateDecision) -> ConcatAdapter:
    """Stack one layer's chosen experts into a single gated block pair.

    DOWN blocks are scaled by their gate weights; UP blocks are stacked
    unscaled. Pure host work: records no events. Blocks appear in the
    gate's expert order.
    """
    if len(gate.expert_ids) == 0:
        raise ValueError("gate decision selects no experts")
    experts = []
    for expert_id in gate.expert_ids:
        if not 0 <= expert_id < len(bank_layer):
            raise IndexError(f"expert id {expert_id} outside bank of {len(bank_layer)}")
        experts.append(bank_layer[expert_id])
    down_blocks = [w * e.down.data for e, w in zip(experts, gate.weights)]
    up_blocks = [e.up.data for e in experts]
    precision = experts[0].down.precision
    return ConcatAdapter(
        down_cat=Matrix(np.vstack(down_blocks), precision),
        up_cat=Matrix(np.hstack(up_blocks), precision),
        provenance=tuple(
            (int(i), float(w), 1) for i, w in zip(gate.expert_ids, gate.weights)
        ),
    )


def build_switch(prev: ConcatAdapter, cur: ConcatAdapter) -> ConcatAdapter:
    """Stack [previous (DOWN negated) | current] into one switch concat.

    Applying the result's product once removes the previous token's delta
    and installs the current one. An empty ``prev`` (first decoded token)
    degrades to ``cur`` unchanged. Host work only; no events.
    """
    prev.validate()
    cur.validate()
    if prev.d_in != cur.d_in or prev.d_out != cur.d_out:
        raise DimensionError(
            f"switch halves disagree on shape: {prev.d_out}x{prev.d_in} vs {cur.d_out}x{cur.d_in}"
        )
    if prev.down_cat.precision != cur.down_cat.precision:
        raise PrecisionError("switch halves carry mixed precision tags")
    precision = cur.down_cat.precision
    down = np.vstack([-prev.down_cat.data, cur.down_cat.data])
    up = np.hstack([prev.up_cat.data, cur.up_cat.data])
    provenance = tuple((i, w, -sign) for i, w, sign in prev.provenance) + cur.provenance
    return ConcatAdapter(Matrix(down, precision), Matrix(up, precision), provenance)


def merge_all(
    backbone,
    concats,
    sign: int,
    recorder: DispatchRecorder,
    tile: TileConfig = DEFAULT_TILE,
) -> None:
    """Fold every layer's concat delta into its backbone matrix at once.

    backbone[l] += sign * up_cat[l] @ down_cat[l] for all l, issued as one
    segmented dispatch: exactly one sgmm event regardless of layer count.
    """
    if len(backbone) != len(concats):
        raise DimensionError(
            f"{len(backbone)} backbone matrices but {len(concats)} concats"
        )
    table = SegmentTable(
        [
            Segment(down=c.down_cat, up=c.up_cat, target=f)
            for f, c in zip(backbone, concats)
        ]
    )
    sgmm(table, sign, recorder, tile=tile, label="switch")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_BANK_FORMAT = "lorafuse-bank-v1"


def save_bank(bank: ExpertBank, path) -> None:
    """Write a bank as an npz container: shape-headed arrays per factor."""
    bank.validate()
    header = {
        "format": _BANK_FORMAT,
        "n_layers": bank.n_layers,
        "n_experts": bank.n_experts,
        "rank": bank.rank,
        "precision": bank.layers[0][0].down.precision,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)}
    for li, layer in enumerate(bank.layers):
        for ei, expert in enumerate(layer):
            arrays[f"layer{li}/expert{ei}/down"] = expert.down.data
            arrays[f"layer{li}/expert{ei}/up"] = expert.up.data
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_bank(path) -> ExpertBank:
    with np.load(path) as archive:
        header = json.loads(bytes(archive["header"]).decode("utf-8"))
        if header.get("format") != _BANK_FORMAT:
            raise ValueError(f"not a {_BANK_FORMAT} container: {path}")
        precision = header["precision"]
        layers = []
        for li in range(header["n_layers"]):
            layer = []
            for ei in range(header["n_experts"]):
                layer.append(
                    LoraExpert(
                        down=Matrix(archive[f"layer{li}/expert{ei}/down"], precision),
                        up=Matrix(archive[f"layer{li}/expert{ei}/up"], precision),
                    )
                )
            layers.append(tuple(layer))
    bank = ExpertBank(layers=tuple(layers))
    bank.validate()
    return bank
