"""Command-line harness: verify, bench, profile, gen-workload.

Config files are flat YAML key-value mappings (no nesting). Recognized keys
mirror ModelConfig (layers, hidden, vocab, experts, rank, top_k, precision,
seed, strategy, refresh_every), the cost model (launch_seconds,
flops_throughput, bytes_bandwidth) and the workload shape (n_new,
synthetic_prompts, synthetic_len_min, synthetic_len_max). Unknown keys are
errors: a config either parses completely or the command exits with code 2.

Workload files are line-delimited JSON. Each record is either
``{"tokens": [ints]}`` (token ids, all < vocab) or ``{"text": "..."}``
(a prompt string, byte-level tokenized modulo vocab).

bench writes a JSON document (schema_version 1) and a flat CSV beside it
(same stem, one row per strategy, columns in _CSV_COLUMNS). Reports are
byte-for-byte reproducible from (config, workload, seed): the embedded
timestamp honors the SOURCE_DATE_EPOCH convention and every other field is
a pure function of the inputs. Prompts may run on parallel workers
(--workers); results are merged by prompt index and each prompt gets a
freshly built model, so the bytes do not depend on the worker count.

Exit codes: 0 success, 1 a numeric check exceeded tolerance, 2 usage or
config/workload/I-O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np
import yaml

from .errors import ConfigError, InputError
from .linalg import EVENT_KINDS, DispatchRecorder
from .model import (
    ModelConfig,
    Strategy,
    build_model,
    decode_step,
    finalize_generation,
    generate,
    max_backbone_deviation,
    prefill,
)
from .perf import CostModel, breakdown, estimate

STRATEGY_ORDER = (
    Strategy.BASE,
    Strategy.LAYER_WISE_ROUTED,
    Strategy.PRE_GATED_NAIVE,
    Strategy.PRE_GATED_SIMPLE_MERGE,
    Strategy.PRE_GATED_FUSED,
)

_PRE_GATED = (
    Strategy.PRE_GATED_NAIVE,
    Strategy.PRE_GATED_SIMPLE_MERGE,
    Strategy.PRE_GATED_FUSED,
)

_MODEL_KEYS = (
    "layers",
    "hidden",
    "vocab",
    "experts",
    "rank",
    "top_k",
    "precision",
    "seed",
    "strategy",
    "refresh_every",
)
_COST_KEYS = ("launch_seconds", "flops_throughput", "bytes_bandwidth")
_WORKLOAD_KEYS = ("n_new", "synthetic_prompts", "synthetic_len_min", "synthetic_len_max")

# Hidden-state agreement thresholds for verify, per precision tag.
_VERIFY_TOL = {"double": 1e-9, "single": 1e-3}
_DEGENERATE_TOL = {"double": 1e-12, "single": 1e-5}

_RANK_SWEEP = (2, 4, 8, 16)

_CSV_COLUMNS = (
    "schema_version",
    "strategy",
    "n_prompts",
    "n_new",
    "decode_ms_per_token",
    "overhead_vs_base_pct",
    "prefill_ms_per_token",
    "decode_gemm",
    "decode_sgmm",
    "decode_elementwise",
    "decode_reduce",
    "decode_flops",
)


@dataclass(frozen=True, slots=True)
class EngineConfig:
    model: ModelConfig
    cost: CostModel
    n_new: int = 200
    synthetic_prompts: int = 50
    synthetic_len_min: int = 8
    synthetic_len_max: int = 32


@dataclass(frozen=True, slots=True)
class Workload:
    prompts: tuple  # tuple of tuples of token ids
    n_new: int

    @property
    def n_prompts(self) -> int:
        return len(self.prompts)

    @property
    def prompt_tokens(self) -> int:
        return sum(len(p) for p in self.prompts)


# ---------------------------------------------------------------------------
# Config and workload I/O
# ---------------------------------------------------------------------------


def load_config(path) -> EngineConfig:
    """Parse a flat YAML config; any unknown key or bad value is fatal."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a flat key-value mapping")
    known = set(_MODEL_KEYS) | set(_COST_KEYS) | set(_WORKLOAD_KEYS)
    unknown = sorted(str(k) for k in set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        model = ModelConfig.from_dict({k: raw[k] for k in _MODEL_KEYS if k in raw})
        cost = CostModel(**{k: float(raw[k]) for k in _COST_KEYS if k in raw})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    workload_keys = {k: raw[k] for k in _WORKLOAD_KEYS if k in raw}
    for key, value in workload_keys.items():
        if not isinstance(value, int) or value < 1:
            raise ConfigError(f"{key} must be a positive integer, got {value!r}")
    cfg = EngineConfig(model=model, cost=cost, **workload_keys)
    if cfg.synthetic_len_min > cfg.synthetic_len_max:
        raise ConfigError("synthetic_len_min exceeds synthetic_len_max")
    return cfg


def generate_workload(vocab: int, n_prompts: int, len_min: int, len_max: int, seed: int):
    """Random token-id prompts; the PRNG is fixed so a seed names a workload."""
    if vocab < 2:
        raise ConfigError("vocab must be >= 2")
    if n_prompts < 1 or len_min < 1 or len_max < len_min:
        raise ConfigError("need n_prompts >= 1 and 1 <= len_min <= len_max")
    rng = np.random.Generator(np.random.PCG64(seed))
    prompts = []
    for _ in range(n_prompts):
        length = int(rng.integers(len_min, len_max + 1))
        prompts.append(tuple(int(t) for t in rng.integers(0, vocab, size=length)))
    return tuple(prompts)


def write_workload(prompts, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prompt in prompts:
            fh.write(json.dumps({"tokens": list(prompt)}) + "\n")


def load_workload(path, vocab: int, n_new: int) -> Workload:
    prompts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ConfigError(f"{path}:{lineno}: record must be an object")
            if "tokens" in record:
                tokens = record["tokens"]
                if not isinstance(tokens, list) or not tokens:
                    raise ConfigError(f"{path}:{lineno}: tokens must be a non-empty list")
                for t in tokens:
                    if not isinstance(t, int) or not 0 <= t < vocab:
                        raise ConfigError(
                            f"{path}:{lineno}: token {t!r} outside vocab of {vocab}"
                        )
                prompts.append(tuple(tokens))
            elif "text" in record:
                text = record["text"]
                if not isinstance(text, str) or not text:
                    raise ConfigError(f"{path}:{lineno}: text must be a non-empty string")
                prompts.append(tuple(b % vocab for b in text.encode("utf-8")))
            else:
                raise ConfigError(f"{path}:{lineno}: record needs 'tokens' or 'text'")
    if not prompts:
        raise ConfigError(f"workload {path} contains no prompts")
    return Workload(prompts=tuple(prompts), n_new=n_new)


def synthetic_workload(cfg: EngineConfig) -> Workload:
    prompts = generate_workload(
        cfg.model.vocab,
        cfg.synthetic_prompts,
        cfg.synthetic_len_min,
        cfg.synthetic_len_max,
        cfg.model.seed,
    )
    return Workload(prompts=prompts, n_new=cfg.n_new)


def _timestamp() -> str:
    """ISO-8601 UTC; honors SOURCE_DATE_EPOCH for reproducible reports."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def _config_echo(cfg: EngineConfig) -> dict:
    echo = cfg.model.to_dict()
    echo.update(
        launch_seconds=cfg.cost.launch_seconds,
        flops_throughput=cfg.cost.flops_throughput,
        bytes_bandwidth=cfg.cost.bytes_bandwidth,
        n_new=cfg.n_new,
        synthetic_prompts=cfg.synthetic_prompts,
        synthetic_len_min=cfg.synthetic_len_min,
        synthetic_len_max=cfg.synthetic_len_max,
    )
    return echo


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _run_prompt(task) -> dict:
    """Benchmark one (strategy, prompt) pair.

    Top level so process pools can pickle it. Builds a fresh model per
    prompt, which keeps sequential and parallel runs byte-identical.
    """
    model_dict, strategy_value, prompt, n_new, cost_args = task
    config = ModelConfig.from_dict({**model_dict, "strategy": strategy_value})
    cost = CostModel(*cost_args)
    model = build_model(config)
    recorder = DispatchRecorder()

    mark = recorder.mark()
    state = prefill(model, prompt, recorder)
    prefill_events = tuple(recorder.events_since(mark))

    mark = recorder.mark()
    token = prompt[-1]
    tokens = []
    final_hidden = np.empty((n_new, config.hidden))
    for i in range(n_new):
        capture = []
        token, _ = decode_step(model, state, token, recorder, capture=capture)
        tokens.append(token)
        final_hidden[i] = capture[-1]
    finalize_generation(model, state, recorder)
    decode_events = tuple(recorder.events_since(mark))

    prefill_est = estimate(prefill_events, cost, n_tokens=len(prompt))
    decode_est = estimate(decode_events, cost, n_tokens=n_new)
    return {
        "tokens": tokens,
        "final_hidden": final_hidden,
        "prefill_ms_per_token": prefill_est.total_ms_per_token,
        "prefill_counts": prefill_est.dispatch_counts,
        "decode_ms_per_token": decode_est.total_ms_per_token,
        "decode_component_ms": decode_est.per_component_ms,
        "decode_counts": decode_est.dispatch_counts,
        "decode_flops": sum(ev.flops for ev in decode_events),
        "restore_dev": max_backbone_deviation(model),
    }


def run_bench(cfg: EngineConfig, workload: Workload, workers: int = 1) -> dict:
    """Run all five strategies over the workload; return the report document."""
    model_dict = cfg.model.to_dict()
    cost_args = (cfg.cost.launch_seconds, cfg.cost.flops_throughput, cfg.cost.bytes_bandwidth)
    tasks = [
        (model_dict, strat.value, prompt, workload.n_new, cost_args)
        for strat in STRATEGY_ORDER
        for prompt in workload.prompts
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_prompt, tasks))
    else:
        outcomes = [_run_prompt(t) for t in tasks]

    per_strategy = {}
    for si, strat in enumerate(STRATEGY_ORDER):
        rows = outcomes[si * workload.n_prompts : (si + 1) * workload.n_prompts]
        n = len(rows)
        decode_counts = {k: sum(r["decode_counts"][k] for r in rows) for k in EVENT_KINDS}
        prefill_counts = {k: sum(r["prefill_counts"][k] for r in rows) for k in EVENT_KINDS}
        component = {
            label: sum(r["decode_component_ms"][label] for r in rows) / n
            for label in rows[0]["decode_component_ms"]
        }
        prefill_ms = sum(
            r["prefill_ms_per_token"] * len(p) for r, p in zip(rows, workload.prompts)
        ) / workload.prompt_tokens
        digest = hashlib.sha256(
            json.dumps([r["tokens"] for r in rows]).encode("utf-8")
        ).hexdigest()
        per_strategy[strat] = {
            "rows": rows,
            "summary": {
                "decode_ms_per_token": sum(r["decode_ms_per_token"] for r in rows) / n,
                "per_prompt_decode_ms": [r["decode_ms_per_token"] for r in rows],
                "per_component_ms": component,
                "dispatch_counts_decode": decode_counts,
                "dispatch_counts_prefill": prefill_counts,
                "decode_flops": sum(r["decode_flops"] for r in rows),
                "prefill_ms_per_token": prefill_ms,
                "max_backbone_restore_dev": max(r["restore_dev"] for r in rows),
                "tokens_digest": digest,
            },
        }

    base_ms = per_strategy[Strategy.BASE]["summary"]["decode_ms_per_token"]
    for strat in STRATEGY_ORDER:
        ms = per_strategy[strat]["summary"]["decode_ms_per_token"]
        per_strategy[strat]["summary"]["overhead_vs_base_pct"] = 100.0 * (ms - base_ms) / base_ms

    # Equivalence across the pre-gated strategies: identical token streams,
    # small final-hidden deviations. Deviations are reported, not enforced
    # (verify is the enforcing command).
    equivalence = {"tokens_match": True, "pairs": {}}
    for i, a in enumerate(_PRE_GATED):
        for b in _PRE_GATED[i + 1 :]:
            rows_a = per_strategy[a]["rows"]
            rows_b = per_strategy[b]["rows"]
            match = all(ra["tokens"] == rb["tokens"] for ra, rb in zip(rows_a, rows_b))
            equivalence["tokens_match"] = equivalence["tokens_match"] and match
            dev = max(
                float(np.max(np.abs(ra["final_hidden"] - rb["final_hidden"])))
                for ra, rb in zip(rows_a, rows_b)
            )
            equivalence["pairs"][f"{a.value}|{b.value}"] = {
                "max_final_hidden_dev": dev,
                "tokens_match": match,
            }

    return {
        "schema_version": 1,
        "kind": "bench",
        "timestamp": _timestamp(),
        "seed": cfg.model.seed,
        "config": _config_echo(cfg),
        "workload": {
            "n_prompts": workload.n_prompts,
            "n_new": workload.n_new,
            "prompt_tokens": workload.prompt_tokens,
        },
        "strategies": {
            strat.value: per_strategy[strat]["summary"] for strat in STRATEGY_ORDER
        },
        "equivalence": equivalence,
    }


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _csv_path(out_path: str) -> str:
    return os.path.splitext(out_path)[0] + ".csv"


def write_bench_csv(report: dict, path) -> None:
    """One row per strategy; columns in _CSV_COLUMNS, floats via repr."""
    lines = [",".join(_CSV_COLUMNS)]
    for strat in STRATEGY_ORDER:
        s = report["strategies"][strat.value]
        counts = s["dispatch_counts_decode"]
        cells = (
            str(report["schema_version"]),
            strat.value,
            str(report["workload"]["n_prompts"]),
            str(report["workload"]["n_new"]),
            repr(float(s["decode_ms_per_token"])),
            repr(float(s["overhead_vs_base_pct"])),
            repr(float(s["prefill_ms_per_token"])),
            str(counts["gemm"]),
            str(counts["sgmm"]),
            str(counts["elementwise"]),
            str(counts["reduce"]),
            str(s["decode_flops"]),
        )
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def run_verify(cfg: EngineConfig):
    """Check pre-gated strategy equivalence on a seeded prompt set.

    Returns (exit_code, printable lines). Token streams must match exactly
    and hidden states must agree within the per-precision tolerance at
    every layer of every step. With experts=1 and top_k=1 the layer-wise
    strategy collapses onto the pre-gated naive one and is checked too.
    """
    tol = _VERIFY_TOL[cfg.model.precision]
    rng = np.random.Generator(np.random.PCG64(cfg.model.seed))
    prompts = [
        tuple(int(t) for t in rng.integers(0, cfg.model.vocab, size=6)) for _ in range(4)
    ]
    n_new = min(cfg.n_new, 32)

    def run(strategy: Strategy):
        model = build_model(replace(cfg.model, strategy=strategy))
        tokens, hiddens = [], []
        for prompt in prompts:
            sink = []
            out, _ = generate(model, prompt, n_new, DispatchRecorder(), hidden_sink=sink)
            tokens.append(out)
            hiddens.append(np.array([np.stack(step) for step in sink]))
        return tokens, hiddens

    results = {strat: run(strat) for strat in _PRE_GATED}
    lines = []
    worst = 0.0
    all_match = True
    for i, a in enumerate(_PRE_GATED):
        for b in _PRE_GATED[i + 1 :]:
            dev = max(
                float(np.max(np.abs(ha - hb)))
                for ha, hb in zip(results[a][1], results[b][1])
            )
            match = results[a][0] == results[b][0]
            worst = max(worst, dev)
            all_match = all_match and match
            lines.append(
                f"{a.value} ~ {b.value}: max hidden deviation {dev:.3e} "
                f"(tolerance {tol:.0e}), tokens {'identical' if match else 'DIFFER'}"
            )
    ok = worst <= tol and all_match

    if cfg.model.experts == 1 and cfg.model.top_k == 1:
        dtol = _DEGENERATE_TOL[cfg.model.precision]
        lw_tokens, lw_hiddens = run(Strategy.LAYER_WISE_ROUTED)
        naive_tokens, naive_hiddens = results[Strategy.PRE_GATED_NAIVE]
        dev = max(
            float(np.max(np.abs(ha - hb)))
            for ha, hb in zip(lw_hiddens, naive_hiddens)
        )
        match = lw_tokens == naive_tokens
        lines.append(
            f"layer_wise_routed ~ pre_gated_naive (experts=1, top_k=1): "
            f"max hidden deviation {dev:.3e} (tolerance {dtol:.0e}), "
            f"tokens {'identical' if match else 'DIFFER'}"
        )
        ok = ok and dev <= dtol and match

    lines.append("verify: " + ("PASS" if ok else "FAIL"))
    return (0 if ok else 1), lines


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------


def _steady_decode_events(model, warm_token: int):
    """Events of one steady-state decode step (after one warm step)."""
    recorder = DispatchRecorder()
    state = prefill(model, (warm_token,), recorder)
    token, _ = decode_step(model, state, warm_token, recorder)
    mark = recorder.mark()
    decode_step(model, state, token, recorder)
    return tuple(recorder.events_since(mark))


def _breakdown_rows(events) -> list:
    return [[r.label, r.kind, r.count, r.flops] for r in breakdown(events)]


def run_profile(cfg: EngineConfig) -> dict:
    """Per-component breakdowns for one decode step and one 100-token
    prefill per strategy, plus an adapter-rank sweep on the layer-wise
    strategy (launch dominance keeps adapter latency nearly flat while
    adapter flops grow linearly with rank)."""
    rng = np.random.Generator(np.random.PCG64(cfg.model.seed))
    warm_token = int(rng.integers(0, cfg.model.vocab))
    prefill_tokens = tuple(int(t) for t in rng.integers(0, cfg.model.vocab, size=100))

    decode_section = {}
    prefill_section = {}
    for strat in STRATEGY_ORDER:
        model = build_model(replace(cfg.model, strategy=strat))
        events = _steady_decode_events(model, warm_token)
        est = estimate(events, cfg.cost, n_tokens=1)
        decode_section[strat.value] = {
            "rows": _breakdown_rows(events),
            "ms_per_token": est.total_ms_per_token,
            "per_component_ms": est.per_component_ms,
            "dispatch_counts": est.dispatch_counts,
        }
        model = build_model(replace(cfg.model, strategy=strat))
        recorder = DispatchRecorder()
        prefill(model, prefill_tokens, recorder)
        events = tuple(recorder.events)
        est = estimate(events, cfg.cost, n_tokens=len(prefill_tokens))
        prefill_section[strat.value] = {
            "rows": _breakdown_rows(events),
            "ms_per_token": est.total_ms_per_token,
            "per_component_ms": est.per_component_ms,
            "dispatch_counts": est.dispatch_counts,
        }

    sweep = {"rank": [], "adapter_ms_per_token": [], "adapter_flops_per_token": []}
    for rank in _RANK_SWEEP:
        if rank > cfg.model.hidden:
            continue
        model = build_model(
            replace(cfg.model, rank=rank, strategy=Strategy.LAYER_WISE_ROUTED)
        )
        events = _steady_decode_events(model, warm_token)
        est = estimate(events, cfg.cost, n_tokens=1)
        adapter_flops = sum(ev.flops for ev in events if ev.label == "adapter")
        sweep["rank"].append(rank)
        sweep["adapter_ms_per_token"].append(est.per_component_ms["adapter"])
        sweep["adapter_flops_per_token"].append(adapter_flops)

    return {
        "schema_version": 1,
        "kind": "profile",
        "timestamp": _timestamp(),
        "seed": cfg.model.seed,
        "config": _config_echo(cfg),
        "decode_step": decode_section,
        "prefill_100": prefill_section,
        "rank_sweep": sweep,
    }


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorafuse",
        description="Desk-scale decoder engine for pre-gated LoRA mixtures "
        "with fused adapter switching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check pre-gated strategy equivalence")
    p.add_argument("--config", required=True)

    p = sub.add_parser("bench", help="estimate per-strategy decode latency")
    p.add_argument("--config", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--workload", help="line-delimited JSON workload file")
    source.add_argument(
        "--synthetic", action="store_true", help="generate the seeded synthetic workload"
    )
    p.add_argument("--out", required=True, help="JSON report path; CSV written beside it")
    p.add_argument("--workers", type=int, default=1, help="parallel prompt workers")

    p = sub.add_parser("profile", help="per-component dispatch breakdowns")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="JSON profile path")

    p = sub.add_parser("gen-workload", help="write a random token-id workload")
    p.add_argument("--vocab", type=int, required=True)
    p.add_argument("--prompts", type=int, required=True)
    p.add_argument("--len", dest="len_range", required=True, metavar="MIN:MAX")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    return parser


def _parse_len_range(text: str):
    try:
        lo, hi = text.split(":", 1)
        return int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"--len must look like MIN:MAX, got {text!r}") from exc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            cfg = load_config(args.config)
            code, lines = run_verify(cfg)
            print("\n".join(lines))
            return code

        if args.command == "bench":
            cfg = load_config(args.config)
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            if args.synthetic:
                workload = synthetic_workload(cfg)
            else:
                workload = load_workload(args.workload, cfg.model.vocab, cfg.n_new)
            report = run_bench(cfg, workload, workers=args.workers)
            _write_json(report, args.out)
            write_bench_csv(report, _csv_path(args.out))
            print(f"wrote {args.out} and {_csv_path(args.out)}")
            return 0

        if args.command == "profile":
            cfg = load_config(args.config)
            _write_json(run_profile(cfg), args.out)
            print(f"wrote {args.out}")
            return 0

        if args.command == "gen-workload":
            lo, hi = _parse_len_range(args.len_range)
            prompts = generate_workload(args.vocab, args.prompts, lo, hi, args.seed)
            write_workload(prompts, args.out)
            print(f"wrote {len(prompts)} prompts to {args.out}")
            return 0
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
