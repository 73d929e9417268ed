"""Command-line surface: replay, synth, oracle, regret, serve.

``serve`` speaks a JSON-lines protocol on stdin/stdout so host-language
pipelines can drive one engine instance per process:

* ``{"op": "feed", "event": {...stream line...}}``
* ``{"op": "snapshot"}``
* ``{"op": "search", "query": "...", "k_amu": 3, ...}``
* ``{"op": "register_plugin", "kind": "embedder"|"generator",
     "endpoint": "http://...", ["dimension": d]}``
* ``{"op": "close"}``

Every request gets one ``{"ok": true, ...}`` or
``{"ok": false, "error": {"type": ..., "message": ...}}`` line back.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .config import EngineConfig
from .engine import Engine
from .errors import MemoryEngineError
from .harness import MetricsReport, regret_report, replay
from .oracle import oracle_knapsack
from .plugins import RemoteEmbedder, RemoteGenerator
from .stream_io import event_from_dict, write_stream
from .synth import gen_synthetic


def _load_config(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    with open(path, "r", encoding="utf-8") as handle:
        return EngineConfig.from_dict(json.load(handle))


def _cmd_replay(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(args.out) if args.out else None
    audit_path = None
    if args.audit:
        if out_dir is None:
            print("--audit requires --out", file=sys.stderr)
            return 2
        out_dir.mkdir(parents=True, exist_ok=True)
        audit_path = out_dir / "audit.jsonl"
    report: MetricsReport = replay(
        args.stream,
        config,
        audit_path=audit_path,
        exclude_io=args.exclude_io,
        flush_on_probe=True if args.flush_on_probe else None,
    )
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(report.json(), encoding="utf-8")
        with open(out_dir / "update_latencies.csv", "w", encoding="utf-8") as handle:
            handle.write("turn,latency_ms\n")
            for turn, ms in report.update_latencies:
                handle.write(f"{turn},{ms:.6f}\n")
    summary = report.to_dict(include_latency=True)
    summary.pop("per_probe")
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 1 if report.budget_violations else 0


def _cmd_synth(args) -> int:
    stream = gen_synthetic(
        seed=args.seed,
        n_turns=args.turns,
        n_topics=args.topics,
        probe_rate=args.probe_rate,
    )
    write_stream(stream.events, args.out)
    if args.config_out:
        config = EngineConfig()
        doc = config.to_dict()
        doc["plugins"]["scene_keywords"] = stream.keyword_table
        Path(args.config_out).write_text(
            json.dumps(doc, sort_keys=True, indent=2), encoding="utf-8"
        )
    probes = sum(1 for e in stream.events if not hasattr(e, "speaker"))
    print(f"wrote {len(stream.events)} events ({probes} probes) to {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    with open(args.items, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    items = [(float(u), float(c)) for u, c in raw]
    subset, value = oracle_knapsack(items, args.capacity)
    print(json.dumps({"subset": list(subset), "value": value}, sort_keys=True))
    return 0


def _cmd_regret(args) -> int:
    result = regret_report(args.audit, gamma=args.gamma, sample_every=args.sample_every)
    print(json.dumps(result, sort_keys=True, indent=2))
    return 0


def _cmd_serve(args) -> int:
    config = _load_config(args.config)
    engine = Engine(config)
    stdout = sys.stdout
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            response = _serve_one(engine, request)
        except MemoryEngineError as exc:
            response = {
                "ok": False,
                "error": {"type": type(exc).__name__, "message": str(exc)},
            }
        except (ValueError, KeyError, TypeError) as exc:
            response = {
                "ok": False,
                "error": {"type": type(exc).__name__, "message": str(exc)},
            }
        stdout.write(json.dumps(response, sort_keys=True, separators=(",", ":")) + "\n")
        stdout.flush()
        if response.get("op") == "close":
            return 0
    return 0


def _serve_one(engine: Engine, request: dict) -> dict:
    op = request.get("op")
    if op == "feed":
        result = engine.on_event(event_from_dict(request["event"]))
        if result is None:
            return {"ok": True, "result": None}
        return {
            "ok": True,
            "result": {
                "answer": result.answer,
                "latency_ms": result.latency_ms,
                "context": result.context_text,
            },
        }
    if op == "snapshot":
        return {"ok": True, "snapshot": engine.snapshot()}
    if op == "search":
        kwargs = {
            k: request[k]
            for k in ("k_scene", "k_event", "k_amu", "min_sim", "per_event_k")
            if k in request
        }
        paths = engine.search_readonly(request["query"], **kwargs)
        return {"ok": True, "paths": [asdict(p) for p in paths]}
    if op == "register_plugin":
        kind = request.get("kind")
        endpoint = request["endpoint"]
        if kind == "embedder":
            dimension = int(request.get("dimension", engine.config.dimension))
            if dimension != engine.config.dimension:
                raise MemoryEngineError(
                    f"embedder dimension {dimension} != engine dimension "
                    f"{engine.config.dimension}"
                )
            engine.plugins.embedder = RemoteEmbedder(
                endpoint,
                dimension=dimension,
                timeout=float(request.get("timeout", 10.0)),
                retry=int(request.get("retry", 2)),
            )
        elif kind == "generator":
            engine.plugins.generator = RemoteGenerator(
                endpoint,
                model_name=request.get("model_name", "callable"),
                timeout=float(request.get("timeout", 10.0)),
                retry=int(request.get("retry", 2)),
            )
        else:
            raise ValueError(f"cannot register plugin kind {kind!r}")
        return {"ok": True, "registered": kind}
    if op == "config":
        return {"ok": True, "config": engine.config.to_dict()}
    if op == "close":
        return {"ok": True, "op": "close"}
    raise ValueError(f"unknown op {op!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streammem",
        description="Bounded hierarchical memory engine for dialogue streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay a JSONL stream and emit metrics")
    p.add_argument("stream", help="path to the JSONL stream file")
    p.add_argument("--config", help="engine config JSON", default=None)
    p.add_argument("--audit", action="store_true", help="write audit.jsonl under --out")
    p.add_argument("--exclude-io", action="store_true",
                   help="subtract remote-plugin time from latencies")
    p.add_argument("--flush-on-probe", action="store_true",
                   help="force a buffer flush before answering probes")
    p.add_argument("--out", help="directory for report.json and CSVs", default=None)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("synth", help="generate a synthetic stream")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--turns", type=int, required=True)
    p.add_argument("--topics", type=int, default=4)
    p.add_argument("--probe-rate", type=float, default=0.1)
    p.add_argument("--out", required=True, help="stream output path")
    p.add_argument("--config-out", default=None,
                   help="also write a matching engine config JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("oracle", help="solve a (utility, cost) knapsack exactly")
    p.add_argument("--items", required=True, help="JSON file: [[utility, cost], ...]")
    p.add_argument("--capacity", type=float, required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("regret", help="compare audited steps against the oracle")
    p.add_argument("--audit", required=True, help="audit.jsonl from replay --audit")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--sample-every", type=int, default=1)
    p.set_defaults(func=_cmd_regret)

    p = sub.add_parser("serve", help="drive one engine over JSON lines on stdio")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
