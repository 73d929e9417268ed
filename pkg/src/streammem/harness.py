"""Replay harness: run streams, score probes, check budget, time updates.

Key Entity Matching (KEM) is case-insensitive whole-token matching: every
keyword's token sequence must appear contiguously in the answer. The
evidence flag checks whether any evidence turn's utterance text survives in
the assembled context; the keyword flag checks the planted entities
themselves, which is what information-preservation guarantees are stated
over. A probe row carries both.
"""

from __future__ import annotations

import json
import math
import string
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import EngineConfig
from .engine import Engine
from .errors import PreconditionError
from .oracle import oracle_knapsack
from .plugins import StubEmbedder
from .stream_io import load_stream
from .types import Probe, StreamEvent, Utterance

_PUNCT = string.punctuation


def match_tokens(text: str) -> list[str]:
    tokens = [t.strip(_PUNCT).lower() for t in text.split()]
    return [t for t in tokens if t]


def contains_sequence(haystack: list[str], needle: list[str]) -> bool:
    if not needle:
        return False
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def kem_hit(answer: str, keywords: tuple[str, ...]) -> bool | None:
    """All keywords present in the answer; None when the probe has none."""
    if not keywords:
        return None
    tokens = match_tokens(answer)
    return all(contains_sequence(tokens, match_tokens(k)) for k in keywords)


@dataclass
class ProbeRow:
    turn: int
    answer: str
    kem: bool | None
    evidence_in_context: bool | None
    keywords_in_context: bool | None
    latency_ms: float

    def to_dict(self, include_latency: bool = True) -> dict:
        data = {
            "turn": self.turn,
            "answer": self.answer,
            "kem": self.kem,
            "evidence_in_context": self.evidence_in_context,
            "keywords_in_context": self.keywords_in_context,
        }
        if include_latency:
            data["latency_ms"] = self.latency_ms
        return data


def _rate(flags: list[bool | None]) -> float | None:
    known = [f for f in flags if f is not None]
    if not known:
        return None
    return sum(known) / len(known)


def _decile_means(values: list[float]) -> list[float]:
    if not values:
        return []
    chunks = np.array_split(np.asarray(values, dtype=np.float64), 10)
    return [float(c.mean()) if len(c) else math.nan for c in chunks]


@dataclass
class MetricsReport:
    """Per-probe rows plus aggregates; aggregates recompute from the rows."""

    rows: list[ProbeRow] = field(default_factory=list)
    update_latencies: list[tuple[int, float]] = field(default_factory=list)
    budget_violations: int = 0
    turns: int = 0
    final_cost: int = 0
    t_max: int = 0

    @property
    def kem_rate(self) -> float | None:
        return _rate([r.kem for r in self.rows])

    @property
    def evidence_recall(self) -> float | None:
        return _rate([r.evidence_in_context for r in self.rows])

    @property
    def keyword_context_recall(self) -> float | None:
        return _rate([r.keywords_in_context for r in self.rows])

    def to_dict(self, include_latency: bool = True) -> dict:
        latencies = [ms for _, ms in self.update_latencies]
        data = {
            "turns": self.turns,
            "probes": len(self.rows),
            "budget_violations": self.budget_violations,
            "final_cost": self.final_cost,
            "t_max": self.t_max,
            "kem_rate": self.kem_rate,
            "evidence_recall": self.evidence_recall,
            "keyword_context_recall": self.keyword_context_recall,
            "per_probe": [r.to_dict(include_latency) for r in self.rows],
        }
        if include_latency:
            data["update_latency_decile_means_ms"] = _decile_means(latencies)
            probe_ms = sorted(r.latency_ms for r in self.rows)
            data["probe_latency_ms"] = {
                "mean": float(np.mean(probe_ms)) if probe_ms else None,
                "p50": float(np.percentile(probe_ms, 50)) if probe_ms else None,
                "p95": float(np.percentile(probe_ms, 95)) if probe_ms else None,
            }
        return data

    def canonical_json(self) -> str:
        """Deterministic bytes: everything except wall-clock measurements."""
        return json.dumps(self.to_dict(include_latency=False), sort_keys=True,
                          separators=(",", ":"))

    def json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def replay(
    stream: str | Path | list[StreamEvent],
    config: EngineConfig | None = None,
    *,
    audit_path: str | Path | None = None,
    exclude_io: bool = False,
    flush_on_probe: bool | None = None,
    collect_answers: bool = False,
) -> MetricsReport | tuple[MetricsReport, Engine]:
    """Run an engine over a stream and score every probe.

    Returns the metrics report; with ``collect_answers`` the engine is
    returned too so callers can snapshot or inspect final state.
    """
    events = load_stream(stream) if isinstance(stream, (str, Path)) else stream
    config = config or EngineConfig()
    if flush_on_probe is not None and flush_on_probe != config.flush_on_probe:
        config = EngineConfig.from_dict(
            {**config.to_dict(), "flush_on_probe": flush_on_probe}
        )
    engine = Engine(config)
    engine.exclude_io = exclude_io

    audit_handle = open(audit_path, "w", encoding="utf-8") if audit_path else None
    if audit_handle is not None:
        engine.audit_sink = lambda record: audit_handle.write(
            json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        )

    report = MetricsReport(t_max=config.params.t_max)
    texts_by_turn: dict[int, str] = {}
    try:
        for event in events:
            report.turns += 1
            if isinstance(event, Utterance):
                texts_by_turn[event.turn] = event.text
                io_before = engine.plugins.io_total() if exclude_io else 0.0
                started = time.perf_counter()
                engine.on_event(event)
                elapsed = time.perf_counter() - started
                if exclude_io:
                    elapsed -= engine.plugins.io_total() - io_before
                report.update_latencies.append((event.turn, elapsed * 1000.0))
            else:
                result = engine.on_event(event)
                context_tokens = match_tokens(result.context_text)
                evidence = None
                if event.evidence_turns:
                    evidence = any(
                        contains_sequence(context_tokens, match_tokens(texts_by_turn[t]))
                        for t in event.evidence_turns
                        if t in texts_by_turn
                    )
                keywords = None
                if event.keywords:
                    keywords = all(
                        contains_sequence(context_tokens, match_tokens(k))
                        for k in event.keywords
                    )
                report.rows.append(
                    ProbeRow(
                        turn=event.turn,
                        answer=result.answer,
                        kem=kem_hit(result.answer, event.keywords),
                        evidence_in_context=evidence,
                        keywords_in_context=keywords,
                        latency_ms=result.latency_ms,
                    )
                )
            if engine.hierarchy.total_cost > config.params.t_max:
                report.budget_violations += 1
    finally:
        if audit_handle is not None:
            audit_handle.close()
    report.final_cost = engine.hierarchy.total_cost
    if collect_answers:
        return report, engine
    return report


# ---------------------------------------------------------------------------
# Naive full-context contrast baseline
# ---------------------------------------------------------------------------


class NaiveRescanBaseline:
    """Keeps the raw transcript and re-scans all of it on every turn.

    The per-turn cost grows with the stream; replaying it alongside the
    engine makes the bounded-latency contrast concrete.
    """

    def __init__(self, dimension: int = 384, initial_capacity: int = 1024):
        self.embedder = StubEmbedder(dimension)
        self.dimension = dimension
        self._matrix = np.zeros((initial_capacity, dimension))
        self._count = 0

    def on_utterance(self, utterance: Utterance) -> None:
        vec = self.embedder.embed(utterance.composite)
        if self._count:
            scores = self._matrix[: self._count] @ vec
            float(scores.max())
        if self._count == len(self._matrix):
            grown = np.zeros((2 * len(self._matrix), self.dimension))
            grown[: self._count] = self._matrix
            self._matrix = grown
        self._matrix[self._count] = vec
        self._count += 1


def run_naive_baseline(
    events: list[StreamEvent], dimension: int = 384
) -> list[tuple[int, float]]:
    """Per-turn wall times of the naive re-scan over the utterances."""
    baseline = NaiveRescanBaseline(dimension)
    latencies: list[tuple[int, float]] = []
    for event in events:
        if not isinstance(event, Utterance):
            continue
        started = time.perf_counter()
        baseline.on_utterance(event)
        latencies.append((event.turn, (time.perf_counter() - started) * 1000.0))
    return latencies


# ---------------------------------------------------------------------------
# Offline regret reporting
# ---------------------------------------------------------------------------

GREEDY_BOUND = 1.0 - 1.0 / math.e


def regret_report(
    audit_path: str | Path, gamma: float | None = None, sample_every: int = 1
) -> dict:
    """Compare each audited step's retained utility against the exact optimum.

    Steps where the ratio falls under the greedy bound are flagged, not
    failed: they mark instances outside the policy's guarantee assumptions.
    """
    path = Path(audit_path)
    if not path.exists():
        raise PreconditionError(f"audit log not found: {path}")
    if sample_every < 1:
        raise PreconditionError("sample_every must be >= 1")
    g = 0.95 if gamma is None else gamma
    steps = []
    discounted_gap = 0.0
    index = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            if "candidates" not in record:
                continue
            if index % sample_every == 0:
                items = [(u, c) for _, u, c in record["candidates"]]
                _, opt = oracle_knapsack(items, record["t_max"])
                retained = sum(u for _, u, _ in record["retained"])
                ratio = 1.0 if opt <= 0 else retained / opt
                discounted_gap += (g ** index) * (opt - retained)
                steps.append(
                    {
                        "turn": record.get("turn"),
                        "opt": opt,
                        "retained": retained,
                        "ratio": ratio,
                        "below_bound": ratio < GREEDY_BOUND,
                    }
                )
            index += 1
    return {
        "steps": steps,
        "discounted_regret": discounted_gap,
        "gamma": g,
        "below_bound_steps": sum(1 for s in steps if s["below_bound"]),
    }
