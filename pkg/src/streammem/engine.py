"""The engine facade: one single-writer state machine per stream.

``on_event`` drives the full pipeline: utterances flow through the sensing
buffer, flushed blocks are distilled and mounted, and the budget is
restored before the call returns; probes run retrieval, assemble the
unified context, and delegate to the generator. Snapshots serialize the
entire state to canonical JSON and restore losslessly, so a restarted
engine continues bit-for-bit like the uninterrupted run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import optimizer, retrieval
from .config import EngineConfig
from .distillation import AmuCandidate, PendingNodes, distill
from .errors import ConfigError, EngineBusyError, PluginError, PreconditionError
from .hierarchy import LEVEL_BY_NAME, LEVEL_NAMES, Hierarchy, MemoryNode
from .perception import BufferEntry, SemanticBlock, SensingBuffer
from .plugins import Plugins, build_plugins
from .types import Probe, Stats, StreamEvent, Utterance

SNAPSHOT_VERSION = 1

# A failed distillation re-queues the raw block once before dropping it.
MAX_DISTILL_ATTEMPTS = 2


@dataclass(frozen=True)
class ProbeResult:
    """Answer plus the measured latency and the context it was grounded in."""

    answer: str
    latency_ms: float
    context_text: str
    paths: tuple[retrieval.EvidencePath, ...]


class Engine:
    """Algorithm facade binding perception, distillation, optimization,
    and retrieval over one bounded hierarchy."""

    def __init__(self, config: EngineConfig | None = None, plugins: Plugins | None = None):
        self.config = config or EngineConfig()
        self.plugins = plugins or build_plugins(self.config)
        if getattr(self.plugins.embedder, "dimension", self.config.dimension) != self.config.dimension:
            raise ConfigError("embedder dimension does not match engine dimension")
        self.params = self.config.params
        self.buffer = SensingBuffer(
            capacity=self.config.buffer_capacity,
            leading_window_tokens=self.config.leading_window_tokens,
            tau_drift=self.params.tau_drift,
        )
        self.pending: list[PendingNodes] = []
        self.hierarchy = Hierarchy(self.params.t_max, self.config.dimension)
        self.clock = 0
        self.stats = Stats()
        self.failed_blocks: list[dict] = []
        self.exclude_io = False
        self.audit_sink: Callable[[dict], None] | None = None
        self._busy = False

    # -- the single-writer event loop --------------------------------------

    def on_event(self, event: StreamEvent) -> ProbeResult | None:
        """Consume one stream event; probes return an answer, updates None."""
        if self._busy:
            raise EngineBusyError(
                "on_event re-entered: one engine instance is a single writer"
            )
        self._busy = True
        try:
            if event.turn <= self.clock:
                raise PreconditionError(
                    f"event turn {event.turn} is not beyond engine clock {self.clock}"
                )
            self.hierarchy.examined = 0
            try:
                if isinstance(event, Probe):
                    result = self._on_probe(event)
                else:
                    result = self._on_utterance(event)
            except PluginError as exc:
                raise PluginError(f"turn {event.turn}: {exc}") from exc
            self.stats.max_examined = max(self.stats.max_examined, self.hierarchy.examined)
            self.clock = event.turn
            return result
        finally:
            self._busy = False

    def _on_utterance(self, utterance: Utterance) -> None:
        self.stats.utterances += 1
        text = self.plugins.transcriber.transcribe(utterance.text)
        if text != utterance.text:
            utterance = Utterance(utterance.turn, utterance.speaker, text, utterance.wall_time)
        block = self.buffer.ingest(utterance, self.plugins.embedder)
        if block is not None:
            self._process_block(block, utterance.turn)
        return None

    def _process_block(self, block: SemanticBlock, now: int) -> None:
        self.stats.blocks += 1
        self._retry_failed(now)
        try:
            self.pending.append(distill(block, self.plugins))
        except PluginError:
            self.failed_blocks.append({"block": block, "attempts": 1})
            return
        self._optimize(now)

    def _retry_failed(self, now: int) -> None:
        if not self.failed_blocks:
            return
        still_failed: list[dict] = []
        for item in self.failed_blocks:
            try:
                self.pending.append(distill(item["block"], self.plugins))
            except PluginError:
                item["attempts"] += 1
                if item["attempts"] >= MAX_DISTILL_ATTEMPTS:
                    self.stats.dropped_blocks += 1
                    if self.audit_sink is not None:
                        self.audit_sink(
                            {
                                "dropped_block": list(item["block"].span),
                                "turn": now,
                                "attempts": item["attempts"],
                            }
                        )
                else:
                    still_failed.append(item)
        self.failed_blocks = still_failed

    def _optimize(self, now: int) -> None:
        report = optimizer.step(
            self.hierarchy,
            self.pending,
            now,
            self.params,
            pass_order=self.config.pass_order,
        )
        self.stats.admitted += len(report.admitted_ids)
        self.stats.pruned += len(report.pruned_ids)
        self.stats.merged += len(report.merged_pairs)
        self.stats.cascaded += len(report.cascaded_ids)
        if self.audit_sink is not None:
            self.audit_sink(report.to_dict(turn=now, t_max=self.params.t_max))

    def _on_probe(self, probe: Probe) -> ProbeResult:
        self.stats.probes += 1
        started = time.perf_counter()
        io_before = self.plugins.io_total()
        if self.config.flush_on_probe:
            block = self.buffer.force_flush()
            if block is not None:
                self._process_block(block, probe.turn)
        paths = retrieval.search(
            self.hierarchy,
            probe.question,
            self.plugins.embedder,
            probe.turn,
            self.params,
            k_scene=self.config.k_scene,
            k_event=self.config.k_event,
            k_amu=self.config.k_amu,
            min_sim=self.config.min_sim,
            per_event_k=self.config.per_event_k,
        )
        bundle = retrieval.assemble_context(self.buffer.all_entries(), self.pending, paths)
        answer = retrieval.answer(probe, bundle, self.plugins.generator)
        elapsed = time.perf_counter() - started
        if self.exclude_io:
            elapsed -= self.plugins.io_total() - io_before
        return ProbeResult(
            answer=answer,
            latency_ms=elapsed * 1000.0,
            context_text=bundle.combined_text(),
            paths=tuple(paths),
        )

    # -- read-only views ----------------------------------------------------

    def search_readonly(self, query: str, **kwargs) -> list[retrieval.EvidencePath]:
        """Search without touching nodes; for offline analysis only."""
        return retrieval.search(
            self.hierarchy,
            query,
            self.plugins.embedder,
            self.clock,
            self.params,
            k_scene=kwargs.get("k_scene", self.config.k_scene),
            k_event=kwargs.get("k_event", self.config.k_event),
            k_amu=kwargs.get("k_amu", self.config.k_amu),
            min_sim=kwargs.get("min_sim", self.config.min_sim),
            per_event_k=kwargs.get("per_event_k", self.config.per_event_k),
            touch=False,
        )

    # -- snapshots ------------------------------------------------------------

    def snapshot(self) -> str:
        """Canonical JSON of the full engine state; round-trips losslessly."""
        doc = {
            "schema_version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "clock": self.clock,
            "stats": self.stats.to_dict(),
            "hierarchy": {
                "next_id": self.hierarchy.next_id,
                "total_cost": self.hierarchy.total_cost,
                "dirty_events": sorted(self.hierarchy.dirty_events),
                "nodes": [
                    _node_to_dict(self.hierarchy.nodes[nid])
                    for nid in sorted(self.hierarchy.nodes)
                ],
            },
            "buffer": {
                "context": [_entry_to_dict(e) for e in self.buffer.context],
                "entries": [_entry_to_dict(e) for e in self.buffer.entries],
                "prev_embedding": _vec(self.buffer.prev_embedding),
            },
            "pending": [_pending_to_dict(p) for p in self.pending],
            "failed_blocks": [
                {"block": _block_to_dict(item["block"]), "attempts": item["attempts"]}
                for item in self.failed_blocks
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, snapshot: str, plugins: Plugins | None = None) -> "Engine":
        """Rebuild an engine from :meth:`snapshot` output."""
        doc = json.loads(snapshot)
        if doc.get("schema_version") != SNAPSHOT_VERSION:
            raise PreconditionError(
                f"unsupported snapshot schema_version {doc.get('schema_version')!r}"
            )
        config = EngineConfig.from_dict(doc["config"])
        engine = cls(config, plugins=plugins)
        engine.clock = doc["clock"]
        engine.stats = Stats.from_dict(doc["stats"])
        hdoc = doc["hierarchy"]
        engine.hierarchy = Hierarchy.restore(
            budget=config.params.t_max,
            dim=config.dimension,
            nodes=[_node_from_dict(d) for d in hdoc["nodes"]],
            next_id=hdoc["next_id"],
            dirty_events=set(hdoc["dirty_events"]),
        )
        if engine.hierarchy.total_cost != hdoc["total_cost"]:
            raise PreconditionError("snapshot total_cost does not match node costs")
        bdoc = doc["buffer"]
        engine.buffer.context = [_entry_from_dict(d) for d in bdoc["context"]]
        engine.buffer.entries = [_entry_from_dict(d) for d in bdoc["entries"]]
        prev = bdoc["prev_embedding"]
        engine.buffer.prev_embedding = None if prev is None else np.asarray(prev)
        engine.pending = [_pending_from_dict(d) for d in doc["pending"]]
        engine.failed_blocks = [
            {"block": _block_from_dict(d["block"]), "attempts": d["attempts"]}
            for d in doc["failed_blocks"]
        ]
        return engine


# -- serialization helpers ----------------------------------------------------


def _vec(v) -> list[float] | None:
    return None if v is None else [float(x) for x in v]


def _node_to_dict(node: MemoryNode) -> dict:
    return {
        "id": node.id,
        "level": LEVEL_NAMES[node.level],
        "label": node.label,
        "embedding": _vec(node.embedding),
        "cost": node.cost,
        "freq": node.freq,
        "last_touch": node.last_touch,
        "relations": [[rel, peer] for rel, peer in node.relations],
        "parent": node.parent,
        "children": sorted(node.children),
    }


def _node_from_dict(data: dict) -> MemoryNode:
    return MemoryNode(
        id=data["id"],
        level=LEVEL_BY_NAME[data["level"]],
        label=data["label"],
        embedding=np.asarray(data["embedding"], dtype=np.float64),
        cost=data["cost"],
        freq=data["freq"],
        last_touch=data["last_touch"],
        relations=[(rel, peer) for rel, peer in data["relations"]],
        parent=data["parent"],
        children=set(data["children"]),
    )


def _utterance_to_dict(u: Utterance) -> dict:
    return {"turn": u.turn, "speaker": u.speaker, "text": u.text, "wall_time": u.wall_time}


def _utterance_from_dict(d: dict) -> Utterance:
    return Utterance(d["turn"], d["speaker"], d["text"], d["wall_time"])


def _entry_to_dict(entry: BufferEntry) -> dict:
    return {
        "utterance": _utterance_to_dict(entry.utterance),
        "embedding": _vec(entry.embedding),
        "is_context": entry.is_context,
    }


def _entry_from_dict(d: dict) -> BufferEntry:
    return BufferEntry(
        utterance=_utterance_from_dict(d["utterance"]),
        embedding=np.asarray(d["embedding"], dtype=np.float64),
        is_context=d["is_context"],
    )


def _block_to_dict(block: SemanticBlock) -> dict:
    return {
        "utterances": [_utterance_to_dict(u) for u in block.utterances],
        "span": list(block.span),
        "block_embedding": _vec(block.block_embedding),
    }


def _block_from_dict(d: dict) -> SemanticBlock:
    return SemanticBlock(
        utterances=tuple(_utterance_from_dict(u) for u in d["utterances"]),
        span=tuple(d["span"]),
        block_embedding=np.asarray(d["block_embedding"], dtype=np.float64),
    )


def _pending_to_dict(p: PendingNodes) -> dict:
    return {
        "event_label": p.event_label,
        "scene_label": p.scene_label,
        "event_embedding": _vec(p.event_embedding),
        "scene_embedding": _vec(p.scene_embedding),
        "block_span": list(p.block_span),
        "admitted": p.admitted,
        "amu_candidates": [
            {
                "surface": c.surface,
                "embedding": _vec(c.embedding),
                "relations": [[rel, peer] for rel, peer in c.relations],
            }
            for c in p.amu_candidates
        ],
    }


def _pending_from_dict(d: dict) -> PendingNodes:
    return PendingNodes(
        event_label=d["event_label"],
        scene_label=d["scene_label"],
        event_embedding=np.asarray(d["event_embedding"], dtype=np.float64),
        scene_embedding=np.asarray(d["scene_embedding"], dtype=np.float64),
        block_span=tuple(d["block_span"]),
        admitted=d["admitted"],
        amu_candidates=[
            AmuCandidate(
                surface=c["surface"],
                embedding=np.asarray(c["embedding"], dtype=np.float64),
                relations=[(rel, peer) for rel, peer in c["relations"]],
            )
            for c in d["amu_candidates"]
        ],
    )
