"""Top-down retrieval over the hierarchy and probe-time context assembly.

Search narrows scene -> event -> AMU by query cosine, applies the minimum
similarity filter at the atomic level, and ranks surviving AMUs by the
composite score cosine * utility. Returned nodes are touched: retrieval
counts as access and feeds the frequency prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prompts
from .config import UtilityParams
from .distillation import PendingNodes
from .errors import PreconditionError
from .hierarchy import Hierarchy, Level, MemoryNode
from .optimizer import utility
from .perception import BufferEntry
from .types import Probe, cosine


@dataclass(frozen=True)
class EvidencePath:
    """One scene > event > AMU chain returned by search."""

    scene_id: int
    event_id: int
    amu_id: int
    scene_label: str
    event_label: str
    amu_label: str
    relations: tuple[tuple[str, int], ...]
    score: float


@dataclass
class ContextBundle:
    """The unified probe-time context: buffer, pending queue, tree paths."""

    short_term: list[BufferEntry]
    pending: list[PendingNodes]
    paths: list[EvidencePath]

    def render_short_term(self) -> str:
        return " | ".join(e.utterance.composite for e in self.short_term)

    def render_pending(self) -> str:
        parts = []
        for p in self.pending:
            head = f"{p.scene_label} > {p.event_label}"
            if p.amu_candidates:
                head += ": " + ", ".join(c.surface for c in p.amu_candidates)
            parts.append(head)
        return " | ".join(parts)

    def render_long_term(self) -> str:
        groups: dict[tuple[int, int], list[EvidencePath]] = {}
        for path in self.paths:
            groups.setdefault((path.scene_id, path.event_id), []).append(path)
        rendered = []
        for paths in groups.values():
            first = paths[0]
            bullets = " ".join(f"- {p.amu_label}" for p in paths)
            rendered.append(
                f"**{first.scene_label} > {first.event_label}** "
                f"({len(paths)} amu(s)): {bullets}"
            )
        return " ".join(rendered)

    def combined_text(self) -> str:
        """All three sections in one string, for evidence-presence checks."""
        return "\n".join(
            (self.render_short_term(), self.render_pending(), self.render_long_term())
        )


def score(query_emb: np.ndarray, amu: MemoryNode, now: int, p: UtilityParams) -> float:
    """Composite relevance of an AMU for a query: cosine times utility."""
    return cosine(query_emb, amu.embedding) * utility(amu, now, p)


def search(
    h: Hierarchy,
    query: str,
    embedder,
    now: int,
    p: UtilityParams,
    k_scene: int = 5,
    k_event: int = 10,
    k_amu: int = 3,
    min_sim: float = 0.5,
    per_event_k: bool = False,
    touch: bool = True,
) -> list[EvidencePath]:
    """Top-down search; returns up to ``k_amu`` evidence paths, best first.

    Scenes and events are ranked by raw query cosine (negative values rank
    low but are not excluded); only AMUs face the hard ``min_sim`` filter.
    With ``per_event_k`` the AMU quota applies per surviving event instead
    of globally. ``touch=False`` gives a read-only search for offline use.
    """
    if min(k_scene, k_event, k_amu) < 1:
        raise PreconditionError("k_scene, k_event and k_amu must all be >= 1")
    scene_ids, scene_matrix = h.embedding_matrix(Level.SCENE)
    h.note_examined(len(scene_ids))
    if not scene_ids:
        return []
    query_emb = embedder.embed(query)

    scene_sims = scene_matrix @ query_emb
    scene_rank = sorted(
        zip(scene_ids, scene_sims), key=lambda pair: (-pair[1], pair[0])
    )[:k_scene]

    surviving_events: list[int] = []
    for scene_id, _ in scene_rank:
        event_ids = sorted(h.nodes[scene_id].children)
        h.note_examined(len(event_ids))
        if not event_ids:
            continue
        sims = np.stack([h.nodes[e].embedding for e in event_ids]) @ query_emb
        ranked = sorted(zip(event_ids, sims), key=lambda pair: (-pair[1], pair[0]))
        surviving_events.extend(eid for eid, _ in ranked[:k_event])

    scored: list[tuple[float, int, int]] = []  # (score, amu_id, event_id)
    per_event: dict[int, list[tuple[float, int, int]]] = {}
    for event_id in surviving_events:
        amu_ids = sorted(h.nodes[event_id].children)
        h.note_examined(len(amu_ids))
        bucket = per_event.setdefault(event_id, [])
        for amu_id in amu_ids:
            node = h.nodes[amu_id]
            sim = float(node.embedding @ query_emb)
            if sim < min_sim:
                continue
            s = sim * utility(node, now, p)
            entry = (s, amu_id, event_id)
            scored.append(entry)
            bucket.append(entry)

    if per_event_k:
        chosen: list[tuple[float, int, int]] = []
        for event_id in surviving_events:
            ranked = sorted(per_event[event_id], key=lambda e: (-e[0], e[1]))
            chosen.extend(ranked[:k_amu])
        chosen.sort(key=lambda e: (-e[0], e[1]))
    else:
        chosen = sorted(scored, key=lambda e: (-e[0], e[1]))[:k_amu]

    paths = []
    touched: set[int] = set()
    for s, amu_id, event_id in chosen:
        event = h.nodes[event_id]
        scene = h.nodes[event.parent]
        amu = h.nodes[amu_id]
        paths.append(
            EvidencePath(
                scene_id=scene.id,
                event_id=event.id,
                amu_id=amu_id,
                scene_label=scene.label,
                event_label=event.label,
                amu_label=amu.label,
                relations=tuple(amu.relations),
                score=s,
            )
        )
        if touch:
            for nid in (scene.id, event.id, amu_id):
                if nid not in touched:
                    h.touch(nid, now)
                    touched.add(nid)
    return paths


def assemble_context(
    buffer_entries: list[BufferEntry],
    pending_queue: list[PendingNodes],
    paths: list[EvidencePath],
) -> ContextBundle:
    """Bundle the three context sources; rendering is byte-stable."""
    return ContextBundle(
        short_term=list(buffer_entries),
        pending=list(pending_queue),
        paths=list(paths),
    )


def render_prompt(bundle: ContextBundle, question: str) -> str:
    return prompts.render_qa_prompt(
        bundle.render_short_term(),
        bundle.render_pending(),
        bundle.render_long_term(),
        question,
    )


def answer(probe: Probe, bundle: ContextBundle, generator) -> str:
    """Delegate the probe to the generator under the QA prompt."""
    if not probe.question.strip():
        raise PreconditionError("probe question must be non-empty")
    return generator.generate(render_prompt(bundle, probe.question))
