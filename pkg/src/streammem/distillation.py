"""Turn a semantic block into mountable structure: event, scene, AMU candidates.

Distillation is pure with respect to the hierarchy; mounting (and the
novelty gate that guards it) is the optimizer's job. With stub plugins the
whole pass is a deterministic function of the block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .hierarchy import Hierarchy, Level
from .errors import PreconditionError
from .perception import SemanticBlock
from .plugins import Plugins, Triplet, first_tokens, keyword_scene

logger = logging.getLogger(__name__)


@dataclass
class AmuCandidate:
    """An entity surface form proposed as an atomic memory unit."""

    surface: str
    embedding: np.ndarray
    # (relation, peer surface form); resolved to node ids when mounted.
    relations: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class PendingNodes:
    """A distilled block waiting for admission into the hierarchy.

    Label embeddings are computed here, at distillation time, so that
    admission is plugin-free and cannot fail halfway through a mount.
    """

    event_label: str
    scene_label: str
    amu_candidates: list[AmuCandidate]
    block_span: tuple[int, int]
    event_embedding: np.ndarray = None
    scene_embedding: np.ndarray = None
    admitted: bool = False

    def __post_init__(self):
        if not self.event_label or not self.scene_label:
            raise ValueError("pending nodes need non-empty event and scene labels")


def summarize_event(block: SemanticBlock, generator) -> str:
    """One-phrase event summary; falls back to the stub rule on empty output."""
    prompt = prompts.render_event_prompt(block.speakers, block.text)
    summary = generator.generate(prompt).strip()
    if not summary:
        summary = first_tokens(block.text)
        logger.warning(
            "generator returned empty event summary for span %s; using fallback",
            block.span,
        )
    return summary


def classify_scene(event_label: str, generator) -> str:
    """Broader scene category for an event summary."""
    if not event_label.strip():
        raise PreconditionError("event label must be non-empty")
    prompt = prompts.render_scene_prompt(event_label)
    label = generator.generate(prompt).strip()
    if not label:
        label = keyword_scene(event_label, {})
        logger.warning("generator returned empty scene label; using fallback %r", label)
    return label


def extract_triplets(block: SemanticBlock, extractor) -> list[Triplet]:
    return extractor.extract(list(block.utterances))


def novelty_check(candidate_embedding: np.ndarray, h: Hierarchy, theta_concept: float) -> bool:
    """True iff the candidate is strictly less similar than the concept
    threshold to every existing AMU (vacuously true when none exist)."""
    ids, matrix = h.embedding_matrix(Level.AMU)
    h.note_examined(len(ids))
    if not ids:
        return True
    return float(np.max(matrix @ candidate_embedding)) < theta_concept


def nearest_amu(candidate_embedding: np.ndarray, h: Hierarchy) -> int | None:
    """Id of the most similar existing AMU, smaller id winning ties."""
    ids, matrix = h.embedding_matrix(Level.AMU)
    h.note_examined(len(ids))
    if not ids:
        return None
    sims = matrix @ candidate_embedding
    best = int(np.argmax(sims))  # argmax takes the first = smallest id on ties
    return ids[best]


def distill(block: SemanticBlock, plugins: Plugins) -> PendingNodes:
    """Compose summary, scene, and triplet extraction into pending structure.

    Subject and object of every triplet become AMU candidates, deduplicated
    by surface form within the block; the relation is recorded on both
    sides, directed subject -> object.
    """
    event_label = summarize_event(block, plugins.generator)
    scene_label = classify_scene(event_label, plugins.generator)
    triplets = extract_triplets(block, plugins.extractor)

    by_surface: dict[str, AmuCandidate] = {}

    def candidate(surface: str) -> AmuCandidate:
        cand = by_surface.get(surface)
        if cand is None:
            cand = AmuCandidate(surface, plugins.embedder.embed(surface))
            by_surface[surface] = cand
        return cand

    for triplet in triplets:
        subject = candidate(triplet.subject)
        if triplet.object == triplet.subject:
            continue
        obj = candidate(triplet.object)
        sub_rel = (triplet.relation, triplet.object)
        obj_rel = (triplet.relation, triplet.subject)
        if sub_rel not in subject.relations:
            subject.relations.append(sub_rel)
        if obj_rel not in obj.relations:
            obj.relations.append(obj_rel)

    return PendingNodes(
        event_label=event_label,
        scene_label=scene_label,
        amu_candidates=list(by_surface.values()),
        block_span=block.span,
        event_embedding=plugins.embedder.embed(event_label),
        scene_embedding=plugins.embedder.embed(scene_label),
    )
