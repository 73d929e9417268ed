"""Short-term sensing buffer: accumulate utterances, cut at semantic drift.

The buffer holds at most ``capacity`` content utterances. A new utterance
whose embedding is dissimilar to the previous one (cosine below the drift
threshold) flushes the current contents as a block and opens the next
topic with itself. On every flush a trailing slice of entries, capped by a
token budget, is carried over as *context*: those copies steer the next
boundary decision and appear in probe-time short-term memory, but are
never re-emitted in a later block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError
from .types import Utterance, cosine, normalize, token_cost


@dataclass(frozen=True)
class BufferEntry:
    utterance: Utterance
    embedding: np.ndarray
    is_context: bool = False


@dataclass(frozen=True)
class SemanticBlock:
    """A topically coherent run of utterances flushed from the buffer."""

    utterances: tuple[Utterance, ...]
    span: tuple[int, int]
    block_embedding: np.ndarray

    def __post_init__(self):
        if not self.utterances:
            raise ValueError("semantic block must contain at least one utterance")

    @property
    def text(self) -> str:
        return " ".join(u.composite for u in self.utterances)

    @property
    def speakers(self) -> list[str]:
        seen: list[str] = []
        for u in self.utterances:
            if u.speaker not in seen:
                seen.append(u.speaker)
        return seen


def drift(v_t: np.ndarray | None, v_prev: np.ndarray | None) -> float:
    """Cosine continuity between consecutive units; 1.0 when no previous."""
    if v_prev is None:
        return 1.0
    if v_t is None:
        raise ConfigError("drift requires the current embedding")
    return cosine(v_t, v_prev)


def _make_block(entries: list[BufferEntry]) -> SemanticBlock:
    mean = np.mean([e.embedding for e in entries], axis=0)
    try:
        block_embedding = normalize(mean)
    except ValueError:
        block_embedding = entries[-1].embedding
    return SemanticBlock(
        utterances=tuple(e.utterance for e in entries),
        span=(entries[0].utterance.turn, entries[-1].utterance.turn),
        block_embedding=block_embedding,
    )


class SensingBuffer:
    """Bounded utterance accumulator with drift-triggered flushing."""

    def __init__(self, capacity: int = 5, leading_window_tokens: int = 10,
                 tau_drift: float = 0.7):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self.leading_window_tokens = leading_window_tokens
        self.tau_drift = tau_drift
        self.entries: list[BufferEntry] = []       # content, <= capacity
        self.context: list[BufferEntry] = []       # retained leading window
        self.prev_embedding: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def all_entries(self) -> list[BufferEntry]:
        return self.context + self.entries

    def last_turn(self) -> int | None:
        entries = self.all_entries()
        return entries[-1].utterance.turn if entries else None

    def ingest(self, utterance: Utterance, embedder) -> SemanticBlock | None:
        """Add one utterance; returns a flushed block when a boundary fires.

        The boundary-triggering utterance opens the new block rather than
        closing the old one: low similarity to the previous unit means it
        belongs to the topic ahead.
        """
        last = self.last_turn()
        if last is not None and utterance.turn <= last:
            raise PreconditionError(
                f"utterance turn {utterance.turn} not beyond buffered turn {last}"
            )
        embedding = embedder.embed(utterance.composite)
        psi = drift(embedding, self.prev_embedding)
        entry = BufferEntry(utterance, embedding)

        if psi < self.tau_drift and self.entries:
            block = self._flush(seed=entry)
            self.prev_embedding = embedding
            return block

        self.entries.append(entry)
        self.prev_embedding = embedding
        if len(self.entries) >= self.capacity:
            return self._flush(seed=None)
        return None

    def force_flush(self) -> SemanticBlock | None:
        """Flush whatever content is buffered; None when empty."""
        if not self.entries:
            return None
        return self._flush(seed=None)

    def _flush(self, seed: BufferEntry | None) -> SemanticBlock:
        block = _make_block(self.entries)
        self.context = self._retain(self.entries)
        self.entries = [seed] if seed is not None else []
        return block

    def _retain(self, flushed: list[BufferEntry]) -> list[BufferEntry]:
        retained: list[BufferEntry] = []
        budget = self.leading_window_tokens
        for entry in reversed(flushed):
            cost = token_cost(entry.utterance.text)
            if cost > budget:
                break
            budget -= cost
            retained.append(
                BufferEntry(entry.utterance, entry.embedding, is_context=True)
            )
        retained.reverse()
        return retained
