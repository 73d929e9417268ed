"""Stream-level domain types plus small text and vector helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def token_cost(text: str) -> int:
    """Whitespace token count of ``text``, floored at 1.

    Deterministic and tokenizer-independent; consecutive delimiters collapse.
    """
    return max(1, len(text.split()))


def normalize(values) -> np.ndarray:
    """Return ``values`` as a unit-norm float64 vector."""
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return vec / norm


def is_unit(vec: np.ndarray, tol: float = 1e-6) -> bool:
    return abs(float(np.linalg.norm(vec)) - 1.0) <= tol


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class Utterance:
    """One timestamped speaker turn from the input stream."""

    turn: int
    speaker: str
    text: str
    wall_time: float | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"utterance text empty at turn {self.turn}")

    @property
    def composite(self) -> str:
        """Speaker-tagged textual unit used for embedding and block text."""
        return f"{self.speaker}: {self.text}"


@dataclass(frozen=True)
class Probe:
    """An ad-hoc question injected into the stream at a given turn."""

    turn: int
    question: str
    gold_answer: str | None = None
    evidence_turns: tuple[int, ...] = ()
    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError(f"probe question empty at turn {self.turn}")
        bad = [t for t in self.evidence_turns if t >= self.turn]
        if bad:
            raise ValueError(
                f"probe at turn {self.turn} references evidence turns {bad} "
                "that do not precede it"
            )


StreamEvent = Utterance | Probe


@dataclass
class Stats:
    """Deterministic per-engine counters (no timing data)."""

    utterances: int = 0
    probes: int = 0
    blocks: int = 0
    admitted: int = 0
    pruned: int = 0
    merged: int = 0
    cascaded: int = 0
    dropped_blocks: int = 0
    max_examined: int = 0

    def to_dict(self) -> dict:
        return {
            "utterances": self.utterances,
            "probes": self.probes,
            "blocks": self.blocks,
            "admitted": self.admitted,
            "pruned": self.pruned,
            "merged": self.merged,
            "cascaded": self.cascaded,
            "dropped_blocks": self.dropped_blocks,
            "max_examined": self.max_examined,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Stats":
        return cls(**data)
