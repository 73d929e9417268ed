"""Model-boundary plugins: embedder, generator, triplet extractor, transcriber.

Every boundary has a deterministic stub so full engine runs are
bit-reproducible, plus a remote client speaking a minimal JSON-over-HTTP
protocol:

* embed:       POST {"texts": [...]}            -> {"vectors": [[...], ...]}
* generate:    POST {"model": ..., "prompt": ..} -> {"text": ...}
* transcribe:  POST raw audio bytes              -> {"text": ...}

Remote clients retry per config and raise :class:`PluginError` after the
last attempt. Each client accumulates wall time spent in HTTP calls in
``io_seconds`` so the harness can report engine-only latency.
"""

from __future__ import annotations

import logging
import string
import time
import zlib
from dataclasses import dataclass, field

import numpy as np
import requests

from . import prompts
from .config import EngineConfig, PluginSettings
from .errors import ConfigError, PluginError
from .types import Utterance, normalize

logger = logging.getLogger(__name__)

# Tokens that never stand alone as an entity when they open an utterance.
SENTENCE_STOPWORDS = frozenset(
    """a an and at but did do he how i if in it my no not of oh on or she so
    that the they this to we well what when where who why yes you your""".split()
)


@dataclass(frozen=True)
class Triplet:
    """A (subject, relation, object) fact anchored to its source turn."""

    subject: str
    relation: str
    object: str
    source_turn: int

    def __post_init__(self):
        if not (self.subject.strip() and self.relation.strip() and self.object.strip()):
            raise ValueError("triplet fields must be non-empty")


# ---------------------------------------------------------------------------
# Embedders
# ---------------------------------------------------------------------------


class StubEmbedder:
    """Hashed character-trigram bag embedder.

    Lexically similar texts land on overlapping buckets, so cosine
    similarity behaves like a crude semantic signal; identical text always
    maps to the identical vector. Text is trimmed, whitespace-collapsed,
    and lowercased before hashing.
    """

    def __init__(self, dimension: int = 384):
        if dimension < 1:
            raise ConfigError("embedder dimension must be >= 1")
        self.dimension = dimension
        self.io_seconds = 0.0
        self._memo: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        key = " ".join(text.split()).lower()
        vec = self._memo.get(key)
        if vec is None:
            vec = self._compute(key)
            self._memo[key] = vec
        return vec

    def _compute(self, key: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for word in key.split():
            padded = f"^{word}$"
            for i in range(len(padded) - 2):
                bucket = zlib.crc32(padded[i : i + 3].encode("utf-8")) % self.dimension
                vec[bucket] += 1.0
        if not vec.any():
            vec[0] = 1.0
        return vec / float(np.linalg.norm(vec))


class RemoteEmbedder:
    """HTTP client for an embedding service; responses are re-normalized."""

    def __init__(
        self,
        endpoint: str,
        dimension: int,
        timeout: float = 10.0,
        retry: int = 2,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.dimension = dimension
        self.timeout = timeout
        self.retry = retry
        self.io_seconds = 0.0
        self._session = session or requests.Session()

    def embed(self, text: str) -> np.ndarray:
        payload = self.build_request(text)
        data = _post_json(self, self.endpoint, payload)
        return self.parse_response(data)

    def build_request(self, text: str) -> dict:
        return {"texts": [text]}

    def parse_response(self, data: dict) -> np.ndarray:
        try:
            values = data["vectors"][0]
        except (KeyError, IndexError, TypeError):
            raise PluginError(f"malformed embed response: {data!r}") from None
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise PluginError(
                f"embed service returned dimension {vec.shape}, expected {self.dimension}"
            )
        return normalize(vec)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def first_tokens(text: str, n: int = 8) -> str:
    """The first ``n`` whitespace tokens of ``text``, rejoined with spaces."""
    return " ".join(text.split()[:n])


def keyword_scene(event_summary: str, table: dict[str, str]) -> str:
    """First keyword-table hit (case-insensitive substring), else General Chat."""
    lowered = event_summary.lower()
    for keyword, label in table.items():
        if keyword.lower() in lowered:
            return label
    return "General Chat"


class StubGenerator:
    """Routes a rendered prompt to the deterministic rule for its template."""

    def __init__(self, scene_keywords: dict[str, str] | None = None):
        self.scene_keywords = dict(scene_keywords or {})
        self.io_seconds = 0.0

    def generate(self, prompt: str) -> str:
        if prompt.startswith(prompts.EVENT_PROMPT_HEADER):
            block_text = prompts.extract_tail_after(prompt, "Event phrase: ")
            return first_tokens(block_text)
        if prompt.startswith(prompts.SCENE_PROMPT_HEADER):
            summary = prompts.extract_line_after(prompt, "Event: ")
            return keyword_scene(summary, self.scene_keywords)
        if prompt.startswith(prompts.QA_PROMPT_HEADER):
            return self._answer(prompt)
        raise PluginError("stub generator received an unrecognized prompt template")

    def _answer(self, prompt: str) -> str:
        long_term = prompts.extract_line_after(prompt, prompts.LONG_TERM_MARKER)
        marker = "amu(s)): - "
        idx = long_term.find(marker)
        if idx >= 0:
            rest = long_term[idx + len(marker):]
            cut = len(rest)
            for stop in (" - ", " **"):
                pos = rest.find(stop)
                if pos >= 0:
                    cut = min(cut, pos)
            label = rest[:cut].strip()
            if label:
                return label
        short_term = prompts.extract_line_after(prompt, prompts.SHORT_TERM_MARKER)
        if short_term.strip():
            last = short_term.split(" | ")[-1]
            _, sep, text = last.partition(": ")
            return text if sep else last
        return "unknown"


class EchoGenerator:
    """Diagnostic generator returning the rendered prompt verbatim."""

    def __init__(self):
        self.io_seconds = 0.0

    def generate(self, prompt: str) -> str:
        return prompt


class RemoteGenerator:
    """HTTP client for a text-generation service."""

    def __init__(
        self,
        endpoint: str,
        model_name: str = "default",
        timeout: float = 10.0,
        retry: int = 2,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model_name = model_name
        self.timeout = timeout
        self.retry = retry
        self.io_seconds = 0.0
        self._session = session or requests.Session()

    def generate(self, prompt: str) -> str:
        if not prompt:
            raise PluginError("empty prompt")
        data = _post_json(self, self.endpoint, self.build_request(prompt))
        return self.parse_response(data)

    def build_request(self, prompt: str) -> dict:
        return {"model": self.model_name, "prompt": prompt}

    def parse_response(self, data: dict) -> str:
        try:
            return str(data["text"])
        except (KeyError, TypeError):
            raise PluginError(f"malformed generate response: {data!r}") from None


# ---------------------------------------------------------------------------
# Triplet extractor
# ---------------------------------------------------------------------------


class StubTripletExtractor:
    """Emits (speaker, "mentions", phrase) per maximal capitalized phrase.

    A run of consecutive capitalized tokens forms one phrase; a run that is
    a single utterance-initial stopword ("The", "I", ...) is skipped. The
    rule is versioned: tests freeze its outputs.
    """

    relation = "mentions"

    def __init__(self):
        self.io_seconds = 0.0

    def extract(self, utterances: list[Utterance]) -> list[Triplet]:
        found: list[Triplet] = []
        for utt in utterances:
            for start, phrase in self._capitalized_runs(utt.text):
                if (
                    start == 0
                    and " " not in phrase
                    and phrase.lower() in SENTENCE_STOPWORDS
                ):
                    continue
                found.append(Triplet(utt.speaker, self.relation, phrase, utt.turn))
        return found

    @staticmethod
    def _capitalized_runs(text: str) -> list[tuple[int, str]]:
        runs: list[tuple[int, str]] = []
        current: list[str] = []
        current_start = 0
        for i, token in enumerate(text.split()):
            stripped = token.strip(string.punctuation)
            if stripped and stripped[0].isalpha() and stripped[0].isupper():
                if not current:
                    current_start = i
                current.append(stripped)
            elif current:
                runs.append((current_start, " ".join(current)))
                current = []
        if current:
            runs.append((current_start, " ".join(current)))
        return runs


# ---------------------------------------------------------------------------
# Transcribers
# ---------------------------------------------------------------------------


class PassthroughTranscriber:
    """Input is already text; returned unchanged (unicode preserved)."""

    def __init__(self):
        self.io_seconds = 0.0

    def transcribe(self, payload: str) -> str:
        return payload


class RemoteTranscriber:
    """HTTP client posting raw audio bytes to an ASR service."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retry: int = 2,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retry = retry
        self.io_seconds = 0.0
        self._session = session or requests.Session()

    def transcribe(self, payload: bytes | str) -> str:
        body = payload.encode("utf-8") if isinstance(payload, str) else payload
        started = time.perf_counter()
        last_error: Exception | None = None
        try:
            for _ in range(self.retry + 1):
                try:
                    response = self._session.post(
                        self.endpoint,
                        data=body,
                        timeout=self.timeout,
                        headers={"Content-Type": "application/octet-stream"},
                    )
                    response.raise_for_status()
                    return str(response.json()["text"])
                except (requests.RequestException, KeyError, ValueError) as exc:
                    last_error = exc
        finally:
            self.io_seconds += time.perf_counter() - started
        raise PluginError(f"transcribe failed after {self.retry + 1} attempts: {last_error}")


# ---------------------------------------------------------------------------
# Transport + assembly
# ---------------------------------------------------------------------------


def _post_json(client, endpoint: str, payload: dict) -> dict:
    started = time.perf_counter()
    last_error: Exception | None = None
    try:
        for _ in range(client.retry + 1):
            try:
                response = client._session.post(endpoint, json=payload, timeout=client.timeout)
                response.raise_for_status()
                return response.json()
            except requests.RequestException as exc:
                last_error = exc
    finally:
        client.io_seconds += time.perf_counter() - started
    raise PluginError(f"request to {endpoint} failed after {client.retry + 1} attempts: {last_error}")


@dataclass
class Plugins:
    """The four model boundaries an engine instance calls into."""

    embedder: object
    generator: object
    extractor: object
    transcriber: object
    registered: dict = field(default_factory=dict)

    def io_total(self) -> float:
        return sum(
            getattr(p, "io_seconds", 0.0)
            for p in (self.embedder, self.generator, self.extractor, self.transcriber)
        )


def build_plugins(config: EngineConfig) -> Plugins:
    """Instantiate plugins from config; enforces dimension uniformity."""
    settings: PluginSettings = config.plugins
    if settings.embedder_kind == "stub":
        embedder = StubEmbedder(config.dimension)
    else:
        embedder = RemoteEmbedder(
            settings.embedder_endpoint,
            dimension=config.dimension,
            timeout=settings.timeout,
            retry=settings.retry,
        )
    if embedder.dimension != config.dimension:
        raise ConfigError(
            f"embedder dimension {embedder.dimension} != engine dimension {config.dimension}"
        )
    if settings.generator_kind == "stub":
        generator = StubGenerator(settings.scene_keywords)
    else:
        generator = RemoteGenerator(
            settings.generator_endpoint,
            model_name=settings.model_name,
            timeout=settings.timeout,
            retry=settings.retry,
        )
    if settings.transcriber_kind == "passthrough":
        transcriber = PassthroughTranscriber()
    else:
        transcriber = RemoteTranscriber(
            settings.transcriber_endpoint,
            timeout=settings.timeout,
            retry=settings.retry,
        )
    return Plugins(
        embedder=embedder,
        generator=generator,
        extractor=StubTripletExtractor(),
        transcriber=transcriber,
    )
