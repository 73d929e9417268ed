"""Reading and writing JSONL stream files.

Each line is one event:

* ``{"type": "utterance", "turn": n, "speaker": s, "text": t}``
* ``{"type": "probe", "turn": n, "question": q, "answer": y,
     "keywords": [...], "evidence_turns": [...]}``

Loading validates structure eagerly with 1-based line numbers: turns must
strictly increase, and every probe's evidence turns must precede the probe
(the no-look-ahead audit).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .errors import StreamFormatError
from .types import Probe, StreamEvent, Utterance


def event_to_dict(event: StreamEvent) -> dict:
    if isinstance(event, Utterance):
        return {
            "type": "utterance",
            "turn": event.turn,
            "speaker": event.speaker,
            "text": event.text,
        }
    return {
        "type": "probe",
        "turn": event.turn,
        "question": event.question,
        "answer": event.gold_answer,
        "keywords": list(event.keywords),
        "evidence_turns": list(event.evidence_turns),
    }


def event_from_dict(data: dict, line_number: int | None = None) -> StreamEvent:
    def fail(message: str):
        raise StreamFormatError(message, line_number)

    if not isinstance(data, dict):
        fail("event must be a JSON object")
    kind = data.get("type")
    try:
        if kind == "utterance":
            return Utterance(
                turn=_require_int(data, "turn", fail),
                speaker=_require_str(data, "speaker", fail),
                text=_require_str(data, "text", fail),
            )
        if kind == "probe":
            evidence = data.get("evidence_turns") or []
            keywords = data.get("keywords") or []
            if not isinstance(evidence, list) or not all(
                isinstance(t, int) for t in evidence
            ):
                fail("'evidence_turns' must be a list of integers")
            if not isinstance(keywords, list) or not all(
                isinstance(k, str) for k in keywords
            ):
                fail("'keywords' must be a list of strings")
            return Probe(
                turn=_require_int(data, "turn", fail),
                question=_require_str(data, "question", fail),
                gold_answer=data.get("answer"),
                evidence_turns=tuple(evidence),
                keywords=tuple(keywords),
            )
    except ValueError as exc:  # domain-type invariant (e.g. no-look-ahead)
        fail(str(exc))
    fail(f"unknown event type {kind!r}")


def _require_int(data: dict, key: str, fail) -> int:
    value = data.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        fail(f"'{key}' must be an integer")
    return value


def _require_str(data: dict, key: str, fail) -> str:
    value = data.get(key)
    if not isinstance(value, str):
        fail(f"'{key}' must be a string")
    return value


def parse_stream(lines: Iterable[str]) -> list[StreamEvent]:
    """Parse and validate JSONL lines into an ordered event list."""
    events: list[StreamEvent] = []
    last_turn = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(f"invalid JSON: {exc.msg}", line_number) from None
        event = event_from_dict(data, line_number)
        if event.turn <= last_turn:
            raise StreamFormatError(
                f"turn {event.turn} does not increase past {last_turn}", line_number
            )
        last_turn = event.turn
        events.append(event)
    return events


def load_stream(path: str | Path) -> list[StreamEvent]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_stream(handle)


def dump_stream(events: Iterable[StreamEvent]) -> str:
    return "".join(
        json.dumps(event_to_dict(e), sort_keys=True, separators=(",", ":")) + "\n"
        for e in events
    )


def write_stream(events: Iterable[StreamEvent], path: str | Path) -> None:
    Path(path).write_text(dump_stream(events), encoding="utf-8")
