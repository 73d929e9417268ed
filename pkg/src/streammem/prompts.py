"""Prompt template loading, rendering, and section parsing.

Templates ship as text assets next to this module. Rendering uses plain
string replacement (never ``str.format``) so braces inside dialogue text
cannot break a prompt. The section markers defined here are also what the
stub generator keys on to route a prompt to the right deterministic rule.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

EVENT_PROMPT_HEADER = "Summarize this conversation in one short phrase"
SCENE_PROMPT_HEADER = "Abstract this specific event into a broader"
QA_PROMPT_HEADER = "Please carefully think about the following question"

SHORT_TERM_MARKER = "## Short-term Memory: "
PENDING_MARKER = "## Pending Memory Buffer: "
LONG_TERM_MARKER = "## Long-term Memory: "
QUESTION_MARKER = "Question: "


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    text = resources.files("streammem").joinpath("templates", name).read_text("utf-8")
    return text.rstrip("\n")


def render_event_prompt(speakers: list[str], block_text: str) -> str:
    template = _template("event_summary.txt")
    return template.replace("{speaker_list}", ", ".join(speakers)).replace(
        "{text}", block_text
    )


def render_scene_prompt(event_summary: str) -> str:
    return _template("scene_category.txt").replace("{event_summary}", event_summary)


def render_qa_prompt(short_term: str, pending: str, long_term: str, question: str) -> str:
    template = _template("qa.txt")
    return (
        template.replace("{short_term_content}", short_term)
        .replace("{pending_buffer_content}", pending)
        .replace("{long_term_content}", long_term)
        .replace("{question_text}", question)
    )


def extract_line_after(prompt: str, marker: str) -> str:
    """Content of the first line starting with ``marker`` (to end of line)."""
    for line in prompt.splitlines():
        if line.startswith(marker):
            return line[len(marker):]
    return ""


def extract_tail_after(prompt: str, marker: str) -> str:
    """Everything after the first occurrence of ``marker``."""
    idx = prompt.find(marker)
    if idx < 0:
        return ""
    return prompt[idx + len(marker):]
