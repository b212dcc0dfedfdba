"""Structure raw model output: statements, inline ``[n]`` markers, polar answer."""
from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


class PolarAnswer(str, enum.Enum):
    YES = "yes"
    NO = "no"
    MAYBE = "maybe"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value: str) -> "PolarAnswer":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"not a polar answer: {value!r}") from None


# ---------------------------------------------------------------- markers

# one or more [n] groups, optionally spaced, with the whitespace before them
_MARKER_GROUP = re.compile(r"[ \t]*(?:\[\d+\][ \t]?)*\[\d+\]")
_MARKER = re.compile(r"\[(\d+)\]")


@dataclass
class ParsedCitations:
    clean_text: str
    markers: list[int]
    # (offset in clean_text, removed literal) for each marker group
    spans: list[tuple[int, str]] = field(default_factory=list)
    dropped: int = 0


def parse_inline_citations(text: str, shortlist_size: int | None) -> ParsedCitations:
    """Strip ``[n]`` markers from ``text``.

    Indices outside ``1..shortlist_size`` are removed from the text but not
    returned; they are counted in ``dropped``. ``shortlist_size=None`` keeps
    every positive index.
    """
    if shortlist_size is not None and shortlist_size < 0:
        raise ValueError("shortlist_size must be >= 0")
    out: list[str] = []
    spans: list[tuple[int, str]] = []
    markers: list[int] = []
    dropped = 0
    clean_len = 0
    last = 0
    for m in _MARKER_GROUP.finditer(text):
        chunk = text[last:m.start()]
        out.append(chunk)
        clean_len += len(chunk)
        spans.append((clean_len, m.group()))
        for num in _MARKER.findall(m.group()):
            idx = int(num)
            if idx >= 1 and (shortlist_size is None or idx <= shortlist_size):
                markers.append(idx)
            else:
                dropped += 1
        last = m.end()
    out.append(text[last:])
    clean = "".join(out)
    if dropped:
        logger.warning("dropped %d out-of-range citation marker(s)", dropped)
    if "[" in clean or "]" in clean:
        logger.debug("unparsed bracket text left in answer: %r", clean[:80])
    return ParsedCitations(clean, markers, spans, dropped)


def reinsert_markers(clean_text: str, spans: list[tuple[int, str]]) -> str:
    """Inverse of :func:`parse_inline_citations`."""
    parts = []
    last = 0
    for pos, literal in spans:
        parts.append(clean_text[last:pos])
        parts.append(literal)
        last = pos
    parts.append(clean_text[last:])
    return "".join(parts)


# ----------------------------------------------------------- segmentation

ABBREVIATIONS = frozenset({
    "e.g", "i.e", "al", "dr", "fig", "figs", "vs", "approx", "cf", "mr", "mrs", "ms",
    "prof", "st", "jr", "vol", "pp", "ca", "resp", "eq", "ref", "refs", "incl", "min",
    "max", "sec", "mg", "ml", "kg", "no",
})
# "no" is only an abbreviation before a digit ("No. 5"), see _is_abbreviation

_TERMINATOR = re.compile(r"[.!?]+")
_CLOSERS = re.compile(r"[\"')”’]*")
_TRAILING_MARKERS = re.compile(r"(?:\s*\[\d+\])+")
_PARAGRAPH = re.compile(r"\n[ \t]*\n\s*")


def _is_abbreviation(text: str, dot: int, after: str) -> bool:
    start = dot
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start:dot].lstrip("([{\"'").lower()
    if token == "no":
        return after[:1].isdigit()
    return token in ABBREVIATIONS


@dataclass
class Statement:
    index: int
    text: str
    raw_text: str
    start: int
    end: int
    markers: list[int] = field(default_factory=list)
    dropped_markers: int = 0


def _boundaries(text: str) -> list[int]:
    cuts: list[int] = []
    for m in _TERMINATOR.finditer(text):
        pos = _CLOSERS.match(text, m.end()).end()
        tm = _TRAILING_MARKERS.match(text, pos)
        if tm:
            pos = tm.end()
        rest = text[pos:]
        if not rest.strip():
            continue
        nxt = rest.lstrip()
        if len(nxt) == len(rest):
            continue  # no whitespace after the terminator
        if not (nxt[0].isupper() or nxt[0].isdigit() or nxt[0] in "\"'(“"):
            continue
        if m.group() == "." and _is_abbreviation(text, m.start(), nxt):
            continue
        cuts.append(pos)
    for m in _PARAGRAPH.finditer(text):
        cuts.append(m.start())
    return sorted(set(cuts))


def segment_statements(text: str, shortlist_size: int | None = None) -> list[Statement]:
    """Rule-based sentence split that keeps each sentence's citation markers.

    Markers that follow a sentence terminator belong to that sentence. A
    fragment made only of markers is folded into the previous sentence.
    """
    pieces: list[tuple[int, int]] = []
    last = 0
    for cut in _boundaries(text) + [len(text)]:
        seg = text[last:cut]
        lead = len(seg) - len(seg.lstrip())
        body = seg.strip()
        if body:
            pieces.append((last + lead, last + lead + len(body)))
        last = cut

    merged: list[list[int]] = []
    for start, end in pieces:
        marker_only = not parse_inline_citations(text[start:end], None).clean_text.strip()
        if marker_only and merged:
            merged[-1][1] = end
        else:
            merged.append([start, end])
    if len(merged) > 1 and not parse_inline_citations(
            text[merged[0][0]:merged[0][1]], None).clean_text.strip():
        merged[1][0] = merged[0][0]
        merged.pop(0)

    statements = []
    for i, (start, end) in enumerate(merged):
        raw = text[start:end]
        parsed = parse_inline_citations(raw, shortlist_size)
        statements.append(Statement(i, " ".join(parsed.clean_text.split()), raw, start, end,
                                    parsed.markers, parsed.dropped))
    if not statements and text.strip():
        statements.append(Statement(0, text.strip(), text.strip(), 0, len(text)))
    return statements


# ----------------------------------------------------------- polar answer

_LEADING_TOKEN = re.compile(r"[^\W_]+")
_ANSWER_IS = re.compile(r"\banswer\s*(?:is|:)\s*[\"'*\s]*(yes|no|maybe)\b", re.IGNORECASE)
_CONCLUDE = re.compile(r"\bconclude[ds]?\s+that\b[^.!?]*?\b(yes|no|maybe)\b", re.IGNORECASE)


def extract_polar_answer(text: str) -> PolarAnswer:
    """Yes/No/Maybe verdict of an answer.

    Rules, first hit wins: the answer's first word; then an "answer is X" or
    "answer: X" phrase; then "conclude that ... X". Otherwise UNKNOWN.
    """
    clean = parse_inline_citations(text, None).clean_text
    first = _LEADING_TOKEN.search(clean)
    if first and first.group().lower() in ("yes", "no", "maybe"):
        return PolarAnswer(first.group().lower())
    for rule in (_ANSWER_IS, _CONCLUDE):
        m = rule.search(clean)
        if m:
            return PolarAnswer(m.group(1).lower())
    return PolarAnswer.UNKNOWN


# ------------------------------------------------------------ cited answer

@dataclass
class CitedStatement:
    text: str
    citations: list[str] = field(default_factory=list)


@dataclass
class CitedAnswer:
    question_id: str
    raw_text: str
    polar: PolarAnswer
    statements: list[CitedStatement]

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "polar": self.polar.value,
            "statements": [{"text": s.text, "citations": list(s.citations)}
                           for s in self.statements],
            "raw_text": self.raw_text,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict) -> "CitedAnswer":
        return cls(
            question_id=rec["question_id"],
            raw_text=rec["raw_text"],
            polar=PolarAnswer.parse(rec["polar"]),
            statements=[CitedStatement(s["text"], list(s["citations"]))
                        for s in rec["statements"]],
        )


def validate_cited_answer(answer: CitedAnswer, known_doc_ids) -> None:
    """Raise ``ValueError`` if a citation is unknown or repeated in one statement."""
    for i, st in enumerate(answer.statements):
        if len(set(st.citations)) != len(st.citations):
            raise ValueError(f"{answer.question_id} statement {i}: duplicate citation")
        for doc_id in st.citations:
            if doc_id not in known_doc_ids:
                raise ValueError(f"{answer.question_id} statement {i}: unknown doc {doc_id}")
