"""Attribution judges: does this evidence support this statement?"""
from __future__ import annotations

import enum
import logging
import re
import threading
from typing import Callable, Mapping, Protocol

from ..llm import ChatClient, GenerationConfig, PromptTemplate, load_template

logger = logging.getLogger(__name__)


class AttributionLabel(float, enum.Enum):
    FULL = 1.0
    PARTIAL = 0.5
    NONE = 0.0

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "AttributionLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown attribution label {token!r}") from None


class Judge(Protocol):
    name: str

    def judge(self, statement: str, evidence: str) -> AttributionLabel: ...


# "not fully supports" must not read as FULL, hence the lookbehinds
_NEG = r"(?<!not )(?<!n't )(?<!never )"
_FULL = re.compile(_NEG + r"\bfull(?:y)?\b", re.IGNORECASE)
_PARTIAL = re.compile(_NEG + r"\bpartial(?:ly)?\b", re.IGNORECASE)


def parse_judgment(text: str) -> AttributionLabel | None:
    """Keyword precedence fully > partially > not. ``None`` if nothing matched."""
    if _FULL.search(text):
        return AttributionLabel.FULL
    if _PARTIAL.search(text):
        return AttributionLabel.PARTIAL
    if re.search(r"\b(?:not|n't)\s+(?:fully\s+|partially\s+)?support", text, re.IGNORECASE) \
            or re.search(r"\b(?:no|none|unsupported)\b", text, re.IGNORECASE):
        return AttributionLabel.NONE
    return None


class LLMJudge:
    """Prompted judge. Unparseable replies count as NONE and bump ``warnings``."""

    def __init__(self, client: ChatClient, config: GenerationConfig | None = None,
                 template: PromptTemplate | str = "attribution_judge", name: str | None = None):
        self.client = client
        self.config = config or GenerationConfig(max_tokens=64)
        self.template = load_template(template) if isinstance(template, str) else template
        self.name = name or f"llm:{self.config.model_name}"
        self.warnings = 0
        self.calls = 0
        self._lock = threading.Lock()

    def judge(self, statement: str, evidence: str) -> AttributionLabel:
        system, user = self.template.render({"statement": statement, "evidence": evidence})
        reply = self.client.complete(system, user, self.config)
        label = parse_judgment(reply)
        with self._lock:
            self.calls += 1
            if label is None:
                self.warnings += 1
        if label is None:
            logger.warning("unparseable judge reply %r; scoring as none", reply[:80])
            return AttributionLabel.NONE
        return label


class ScriptedJudge:
    """Fixed labels, from a ``(statement, evidence) -> label`` mapping or a function."""

    def __init__(self, table: Mapping[tuple[str, str], AttributionLabel] |
                 Callable[[str, str], AttributionLabel], name: str = "scripted",
                 default: AttributionLabel | None = None):
        self._table = table
        self.name = name
        self.default = default
        self.calls = 0
        self.warnings = 0
        self._lock = threading.Lock()

    def judge(self, statement: str, evidence: str) -> AttributionLabel:
        with self._lock:
            self.calls += 1
        if callable(self._table):
            return AttributionLabel(self._table(statement, evidence))
        try:
            return AttributionLabel(self._table[(statement, evidence)])
        except KeyError:
            if self.default is None:
                raise
            return self.default
