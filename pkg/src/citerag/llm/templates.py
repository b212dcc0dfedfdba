"""Prompt templates stored as YAML data files.

A template file holds ``name``, ``system`` and ``user`` keys. Placeholders use
``str.format`` syntax (``{question}``); literal braces are doubled.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from ..corpus import Document


class TemplateError(KeyError):
    """A placeholder was left unbound. ``args[0]`` is its name."""

    def __str__(self) -> str:
        return f"unbound placeholder {self.args[0]!r}"


def _placeholders(text: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(text) if name}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_text: str
    user_text: str
    placeholders: frozenset[str] = field(init=False)

    def __post_init__(self):
        names = _placeholders(self.system_text) | _placeholders(self.user_text)
        object.__setattr__(self, "placeholders", frozenset(names))

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return cls(data["name"], data.get("system", ""), data["user"])

    def render(self, bindings: Mapping[str, object]) -> tuple[str, str]:
        for name in sorted(self.placeholders):
            if name not in bindings:
                raise TemplateError(name)
        values = {k: bindings[k] for k in self.placeholders}
        return self.system_text.format_map(values), self.user_text.format_map(values)


def render_prompt(template: PromptTemplate, bindings: Mapping[str, object]) -> tuple[str, str]:
    return template.render(bindings)


def format_documents(docs: Sequence[Document]) -> str:
    """Numbered evidence block, ``Document [i] (Title: ..., PMID: ...): abstract``."""
    return "\n".join(
        f"Document [{i}] (Title: {d.title}, PMID: {d.doc_id}): {d.abstract_text}"
        for i, d in enumerate(docs, 1)
    )


BUILTIN_TEMPLATES = ("cot_answer", "rag_answer", "rag_answer_nocite", "select_citations",
                     "attribution_judge")


def load_template(name_or_path: str) -> PromptTemplate:
    """Load a bundled template by name, or any template file by path."""
    if name_or_path in BUILTIN_TEMPLATES:
        text = resources.files("citerag.prompts").joinpath(f"{name_or_path}.yaml").read_text(
            encoding="utf-8")
        data = yaml.safe_load(text)
        return PromptTemplate(data["name"], data.get("system", ""), data["user"])
    return PromptTemplate.from_file(name_or_path)
