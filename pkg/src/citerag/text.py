"""Tokenisation shared by the index, the lexical scorer and ROUGE-L."""
from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, stem: bool = False) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    tokens = _TOKEN_RE.findall(text.lower())
    if stem:
        tokens = [s_stem(t) for t in tokens]
    return tokens


def s_stem(word: str) -> str:
    """Harman's S-stemmer: strip English plural endings only."""
    if len(word) > 3 and word.endswith("ies") and not word.endswith(("eies", "aies")):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("es") and not word.endswith(("aes", "ees", "oes")):
        return word[:-1]
    if len(word) > 2 and word.endswith("s") and not word.endswith(("us", "ss")):
        return word[:-1]
    return word
