"""Split a retrieval query into the objects and actions it mentions."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..errors import EmptyQueryError

_TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)?")


@dataclass(frozen=True)
class Lexicon:
    version: int
    stop_words: frozenset
    actions: dict  # surface form -> lemma


@dataclass(frozen=True)
class QueryIntent:
    raw_query: str
    objects: tuple[str, ...]
    actions: tuple[str, ...]

    @property
    def terms(self) -> tuple[str, ...]:
        """Objects then actions, the order relevance questions are asked in."""
        return self.objects + self.actions


@lru_cache(maxsize=None)
def load_lexicon() -> Lexicon:
    data = json.loads(resources.files(__package__).joinpath("data/lexicon.json").read_text("utf-8"))
    return Lexicon(int(data["version"]), frozenset(data["stop_words"]), dict(data["actions"]))


def _clean(words):
    seen = []
    for w in words:
        w = str(w).strip().lower()
        if w and w not in seen:
            seen.append(w)
    return tuple(seen)


def parse_query(raw: str, extractor=None, lexicon: Lexicon | None = None) -> QueryIntent:
    """Extract objects and actions from ``raw``.

    The default path lowercases and tokenizes the query, drops stop words and
    sorts the remaining tokens into actions (tokens found in the verb
    lexicon) and objects (everything else). Surface forms are kept, so
    "holding" stays "holding".

    ``extractor``, when given, replaces the lexicon path: it is called with
    the trimmed query and must return ``(objects, actions)``. This is the hook
    for delegating extraction to a language model.
    """
    text = (raw or "").strip()
    if not text:
        raise EmptyQueryError("query is empty")
    if extractor is not None:
        objects, actions = extractor(text)
        return QueryIntent(text, _clean(objects), _clean(actions))

    lex = lexicon or load_lexicon()
    objects, actions = [], []
    for tok in _TOKEN.findall(text.lower()):
        if tok.endswith("'s"):
            tok = tok[:-2]
        if not tok or tok in lex.stop_words:
            continue
        (actions if tok in lex.actions else objects).append(tok)
    return QueryIntent(text, _clean(objects), _clean(actions))
