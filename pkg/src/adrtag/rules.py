"""Dictionary-driven taggers for negation cues and laboratory animals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .corpus import EntityClass, MentionAnnotation
from .features import token_mask
from .resources import Lexicon, SuffixLemmatizer, bundled_lexicon
from .structure import TextUnit
from .tokenization import Token

__all__ = [
    "NegationResource",
    "AnimalResource",
    "default_scope",
    "tag_negations",
    "tag_animals",
    "NegationTagger",
    "AnimalTagger",
]

SCOPE_BREAK_PUNCT = {".", ";", ":"}
SCOPE_BREAK_WORDS = {"but", "however"}
MAX_SCOPE = 10


@dataclass(frozen=True)
class NegationResource:
    triggers: Lexicon = field(default_factory=lambda: bundled_lexicon("negation"))
    ignore_phrases: Lexicon = field(default_factory=lambda: bundled_lexicon("negation_ignore"))


@dataclass(frozen=True)
class AnimalResource:
    species: Lexicon = field(default_factory=lambda: bundled_lexicon("animal"))

    def __post_init__(self):
        if not len(self.species):
            raise ValueError("animal lexicon is empty")


ScopeFunction = Callable[[Sequence[Token], int, int], tuple[int, int]]


def default_scope(tokens: Sequence[Token], trigger_start: int, trigger_end: int) -> tuple[int, int]:
    """Token range governed by a cue at ``[trigger_start, trigger_end)``.

    The scope runs from the cue to the first of: end of unit, a ``. ; :``
    token, ``but``/``however``, or ``MAX_SCOPE`` tokens after the cue.
    """
    end = trigger_end
    limit = min(len(tokens), trigger_end + MAX_SCOPE)
    while end < limit:
        word = tokens[end].surface.lower()
        if word in SCOPE_BREAK_PUNCT or word in SCOPE_BREAK_WORDS:
            break
        end += 1
    return trigger_start, end


def _mention(unit: TextUnit, tokens: Sequence[Token], first: int, last: int, entity_class, n: int) -> MentionAnnotation:
    ls, le = tokens[first].start, tokens[last - 1].end
    return MentionAnnotation(f"R{n}", entity_class, (unit.to_document(ls, le),), unit.text[ls:le])


def tag_negations(
    unit: TextUnit,
    tokens: Sequence[Token],
    adr_mentions: Iterable,
    resource: NegationResource | None = None,
    scope: ScopeFunction = default_scope,
) -> list[MentionAnnotation]:
    """Negation cues with an ADR inside their scope.

    *adr_mentions* are in unit-local coordinates.  A cue is dropped when an
    ignore phrase overlaps the cue or its scope.  Emitted mentions cover the
    cue tokens only and carry document offsets.
    """
    resource = resource or NegationResource()
    adr = token_mask(tokens, list(adr_mentions))
    if not any(adr):
        return []
    words = [t.surface for t in tokens]
    ignored = resource.ignore_phrases.match(words)
    out = []
    for first, last in resource.triggers.match(words):
        s, e = scope(tokens, first, last)
        if any(a < e and s < b for a, b in ignored):
            continue
        if not any(adr[last:e]):
            continue
        out.append(_mention(unit, tokens, first, last, EntityClass.NEGATION, len(out) + 1))
    return out


def tag_animals(unit: TextUnit, tokens: Sequence[Token], resource: AnimalResource | None = None,
                lemmatizer=None) -> list[MentionAnnotation]:
    """Single-token Animal mentions for every species word."""
    resource = resource or AnimalResource()
    lemmatizer = lemmatizer or SuffixLemmatizer()
    out = []
    for k, tok in enumerate(tokens):
        if tok.surface in resource.species or lemmatizer.lemmatize(tok.surface) in resource.species:
            out.append(_mention(unit, tokens, k, k + 1, EntityClass.ANIMAL, len(out) + 1))
    return out


class NegationTagger:
    def __init__(self, resource: NegationResource | None = None, scope: ScopeFunction = default_scope):
        self.resource = resource or NegationResource()
        self.scope = scope

    def tag(self, unit, tokens, adr_mentions):
        return tag_negations(unit, tokens, adr_mentions, self.resource, self.scope)


class AnimalTagger:
    def __init__(self, resource: AnimalResource | None = None):
        self.resource = resource or AnimalResource()

    def tag(self, unit, tokens):
        return tag_animals(unit, tokens, self.resource)
