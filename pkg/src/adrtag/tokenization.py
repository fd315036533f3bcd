"""Tokenisation, BIO encoding of mentions and decoding of label sequences."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import EntityClass, MentionAnnotation
from .exceptions import ValidationError
from .structure import TextUnit

__all__ = [
    "Token",
    "TaggedSequence",
    "OUTSIDE",
    "tokenize",
    "tokenize_text",
    "make_label",
    "parse_label",
    "label_set",
    "infer_labels",
    "align_annotations",
    "align_all",
    "project_mentions",
    "repair_labels",
    "decode_spans",
    "decode_mentions",
]

OUTSIDE = "O"
PUNCT = set(".,;:()[]{}%\"'*†")
_WORD_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    index: int

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end


def _split_word(word: str, offset: int) -> list[tuple[str, int]]:
    lead = []
    i, j = 0, len(word)
    while i < j and word[i] in PUNCT:
        lead.append((word[i], offset + i))
        i += 1
    trail = []
    while j > i and word[j - 1] in PUNCT:
        j -= 1
        trail.append((word[j], offset + j))
    core = [(word[i:j], offset + i)] if i < j else []
    return lead + core + trail[::-1]


def tokenize_text(text: str) -> list[Token]:
    """Whitespace split, then peel leading/trailing punctuation into 1-char tokens.

    >>> [t.surface for t in tokenize_text("(2%)")]
    ['(', '2', '%', ')']
    """
    tokens = []
    for m in _WORD_RE.finditer(text):
        for surface, start in _split_word(m.group(), m.start()):
            tokens.append(Token(surface, start, start + len(surface), len(tokens)))
    return tokens


def tokenize(unit: TextUnit | str) -> list[Token]:
    """Tokenise a text unit; token spans are unit-local."""
    text = unit if isinstance(unit, str) else unit.text
    return tokenize_text(text)


# ---------------------------------------------------------------------------
# labels


def make_label(tag: str, entity_class=None) -> str:
    if tag == OUTSIDE:
        return OUTSIDE
    return f"{tag}-{EntityClass(entity_class).value}"


def parse_label(label: str) -> tuple[str, EntityClass | None]:
    if label == OUTSIDE:
        return OUTSIDE, None
    tag, _, name = label.partition("-")
    if tag not in ("B", "I") or not name:
        raise ValidationError(f"malformed BIO label {label!r}")
    return tag, EntityClass.parse(name)


def label_set(classes: Iterable) -> list[str]:
    """Ordered label inventory: ``O`` then ``B-``/``I-`` pairs in canonical class order."""
    wanted = {EntityClass(c) for c in classes}
    labels = [OUTSIDE]
    for cls in EntityClass:
        if cls in wanted:
            labels += [make_label("B", cls), make_label("I", cls)]
    return labels


def infer_labels(label_seqs: Iterable[Sequence[str]]) -> list[str]:
    """``O`` followed by the observed B/I labels, grouped by class in canonical order."""
    seen = {lab for seq in label_seqs for lab in seq} - {OUTSIDE}
    order = {cls: k for k, cls in enumerate(EntityClass)}

    def key(label):
        tag, cls = parse_label(label)
        return order[cls], tag

    return [OUTSIDE] + sorted(seen, key=key)


@dataclass(frozen=True)
class TaggedSequence:
    unit: TextUnit
    tokens: tuple[Token, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.tokens) != len(self.labels):
            raise ValidationError(f"{len(self.tokens)} tokens but {len(self.labels)} labels")


def project_mentions(unit: TextUnit, mentions: Iterable[MentionAnnotation]) -> list[MentionAnnotation]:
    """Clip document-level single-span mentions to *unit* and shift to local offsets."""
    out = []
    for m in mentions:
        s, e = max(m.start, unit.start), min(m.end, unit.end)
        if s < e:
            ls, le = unit.to_local(s, e)
            out.append(MentionAnnotation(m.id, m.cls, ((ls, le),), unit.text[ls:le]))
    return out


def align_annotations(tokens: Sequence[Token], mentions: Iterable[MentionAnnotation], entity_class) -> list[str]:
    """BIO labels for one entity class.

    A token belongs to a mention when its span midpoint lies inside the
    mention's span; mentions of other classes are ignored.
    """
    entity_class = EntityClass(entity_class)
    spans = sorted(((m.start, m.end, m.id) for m in mentions if m.cls is entity_class))
    for (s1, e1, id1), (s2, e2, id2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise ValidationError(f"overlapping {entity_class.value} mentions {id1} and {id2}")
    labels = [OUTSIDE] * len(tokens)
    b_label, i_label = make_label("B", entity_class), make_label("I", entity_class)
    for start, end, _ in spans:
        first = True
        for k, tok in enumerate(tokens):
            mid2 = tok.start + tok.end  # twice the midpoint, keeps integer arithmetic
            if 2 * start <= mid2 < 2 * end:
                labels[k] = b_label if first else i_label
                first = False
    return labels


def align_all(tokens: Sequence[Token], mentions: Iterable[MentionAnnotation], classes: Iterable) -> list[str]:
    """Joint labels over several classes; earlier classes win on token clashes."""
    mentions = list(mentions)
    labels = [OUTSIDE] * len(tokens)
    for cls in classes:
        for k, lab in enumerate(align_annotations(tokens, mentions, cls)):
            if lab != OUTSIDE and labels[k] == OUTSIDE:
                labels[k] = lab
    return repair_labels(labels)


def repair_labels(labels: Sequence[str]) -> list[str]:
    """Turn every orphan ``I`` (after ``O`` or a different class) into ``B``."""
    out = []
    prev_cls = None
    for lab in labels:
        tag, cls = parse_label(lab)
        if tag == "I" and cls is not prev_cls:
            lab = make_label("B", cls)
        out.append(lab)
        prev_cls = cls
    return out


def decode_spans(labels: Sequence[str]) -> list[tuple[EntityClass, int, int]]:
    """Token-index runs ``(class, first, last_exclusive)`` after orphan-I repair."""
    runs = []
    current = None
    for k, lab in enumerate(repair_labels(labels)):
        tag, cls = parse_label(lab)
        if tag == "I":
            current[2] = k + 1
            continue
        if current is not None:
            runs.append(tuple(current))
            current = None
        if tag == "B":
            current = [cls, k, k + 1]
    if current is not None:
        runs.append(tuple(current))
    return runs


def decode_mentions(seq: TaggedSequence, id_prefix: str = "T", start_id: int = 1) -> list[MentionAnnotation]:
    """Merge labelled token runs into mentions with document-level spans."""
    mentions = []
    for n, (cls, first, last) in enumerate(decode_spans(seq.labels)):
        ls, le = seq.tokens[first].start, seq.tokens[last - 1].end
        s, e = seq.unit.to_document(ls, le)
        mentions.append(MentionAnnotation(f"{id_prefix}{start_id + n}", cls, ((s, e),), seq.unit.text[ls:le]))
    return mentions
