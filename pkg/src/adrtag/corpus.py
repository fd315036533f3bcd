"""Documents, entity classes and standoff annotation I/O.

Corpora live on disk as ``<docid>.txt`` / ``<docid>.ann`` pairs.  Each ``.ann``
line holds one mention::

    ID<TAB>CLASS<TAB>start end[;start end...]<TAB>SURFACE

Lines starting with ``#`` are comments.  Offsets are code-point offsets into
the decoded document text, end-exclusive.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .exceptions import ValidationError

logger = logging.getLogger(__name__)

__all__ = [
    "EntityClass",
    "MentionAnnotation",
    "AnnotatedDocument",
    "ClassStats",
    "CorpusStats",
    "load_corpus",
    "write_corpus",
    "write_annotations",
    "read_annotations",
    "filter_discontinuous",
    "compute_stats",
]


class EntityClass(str, enum.Enum):
    ADVERSE_REACTION = "AdverseReaction"
    SEVERITY = "Severity"
    FACTOR = "Factor"
    DRUG_CLASS = "DrugClass"
    NEGATION = "Negation"
    ANIMAL = "Animal"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "EntityClass":
        try:
            return cls(name)
        except ValueError:
            raise ValidationError(f"unknown entity class {name!r}") from None


Span = tuple[int, int]


@dataclass(frozen=True)
class MentionAnnotation:
    id: str
    cls: EntityClass
    spans: tuple[Span, ...]
    surface: str = ""

    def __post_init__(self):
        spans = tuple((int(s), int(e)) for s, e in self.spans)
        object.__setattr__(self, "spans", spans)
        object.__setattr__(self, "cls", EntityClass(self.cls))
        if not spans:
            raise ValidationError(f"mention {self.id}: no spans")
        prev_end = None
        for start, end in spans:
            if start >= end:
                raise ValidationError(f"mention {self.id}: span ({start}, {end}) has start >= end")
            if start < 0:
                raise ValidationError(f"mention {self.id}: negative offset {start}")
            if prev_end is not None and start < prev_end:
                raise ValidationError(f"mention {self.id}: spans overlap or are unsorted: {spans}")
            prev_end = end

    @property
    def start(self) -> int:
        return self.spans[0][0]

    @property
    def end(self) -> int:
        return self.spans[-1][1]

    @property
    def discontinuous(self) -> bool:
        return len(self.spans) > 1

    def key(self) -> tuple:
        """Identity used for comparisons that ignore ids and surface text."""
        return (self.cls.value, self.spans)

    @classmethod
    def from_text(cls, id: str, entity_class, spans: Iterable[Span], text: str) -> "MentionAnnotation":
        spans = tuple(spans)
        surface = " ".join(text[s:e] for s, e in spans)
        return cls(id, EntityClass(entity_class), spans, surface)


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    text: str
    annotations: tuple[MentionAnnotation, ...] = field(default=())

    def __post_init__(self):
        annotations = tuple(self.annotations)
        object.__setattr__(self, "annotations", annotations)
        seen = set()
        for ann in annotations:
            if ann.id in seen:
                raise ValidationError(f"document {self.doc_id}: duplicate annotation id {ann.id}")
            seen.add(ann.id)
            for start, end in ann.spans:
                if end > len(self.text):
                    raise ValidationError(
                        f"document {self.doc_id}: span ({start}, {end}) of {ann.id} "
                        f"outside text of length {len(self.text)}"
                    )
            expected = " ".join(self.text[s:e] for s, e in ann.spans)
            if ann.surface and ann.surface != expected:
                logger.warning(
                    "document %s: surface %r of %s differs from span text %r",
                    self.doc_id, ann.surface, ann.id, expected,
                )

    def mentions_of(self, entity_class) -> list[MentionAnnotation]:
        entity_class = EntityClass(entity_class)
        return [a for a in self.annotations if a.cls is entity_class]

    def with_annotations(self, annotations: Iterable[MentionAnnotation]) -> "AnnotatedDocument":
        return AnnotatedDocument(self.doc_id, self.text, tuple(annotations))


# ---------------------------------------------------------------------------
# .ann I/O


def _parse_spans(field_text: str, where: str) -> tuple[Span, ...]:
    spans = []
    for part in field_text.split(";"):
        bits = part.split()
        if len(bits) != 2:
            raise ValidationError(f"{where}: malformed span {part!r}")
        try:
            start, end = int(bits[0]), int(bits[1])
        except ValueError:
            raise ValidationError(f"{where}: non-integer span {part!r}") from None
        spans.append((start, end))
    return tuple(spans)


def read_annotations(path, text: str, doc_id: str | None = None) -> list[MentionAnnotation]:
    path = Path(path)
    doc_id = doc_id or path.stem
    annotations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            where = f"{path.name}:{lineno}"
            parts = line.split("\t")
            if len(parts) < 3:
                raise ValidationError(f"{where}: expected ID<TAB>CLASS<TAB>SPANS<TAB>SURFACE")
            ann_id, cls_name, span_field = parts[0], parts[1], parts[2]
            surface = "\t".join(parts[3:])
            entity_class = EntityClass.parse(cls_name)
            spans = _parse_spans(span_field, where)
            for start, end in spans:
                if start >= end:
                    raise ValidationError(f"{where}: span ({start}, {end}) has start >= end")
                if start < 0 or end > len(text):
                    raise ValidationError(
                        f"document {doc_id}: span ({start}, {end}) outside text of length {len(text)}"
                    )
            annotations.append(MentionAnnotation(ann_id, entity_class, spans, surface))
    return annotations


def format_annotation(ann: MentionAnnotation) -> str:
    spans = ";".join(f"{s} {e}" for s, e in ann.spans)
    surface = ann.surface.replace("\t", " ").replace("\n", " ")
    return f"{ann.id}\t{ann.cls.value}\t{spans}\t{surface}"


def write_annotations(path, annotations: Iterable[MentionAnnotation]) -> None:
    lines = [format_annotation(a) + "\n" for a in annotations]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def load_corpus(path, format: str = "standoff", require_annotations: bool = True) -> list[AnnotatedDocument]:
    """Read every ``*.txt`` document in *path* with its ``.ann`` companion.

    Documents are returned sorted by id.  With ``require_annotations=False`` a
    missing ``.ann`` file yields a document with no annotations (unlabelled
    input for tagging).
    """
    if format != "standoff":
        raise ValueError(f"unsupported annotation format {format!r}")
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    docs = []
    for txt_path in sorted(root.glob("*.txt")):
        with open(txt_path, encoding="utf-8", newline="") as fh:
            text = fh.read()
        ann_path = txt_path.with_suffix(".ann")
        if ann_path.exists():
            annotations = read_annotations(ann_path, text, txt_path.stem)
        elif require_annotations:
            raise FileNotFoundError(f"missing annotation file {ann_path}")
        else:
            annotations = []
        docs.append(AnnotatedDocument(txt_path.stem, text, tuple(annotations)))
    return docs


def write_corpus(docs: Iterable[AnnotatedDocument], path, write_text: bool = True) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        if write_text:
            with open(root / f"{doc.doc_id}.txt", "w", encoding="utf-8", newline="") as fh:
                fh.write(doc.text)
        write_annotations(root / f"{doc.doc_id}.ann", doc.annotations)


# ---------------------------------------------------------------------------
# Corpus-level operations


def filter_discontinuous(docs: Sequence[AnnotatedDocument]) -> tuple[list[AnnotatedDocument], int]:
    """Drop every multi-span annotation; return new documents and the number dropped."""
    kept_docs = []
    dropped = 0
    for doc in docs:
        kept = tuple(a for a in doc.annotations if not a.discontinuous)
        dropped += len(doc.annotations) - len(kept)
        kept_docs.append(doc if len(kept) == len(doc.annotations) else doc.with_annotations(kept))
    return kept_docs, dropped


@dataclass(frozen=True)
class ClassStats:
    mention_count: int = 0
    token_count: int = 0

    @property
    def avg_tokens_per_mention(self) -> float:
        if self.mention_count == 0:
            return 0.0
        return self.token_count / self.mention_count


@dataclass(frozen=True)
class CorpusStats:
    per_class: dict

    def __getitem__(self, entity_class) -> ClassStats:
        return self.per_class[EntityClass(entity_class)]

    def format_table(self) -> str:
        header = f"{'Entity class':<18}{'#mentions':>11}{'#tokens':>10}{'Avg. tk/mention':>17}"
        lines = [header, "-" * len(header)]
        for cls in EntityClass:
            st = self.per_class[cls]
            lines.append(
                f"{cls.value:<18}{st.mention_count:>11,}{st.token_count:>10,}"
                f"{st.avg_tokens_per_mention:>17.2f}"
            )
        return "\n".join(lines) + "\n"


def compute_stats(docs: Iterable[AnnotatedDocument], tokenizer: Callable[[str], Sequence]) -> CorpusStats:
    """Count mentions and covered tokens per entity class.

    *tokenizer* maps a string to a sequence of tokens; the token count of a
    mention is the number of tokens in its span text.
    """
    mentions = {cls: 0 for cls in EntityClass}
    tokens = {cls: 0 for cls in EntityClass}
    for doc in docs:
        for ann in doc.annotations:
            mentions[ann.cls] += 1
            tokens[ann.cls] += sum(len(tokenizer(doc.text[s:e])) for s, e in ann.spans)
    return CorpusStats({cls: ClassStats(mentions[cls], tokens[cls]) for cls in EntityClass})
