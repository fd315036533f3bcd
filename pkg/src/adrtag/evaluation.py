"""Holdout splitting and token / mention level precision, recall and F1.

Scores are percentages.  Micro averages pool true positives, false positives
and false negatives over classes and documents before dividing.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import EntityClass, MentionAnnotation
from .exceptions import ConfigurationError, ValidationError
from .tokenization import OUTSIDE, TaggedSequence, parse_label

__all__ = [
    "MatchMode",
    "SplitSpec",
    "Prf",
    "PrfScores",
    "f1_score",
    "split_corpus",
    "split_sizes",
    "token_prf",
    "mention_prf",
    "format_report",
    "format_summary",
]


class MatchMode(str, enum.Enum):
    WITH_TYPE = "with-type"
    WITHOUT_TYPE = "without-type"


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of two percentages (0 when both are 0)."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class Prf:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    def __add__(self, other: "Prf") -> "Prf":
        return Prf(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class PrfScores:
    per_class: dict = field(default_factory=dict)  # EntityClass -> Prf

    @property
    def micro(self) -> Prf:
        total = Prf()
        for prf in self.per_class.values():
            total = total + prf
        return total

    def __getitem__(self, entity_class) -> Prf:
        return self.per_class.get(EntityClass(entity_class), Prf())


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    train: int = 56
    validation: int = 24
    test: int = 21
    seed: int = 0
    proportional: bool = True

    @property
    def total(self) -> int:
        return self.train + self.validation + self.test


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """Partition sizes: the configured counts when they sum to *n*, otherwise
    their proportions scaled to *n* with largest-remainder rounding."""
    sizes = (spec.train, spec.validation, spec.test)
    if spec.total == n:
        return sizes
    if not spec.proportional:
        raise ConfigurationError(f"split sizes {sizes} do not fit a corpus of {n} documents")
    quotas = [n * s / spec.total for s in sizes]
    floors = [int(q) for q in quotas]
    left = n - sum(floors)
    order = sorted(range(3), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return tuple(floors)


def split_corpus(docs: Sequence, spec: SplitSpec | None = None):
    """Seeded shuffle then partition into ``(train, validation, test)``."""
    spec = spec or SplitSpec()
    if len(docs) < 3:
        raise ConfigurationError(f"need at least 3 documents to split, got {len(docs)}")
    if not spec.proportional and spec.total > len(docs):
        raise ConfigurationError(f"split sizes sum to {spec.total} but corpus has {len(docs)} documents")
    n_train, n_val, _ = split_sizes(len(docs), spec)
    order = list(range(len(docs)))
    random.Random(spec.seed).shuffle(order)
    shuffled = [docs[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]


# ---------------------------------------------------------------------------
# token level


def _labels(seq) -> Sequence[str]:
    return seq.labels if isinstance(seq, TaggedSequence) else seq


def token_prf(gold: Iterable, pred: Iterable, entity_class=None) -> PrfScores:
    """Token counts per class, ignoring the B/I distinction.

    *gold* and *pred* are aligned lists of :class:`TaggedSequence` or label
    lists.  With *entity_class* only that class is scored.
    """
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        raise ValidationError(f"{len(gold)} gold sequences but {len(pred)} predicted")
    only = EntityClass(entity_class) if entity_class is not None else None
    counts: dict[EntityClass, list[int]] = {}
    for gs, ps in zip(gold, pred):
        gl, pl = _labels(gs), _labels(ps)
        if len(gl) != len(pl):
            raise ValidationError(f"sequence lengths differ: {len(gl)} vs {len(pl)}")
        for g, p in zip(gl, pl):
            gc = parse_label(g)[1] if g != OUTSIDE else None
            pc = parse_label(p)[1] if p != OUTSIDE else None
            for cls in {gc, pc} - {None}:
                if only is not None and cls is not only:
                    continue
                c = counts.setdefault(cls, [0, 0, 0])
                if gc is cls and pc is cls:
                    c[0] += 1
                elif pc is cls:
                    c[1] += 1
                else:
                    c[2] += 1
    if only is not None:
        counts.setdefault(only, [0, 0, 0])
    return PrfScores({cls: Prf(*counts[cls]) for cls in EntityClass if cls in counts})


# ---------------------------------------------------------------------------
# mention level


def _as_doc_map(mentions) -> dict[str, list[MentionAnnotation]]:
    if isinstance(mentions, Mapping):
        return {k: list(v) for k, v in mentions.items()}
    return {"": list(mentions)}


def mention_prf(gold, pred, mode: MatchMode | str = MatchMode.WITH_TYPE) -> PrfScores:
    """Exact-span matching, greedy and one-to-one in document order.

    *gold* and *pred* are either mention lists (one document) or mappings
    from document id to mention lists.  Matches are credited to the gold
    class, unmatched predictions to their own class.
    """
    mode = MatchMode(mode)
    gold_map, pred_map = _as_doc_map(gold), _as_doc_map(pred)
    counts = {cls: [0, 0, 0] for cls in EntityClass}
    for doc_id in sorted(set(gold_map) | set(pred_map)):
        g_list = sorted(gold_map.get(doc_id, []), key=lambda m: (m.spans, m.cls.value, m.id))
        p_list = sorted(pred_map.get(doc_id, []), key=lambda m: (m.spans, m.cls.value, m.id))
        used = [False] * len(g_list)
        for p in p_list:
            hit = None
            for k, g in enumerate(g_list):
                if used[k] or g.spans != p.spans:
                    continue
                if mode is MatchMode.WITHOUT_TYPE or g.cls is p.cls:
                    hit = k
                    break
            if hit is None:
                counts[p.cls][1] += 1
            else:
                used[hit] = True
                counts[g_list[hit].cls][0] += 1
        for k, g in enumerate(g_list):
            if not used[k]:
                counts[g.cls][2] += 1
    return PrfScores({cls: Prf(*c) for cls, c in counts.items()})


# ---------------------------------------------------------------------------
# reporting


def _rows(scores: PrfScores):
    for cls in EntityClass:
        yield cls.value, scores[cls]
    yield "micro", scores.micro


def format_report(scores: PrfScores | Mapping[str, PrfScores], title: str = "") -> str:
    """Aligned plain-text table; a mapping renders one block per entry."""
    blocks = scores.items() if isinstance(scores, Mapping) else [(title, scores)]
    out = []
    for name, sc in blocks:
        if name:
            out.append(name)
        out.append(f"{'class':<16}{'tp':>7}{'fp':>7}{'fn':>7}{'P':>9}{'R':>9}{'F1':>9}")
        for label, prf in _rows(sc):
            out.append(f"{label:<16}{prf.tp:>7}{prf.fp:>7}{prf.fn:>7}"
                       f"{prf.precision:>9.2f}{prf.recall:>9.2f}{prf.f1:>9.2f}")
        out.append("")
    return "\n".join(out)


def format_summary(scores: Mapping[str, PrfScores]) -> str:
    """Machine-readable lines: ``section class tp fp fn P R F1`` (tab separated)."""
    lines = ["section\tclass\ttp\tfp\tfn\tP\tR\tF1"]
    for section, sc in scores.items():
        for label, prf in _rows(sc):
            lines.append(f"{section}\t{label}\t{prf.tp}\t{prf.fp}\t{prf.fn}\t"
                         f"{prf.precision:.2f}\t{prf.recall:.2f}\t{prf.f1:.2f}")
    return "\n".join(lines) + "\n"
