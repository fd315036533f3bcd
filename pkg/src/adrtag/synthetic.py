"""Deterministic synthetic data: a drug-label-like fixture corpus and small
toy datasets for sanity checks of the learners."""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from .corpus import AnnotatedDocument, EntityClass, MentionAnnotation, write_corpus

__all__ = [
    "fixture_corpus",
    "write_fixture_corpus",
    "overfit_corpus",
    "two_topic_corpus",
    "gaussian_blobs",
]

ADRS = [
    "headache", "nausea", "vomiting", "dizziness", "rash", "diarrhea", "fatigue", "insomnia",
    "anaphylaxis", "hepatotoxicity", "neutropenia", "hypotension", "seizures", "pruritus",
    "abdominal pain", "back pain", "upper respiratory tract infection", "liver injury",
    "Stevens-Johnson syndrome", "QT prolongation", "bone marrow suppression", "renal failure",
]
SEVERITIES = ["severe", "serious", "fatal", "mild", "life-threatening", "moderate"]
FACTORS = ["high doses", "prolonged use", "overdose", "long-term treatment", "rapid infusion"]
DRUG_CLASSES = [
    "corticosteroids", "beta-blockers", "NSAIDs", "anticoagulants", "opioids",
    "ACE inhibitors", "antidepressants", "MAO inhibitors",
]
ANIMALS = ["rats", "mice", "rabbits", "dogs", "monkeys"]
HEADINGS = [
    "Asthma-Related Death", "Hepatotoxicity", "Serious Skin Reactions", "Hypotension",
    "Embryo-Fetal Toxicity", "Drug Interactions", "Clinical Trials Experience",
]


class _Builder:
    """Accumulates text and the standoff annotations laid over it."""

    def __init__(self):
        self.parts: list[str] = []
        self.length = 0
        self.mentions: list[tuple[EntityClass, int, int]] = []

    def add(self, text: str, cls: EntityClass | None = None) -> None:
        if cls is not None:
            self.mentions.append((cls, self.length, self.length + len(text)))
        self.parts.append(text)
        self.length += len(text)

    def seq(self, *pieces) -> None:
        for p in pieces:
            if isinstance(p, tuple):
                self.add(*p)
            else:
                self.add(p)

    def document(self, doc_id: str) -> AnnotatedDocument:
        text = "".join(self.parts)
        anns = [
            MentionAnnotation(f"T{k}", cls, ((s, e),), text[s:e])
            for k, (cls, s, e) in enumerate(self.mentions, start=1)
        ]
        return AnnotatedDocument(doc_id, text, tuple(anns))


def _cap(phrase: str) -> str:
    return phrase[:1].upper() + phrase[1:]


A, S, F, D, N, AN = (EntityClass.ADVERSE_REACTION, EntityClass.SEVERITY, EntityClass.FACTOR,
                     EntityClass.DRUG_CLASS, EntityClass.NEGATION, EntityClass.ANIMAL)


def _sentence(b: _Builder, rng: random.Random) -> None:
    adr, adr2 = rng.sample(ADRS, 2)
    kind = rng.randrange(9)
    if kind == 0:
        b.seq((_cap(rng.choice(SEVERITIES)), S), " ", (adr, A),
              " has been reported in patients receiving ", (rng.choice(DRUG_CLASSES), D), ".")
    elif kind == 1:
        b.seq(("No", N), " cases of ", (adr, A), " were reported in clinical trials.")
    elif kind == 2:
        b.seq((_cap(adr), A), " was observed in ", (rng.choice(ANIMALS), AN),
              " given 10 mg/kg per day.")
    elif kind == 3:
        b.seq((_cap(rng.choice(FACTORS)), F), " may increase the risk of ",
              (rng.choice(SEVERITIES), S), " ", (adr, A), ".")
    elif kind == 4:
        b.add("Dosing information for children is not available.")
    elif kind == 5:
        b.seq("Concomitant use with ", (rng.choice(DRUG_CLASSES), D),
              " is not recommended in elderly patients.")
    elif kind == 6:
        b.seq("Patients ", ("without", N), " ", (adr, A), " at baseline were enrolled.")
    elif kind == 7:
        b.seq("The most common adverse reactions were ", (adr, A), " and ", (adr2, A), ".")
    else:
        b.seq("Discontinue the drug if ", (adr, A), " occurs.")


def _paragraph(b: _Builder, rng: random.Random) -> None:
    for k in range(rng.randint(2, 4)):
        if k:
            b.add(" ")
        _sentence(b, rng)
    b.add("\n")


def _table(b: _Builder, rng: random.Random, number: int) -> None:
    b.add(f"Table {number}. Adverse Reactions Reported in at Least 2% of Patients\n")
    b.add("Adverse Reaction\tDrug (N=120)\tPlacebo (N=118)\n")
    for adr in rng.sample(ADRS, rng.randint(3, 5)):
        b.seq((_cap(adr), A), f"\t{rng.randint(3, 25)}%\t{rng.randint(1, 9)}%\n")
    b.add("† Includes events reported as related by investigators.\n")


def _bullets(b: _Builder, rng: random.Random) -> None:
    for adr in rng.sample(ADRS, rng.randint(2, 4)):
        b.seq("* ", (_cap(adr), A), " [see Warnings and Precautions (5.1)]\n")


def _document(doc_id: str, rng: random.Random) -> AnnotatedDocument:
    b = _Builder()
    section = 5
    for sub, title in enumerate(rng.sample(HEADINGS, 3), start=1):
        if sub > 1:
            b.add("\n")
        b.add(f"{section}.{sub} {title}\n\n")
        _paragraph(b, rng)
        block = rng.randrange(3)
        if block == 0:
            b.add("\n")
            _table(b, rng, sub)
        elif block == 1:
            b.add("\n")
            _bullets(b, rng)
        else:
            b.add("\n")
            _paragraph(b, rng)
    return b.document(doc_id)


def fixture_corpus(n_docs: int = 12, seed: int = 7) -> list[AnnotatedDocument]:
    """Small annotated corpus covering all six classes, tables, lists and headings."""
    rng = random.Random(seed)
    return [_document(f"label{k:02d}", rng) for k in range(1, n_docs + 1)]


def write_fixture_corpus(path, n_docs: int = 12, seed: int = 7) -> list[AnnotatedDocument]:
    docs = fixture_corpus(n_docs, seed)
    Path(path).mkdir(parents=True, exist_ok=True)
    write_corpus(docs, path)
    return docs


# ---------------------------------------------------------------------------
# toy learner data


def overfit_corpus(n: int = 20, seed: int = 0) -> tuple[list[list[str]], list[list[str]]]:
    """About 20 short token sequences with BIO labels over three classes.

    Labels are a function of the token and its left neighbour, so a
    sequence model can fit the set exactly.
    """
    rng = random.Random(seed)
    fillers = ["the", "patients", "reported", "in", "trial", "were", "observed", "after", "dosing"]
    out_x, out_y = [], []
    for _ in range(n):
        x, y = [], []
        for _ in range(rng.randint(2, 4)):
            for w in rng.sample(fillers, rng.randint(1, 3)):
                x.append(w)
                y.append("O")
            choice = rng.randrange(3)
            if choice == 0:
                x += ["severe", "headache"]
                y += ["B-Severity", "B-AdverseReaction"]
            elif choice == 1:
                x += ["liver", "injury"]
                y += ["B-AdverseReaction", "I-AdverseReaction"]
            else:
                x += ["in", "rats"]
                y += ["O", "B-Animal"]
        out_x.append(x)
        out_y.append(y)
    return out_x, out_y


def two_topic_corpus(n_sentences: int = 400, length: int = 10, seed: int = 0):
    """Sentences drawn from one of two disjoint vocabularies.

    Returns ``(sentences, topic_a_words, topic_b_words)``.
    """
    rng = random.Random(seed)
    topic_a = [f"cardio{k}" for k in range(8)]
    topic_b = [f"neuro{k}" for k in range(8)]
    sents = []
    for k in range(n_sentences):
        vocab = topic_a if k % 2 == 0 else topic_b
        sents.append([rng.choice(vocab) for _ in range(length)])
    return sents, topic_a, topic_b


def gaussian_blobs(n_per_blob: int = 30, seed: int = 0, spread: float = 0.1):
    """Three isotropic blobs far apart relative to *spread*; returns ``(X, membership)``."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.vstack([c + spread * rng.standard_normal((n_per_blob, 2)) for c in centers])
    membership = np.repeat(np.arange(3), n_per_blob)
    return X, membership
