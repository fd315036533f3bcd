"""Lexicons, the built-in lemmatiser and the toy token annotators.

The bundled resources stand in for external tools (a full lemmatiser, a POS
tagger, a UMLS concept mapper and curated dictionaries).  Everything here is
deterministic and can be swapped for user-supplied files or objects exposing
the same methods.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as _res
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import AnnotatedDocument, EntityClass

__all__ = [
    "normalize_phrase",
    "Lexicon",
    "Lemmatizer",
    "SuffixLemmatizer",
    "TokenAnnotator",
    "RulePosTagger",
    "LexiconSemTypeAnnotator",
    "harvest_lexicon",
    "bundled_lexicon",
    "bundled_semtypes",
]

_SPACE_RE = re.compile(r"\s+")


def normalize_phrase(phrase: str) -> str:
    return _SPACE_RE.sub(" ", phrase.strip().lower())


def _read_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@dataclass(frozen=True)
class Lexicon:
    """Set of normalised phrases matched greedily, longest first, over token n-grams."""

    name: str
    entries: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "entries", frozenset(normalize_phrase(p) for p in self.entries if p.strip()))

    @property
    def max_phrase_len(self) -> int:
        return max((len(e.split(" ")) for e in self.entries), default=0)

    def __contains__(self, phrase: str) -> bool:
        return normalize_phrase(phrase) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_file(cls, path, name: str | None = None) -> "Lexicon":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls(name or path.stem, frozenset(_read_lines(fh)))

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# lexicon {self.name}\n")
            for entry in sorted(self.entries):
                fh.write(entry + "\n")

    def match(self, words: Sequence[str], alternatives: Sequence[str] | None = None) -> list[tuple[int, int]]:
        """Longest-match spans ``(first, last_exclusive)`` over *words*.

        *alternatives* (e.g. lemmas) is a parallel sequence tried when the
        surface n-gram is not an entry.
        """
        words = [w.lower() for w in words]
        alts = [a.lower() for a in alternatives] if alternatives is not None else None
        longest = self.max_phrase_len
        spans = []
        i = 0
        while i < len(words):
            hit = 0
            for n in range(min(longest, len(words) - i), 0, -1):
                if " ".join(words[i:i + n]) in self.entries or (
                    alts is not None and " ".join(alts[i:i + n]) in self.entries
                ):
                    hit = n
                    break
            if hit:
                spans.append((i, i + hit))
                i += hit
            else:
                i += 1
        return spans


# ---------------------------------------------------------------------------
# lemmatisation


class Lemmatizer(Protocol):
    def lemmatize(self, word: str) -> str: ...


_IRREGULAR = {
    "mice": "mouse", "children": "child", "women": "woman", "men": "man", "feet": "foot",
    "teeth": "tooth", "geese": "goose", "is": "be", "are": "be", "was": "be", "were": "be",
    "been": "be", "has": "have", "had": "have", "does": "do", "did": "do", "data": "data",
    "analyses": "analysis", "diagnoses": "diagnosis", "metastases": "metastasis",
}
_VOWELS = set("aeiouy")


def _has_vowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)


def _undouble(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in _VOWELS:
        return stem[:-1]
    return stem


class SuffixLemmatizer:
    """Lowercase and strip common inflections (plural, -ing, -ed)."""

    def lemmatize(self, word: str) -> str:
        return _lemma(word)


@lru_cache(maxsize=65536)
def _lemma(word: str) -> str:
    w = word.lower()
    if w in _IRREGULAR:
        return _IRREGULAR[w]
    if len(w) <= 3 or not w.replace("-", "").isalpha():
        return w
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith(("sses", "shes", "ches", "xes", "zes")):
        return w[:-2]
    if w.endswith("s") and not w.endswith(("ss", "us", "is", "ous")):
        return w[:-1]
    if w.endswith("ing"):
        stem = w[:-3]
        if len(stem) >= 3 and _has_vowel(stem):
            return _undouble(stem)
        return w
    if w.endswith("ied") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("ed"):
        stem = w[:-2]
        if len(stem) >= 3 and _has_vowel(stem):
            return _undouble(stem)
    return w


# ---------------------------------------------------------------------------
# token annotators


class TokenAnnotator(Protocol):
    name: str

    def tag(self, words: Sequence[str]) -> list[str]: ...


_CLOSED_CLASS = {
    "DT": "a an the this that these those each every any some no all both either neither",
    "IN": "of in on at by for with without from into during after before under over between "
          "among against through within than upon per via since until because although while if",
    "CC": "and or but nor yet however",
    "PRP": "i you he she it we they me him her us them",
    "PRP$": "his its their our your my",
    "MD": "may might can could should would must will shall",
    "TO": "to",
    "VB": "be have do",
    "VBZ": "is has does",
    "VBP": "are",
    "VBD": "was were had did",
    "VBN": "been",
    "RB": "not never also very often rarely usually generally frequently",
    "WDT": "which that whom whose",
    "EX": "there",
}
_WORD_POS = {w: tag for tag, words in _CLOSED_CLASS.items() for w in words.split()}
_SUFFIX_POS = [
    ("ly", "RB"), ("ing", "VBG"), ("ed", "VBN"), ("tion", "NN"), ("sion", "NN"), ("ness", "NN"),
    ("ment", "NN"), ("ity", "NN"), ("ism", "NN"), ("emia", "NN"), ("itis", "NN"), ("osis", "NN"),
    ("algia", "NN"), ("pathy", "NN"), ("ous", "JJ"), ("ful", "JJ"), ("ive", "JJ"), ("able", "JJ"),
    ("ible", "JJ"), ("ical", "JJ"), ("al", "JJ"), ("ic", "JJ"), ("ary", "JJ"), ("less", "JJ"),
    ("ize", "VB"), ("ise", "VB"), ("ate", "VB"), ("ies", "NNS"), ("s", "NNS"),
]
_PUNCT_POS = {".": ".", ",": ",", ":": ":", ";": ":", "(": "(", ")": ")", "[": "(", "]": ")",
              "{": "(", "}": ")", "%": "NN", "\"": "''", "'": "''", "*": "SYM", "†": "SYM"}
_NUM_RE = re.compile(r"^[+-]?\d[\d.,/]*$")


class RulePosTagger:
    """Word-list and suffix based part-of-speech tagger (Penn-style tags)."""

    name = "pos"

    def tag_word(self, word: str, first: bool = False) -> str:
        low = word.lower()
        if word in _PUNCT_POS:
            return _PUNCT_POS[word]
        if _NUM_RE.match(word):
            return "CD"
        if low in _WORD_POS:
            return _WORD_POS[low]
        if word[:1].isupper() and not first and not word.isupper():
            return "NNP"
        if "-" in low:
            return "JJ"
        for suffix, tag in _SUFFIX_POS:
            if low.endswith(suffix) and len(low) > len(suffix) + 2:
                if suffix == "s" and low.endswith(("ss", "us", "is")):
                    continue
                return tag
        return "NN"

    def tag(self, words: Sequence[str]) -> list[str]:
        return [self.tag_word(w, i == 0) for i, w in enumerate(words)]


class LexiconSemTypeAnnotator:
    """Map phrases to semantic-type codes by longest match; ``UNK`` elsewhere."""

    name = "semtype"

    def __init__(self, mapping: dict[str, str], lemmatizer: Lemmatizer | None = None):
        self.mapping = {normalize_phrase(k): v for k, v in mapping.items()}
        self._lexicon = Lexicon("semtype", frozenset(self.mapping))
        self.lemmatizer = lemmatizer or SuffixLemmatizer()

    @classmethod
    def from_file(cls, path) -> "LexiconSemTypeAnnotator":
        mapping = {}
        with open(path, encoding="utf-8") as fh:
            for line in _read_lines(fh):
                phrase, _, code = line.partition("\t")
                mapping[phrase] = code.strip() or "UNK"
        return cls(mapping)

    def tag(self, words: Sequence[str]) -> list[str]:
        tags = ["UNK"] * len(words)
        lemmas = [self.lemmatizer.lemmatize(w) for w in words]
        for s, e in self._lexicon.match(words, lemmas):
            surface = " ".join(w.lower() for w in words[s:e])
            code = self.mapping.get(surface) or self.mapping.get(" ".join(lemmas[s:e]), "UNK")
            for k in range(s, e):
                tags[k] = code
        return tags


# ---------------------------------------------------------------------------
# loaders


def harvest_lexicon(docs: Iterable[AnnotatedDocument], entity_class, name: str | None = None) -> Lexicon:
    """Collect every gold surface form of *entity_class* into a lexicon."""
    entity_class = EntityClass(entity_class)
    phrases = set()
    for doc in docs:
        for ann in doc.mentions_of(entity_class):
            phrases.add(" ".join(doc.text[s:e] for s, e in ann.spans))
    return Lexicon(name or entity_class.value.lower(), frozenset(phrases))


def _data_file(filename: str):
    return _res.files("adrtag").joinpath("data").joinpath(filename)


BUNDLED_LEXICONS = {
    "adr": "adr_lexicon.txt",
    "drugclass": "drug_classes.txt",
    "animal": "animals.txt",
    "negation": "negation_triggers.txt",
    "negation_ignore": "negation_ignore.txt",
}


def bundled_lexicon(name: str) -> Lexicon:
    if name not in BUNDLED_LEXICONS:
        raise KeyError(f"no bundled lexicon {name!r}; choose from {sorted(BUNDLED_LEXICONS)}")
    text = _data_file(BUNDLED_LEXICONS[name]).read_text(encoding="utf-8")
    return Lexicon(name, frozenset(_read_lines(text.splitlines())))


def bundled_semtypes() -> LexiconSemTypeAnnotator:
    with _res.as_file(_data_file("semtypes.tsv")) as path:
        return LexiconSemTypeAnnotator.from_file(path)
