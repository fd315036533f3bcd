import pytest

from adrtag.resources import (
    Lexicon,
    LexiconSemTypeAnnotator,
    RulePosTagger,
    SuffixLemmatizer,
    bundled_lexicon,
    bundled_semtypes,
    harvest_lexicon,
)
from adrtag.synthetic import fixture_corpus


@pytest.mark.parametrize("word,lemma", [
    ("rats", "rat"), ("mice", "mouse"), ("reactions", "reaction"), ("injuries", "injury"),
    ("reported", "report"), ("vomiting", "vomit"), ("was", "be"),
    ("mg", "mg"), ("10%", "10%"), ("Headache", "headache"), ("analyses", "analysis"),
])
def test_suffix_lemmatizer(word, lemma):
    assert SuffixLemmatizer().lemmatize(word) == lemma


def test_lexicon_prefers_longest_match():
    lex = Lexicon("adr", frozenset({"liver", "liver injury", "injury", "Acute  Liver Injury"}))
    assert "acute liver injury" in lex
    words = "severe acute liver injury and liver damage".split()
    assert lex.match(words) == [(1, 4), (5, 6)]


def test_lexicon_matches_through_alternatives():
    lex = Lexicon("animal", frozenset({"rat"}))
    assert lex.match(["in", "rats"]) == []
    assert lex.match(["in", "rats"], ["in", "rat"]) == [(1, 2)]


def test_lexicon_file_round_trip(tmp_path):
    lex = Lexicon("x", frozenset({"b phrase", "a"}))
    path = tmp_path / "x.txt"
    lex.to_file(path)
    assert Lexicon.from_file(path) == lex


def test_pos_tagger():
    tags = RulePosTagger().tag(["The", "patients", "were", "not", "given", "10", "mg", "."])
    assert tags[0] == "DT" and tags[1] == "NNS" and tags[2] == "VBD" and tags[3] == "RB"
    assert tags[5] == "CD" and tags[7] == "."


def test_semtype_longest_match_and_unk():
    ann = LexiconSemTypeAnnotator({"liver": "bpoc", "liver injury": "inpo"})
    assert ann.tag(["the", "liver", "injury", "and", "liver"]) == ["UNK", "inpo", "inpo", "UNK", "bpoc"]


def test_bundled_resources_load():
    for name in ("adr", "drugclass", "animal", "negation", "negation_ignore"):
        assert len(bundled_lexicon(name)) > 0
    assert "headache" in bundled_lexicon("adr")
    assert bundled_semtypes().tag(["headache"]) != ["UNK"]
    with pytest.raises(KeyError):
        bundled_lexicon("nope")


def test_harvest_lexicon_collects_gold_surfaces():
    docs = fixture_corpus(3)
    lex = harvest_lexicon(docs, "Severity")
    expected = {d.text[s:e].lower() for d in docs for m in d.mentions_of("Severity") for s, e in m.spans}
    assert set(lex.entries) == expected and lex.name == "severity"
