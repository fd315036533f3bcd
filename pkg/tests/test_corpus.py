import pytest

from adrtag.cli import bundled_corpus_path
from adrtag.corpus import (
    AnnotatedDocument,
    ClassStats,
    EntityClass,
    MentionAnnotation,
    compute_stats,
    filter_discontinuous,
    format_annotation,
    load_corpus,
    read_annotations,
    write_corpus,
)
from adrtag.exceptions import ValidationError
from adrtag.tokenization import tokenize_text

TEXT = "Severe headache and nausea were reported in rats."


def test_entity_class_parse_accepts_canonical_names():
    assert EntityClass.parse("DrugClass") is EntityClass.DRUG_CLASS
    with pytest.raises(ValidationError):
        EntityClass.parse("Symptom")


@pytest.mark.parametrize("spans", [(), ((5, 5),), ((-1, 3),), ((6, 9), (0, 3)), ((0, 5), (4, 8))])
def test_mention_rejects_malformed_spans(spans):
    with pytest.raises(ValidationError):
        MentionAnnotation("T1", EntityClass.ADVERSE_REACTION, spans, "")


def test_discontinuous_surface_joins_spans():
    m = MentionAnnotation.from_text("T1", "AdverseReaction", [(7, 15), (20, 26)], TEXT)
    assert m.discontinuous
    assert m.surface == "headache nausea"
    assert (m.start, m.end) == (7, 26)


def test_document_rejects_duplicate_ids_and_out_of_range_spans():
    m = MentionAnnotation.from_text("T1", "Severity", [(0, 6)], TEXT)
    with pytest.raises(ValidationError):
        AnnotatedDocument("d", TEXT, (m, m))
    with pytest.raises(ValidationError):
        AnnotatedDocument("d", "short", (m,))


def test_ann_round_trip(tmp_path):
    anns = (
        MentionAnnotation.from_text("T1", "Severity", [(0, 6)], TEXT),
        MentionAnnotation.from_text("T2", "AdverseReaction", [(7, 15), (20, 26)], TEXT),
        MentionAnnotation.from_text("T3", "Animal", [(44, 48)], TEXT),
    )
    doc = AnnotatedDocument("label", TEXT, anns)
    write_corpus([doc], tmp_path)
    assert (tmp_path / "label.ann").read_text().splitlines()[1] == "T2\tAdverseReaction\t7 15;20 26\theadache nausea"
    (loaded,) = load_corpus(tmp_path)
    assert loaded == doc


def test_read_annotations_skips_comments_and_reports_bad_lines(tmp_path):
    path = tmp_path / "x.ann"
    path.write_text("# note\nT1\tSeverity\t0 6\tSevere\n", encoding="utf-8")
    assert [a.id for a in read_annotations(path, TEXT)] == ["T1"]
    path.write_text("T1\tSeverity\t0 six\tSevere\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        read_annotations(path, TEXT)


def test_load_corpus_requires_ann_unless_unlabelled(tmp_path):
    (tmp_path / "a.txt").write_text(TEXT, encoding="utf-8")
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path)
    (doc,) = load_corpus(tmp_path, require_annotations=False)
    assert doc.annotations == ()


def test_load_corpus_keeps_carriage_returns(tmp_path):
    (tmp_path / "a.txt").write_bytes(b"Rash\r\nNausea")
    (tmp_path / "a.ann").write_text("T1\tAdverseReaction\t6 12\tNausea\n", encoding="utf-8")
    (doc,) = load_corpus(tmp_path)
    assert doc.text[6:12] == "Nausea"


def test_filter_discontinuous_counts_dropped():
    anns = (
        MentionAnnotation.from_text("T1", "Severity", [(0, 6)], TEXT),
        MentionAnnotation.from_text("T2", "AdverseReaction", [(7, 15), (20, 26)], TEXT),
    )
    docs, dropped = filter_discontinuous([AnnotatedDocument("d", TEXT, anns)])
    assert dropped == 1
    assert [a.id for a in docs[0].annotations] == ["T1"]


def test_stats_average_is_token_over_mention_count(fixture_docs):
    stats = compute_stats(fixture_docs, tokenize_text)
    for cls in EntityClass:
        st = stats[cls]
        assert st.mention_count > 0
        assert round(st.avg_tokens_per_mention, 2) == round(st.token_count / st.mention_count, 2)
    # animals and negation cues in the fixture are single words
    assert stats[EntityClass.ANIMAL].avg_tokens_per_mention == 1.0
    assert "AdverseReaction" in stats.format_table()


@pytest.mark.parametrize(
    "mentions,tokens,avg",
    [(12792, 21258, 1.66), (863, 1306, 1.51), (602, 653, 1.08), (248, 518, 2.09), (44, 44, 1.00)],
)
def test_class_statistics_arithmetic(mentions, tokens, avg):
    assert round(ClassStats(mentions, tokens).avg_tokens_per_mention, 2) == avg


def test_negation_row_ratio():
    # 109 tokens over 95 mentions gives 1.15, not the 1.47 listed alongside these counts
    assert round(ClassStats(95, 109).avg_tokens_per_mention, 2) == 1.15


def test_zero_mentions_average_is_zero():
    assert ClassStats().avg_tokens_per_mention == 0.0


def test_bundled_corpus_matches_generator(fixture_docs):
    assert load_corpus(bundled_corpus_path()) == fixture_docs


def test_format_annotation_flattens_tabs():
    m = MentionAnnotation("T9", EntityClass.FACTOR, ((0, 3),), "a\tb")
    assert format_annotation(m) == "T9\tFactor\t0 3\ta b"
