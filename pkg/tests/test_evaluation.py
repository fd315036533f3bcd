import pytest
from hypothesis import given, settings, strategies as st

from adrtag.corpus import EntityClass, MentionAnnotation
from adrtag.evaluation import (
    MatchMode,
    Prf,
    PrfScores,
    SplitSpec,
    f1_score,
    format_report,
    format_summary,
    mention_prf,
    split_corpus,
    split_sizes,
    token_prf,
)
from adrtag.exceptions import ConfigurationError, ValidationError

ADR, SEV = EntityClass.ADVERSE_REACTION, EntityClass.SEVERITY


def m(start, end, cls=ADR, mid="T1"):
    return MentionAnnotation(mid, cls, ((start, end),), "")


@pytest.mark.parametrize("p,r,f", [(80.19, 72.23, 76.00), (76.84, 74.36, 75.58), (76.87, 74.39, 75.61)])
def test_f1_from_reported_precision_recall(p, r, f):
    assert abs(f1_score(p, r) - f) <= 0.01


def test_split_sizes():
    assert split_sizes(101, SplitSpec()) == (56, 24, 21)
    assert split_sizes(10, SplitSpec()) == (6, 2, 2)
    assert split_sizes(12, SplitSpec()) == (7, 3, 2)
    with pytest.raises(ConfigurationError):
        split_sizes(50, SplitSpec(proportional=False))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 400))
def test_split_sizes_partition(n):
    sizes = split_sizes(n, SplitSpec())
    assert sum(sizes) == n and all(s >= 0 for s in sizes)


def test_split_corpus_is_seeded_partition():
    docs = list(range(101))
    a = split_corpus(docs, SplitSpec(seed=3))
    assert a == split_corpus(docs, SplitSpec(seed=3))
    assert [len(p) for p in a] == [56, 24, 21]
    assert sorted(sum(a, [])) == docs
    assert a != split_corpus(docs, SplitSpec(seed=4))
    with pytest.raises(ConfigurationError):
        split_corpus([1, 2], SplitSpec())


def test_token_prf_example():
    gold = [["B-AdverseReaction"] * 5 + ["O"] * 5]
    pred = [["B-AdverseReaction"] + ["I-AdverseReaction"] * 3 + ["O", "B-AdverseReaction"] + ["O"] * 4]
    prf = token_prf(gold, pred)[ADR]
    assert (prf.tp, prf.fp, prf.fn) == (4, 1, 1)
    assert prf.precision == prf.recall == prf.f1 == 80.0


def test_token_prf_errors_and_filter():
    with pytest.raises(ValidationError):
        token_prf([["O"]], [])
    with pytest.raises(ValidationError):
        token_prf([["O"]], [["O", "O"]])
    scores = token_prf([["B-Severity", "B-AdverseReaction"]], [["B-Severity", "O"]], entity_class="Severity")
    assert list(scores.per_class) == [SEV] and scores.micro.f1 == 100.0


def test_empty_conventions():
    assert Prf().precision == Prf().recall == Prf().f1 == 0.0
    empty = mention_prf([], [])
    assert empty.micro == Prf() and empty[ADR].f1 == 0.0
    assert mention_prf([m(0, 4)], [])[ADR].precision == 0.0


def test_mention_prf_exact_spans_and_types():
    gold = [m(0, 4, ADR, "T1"), m(10, 15, SEV, "T2"), m(20, 25, ADR, "T3")]
    pred = [m(0, 4, ADR, "P1"), m(10, 15, ADR, "P2"), m(20, 24, ADR, "P3")]
    typed = mention_prf(gold, pred, MatchMode.WITH_TYPE)
    assert (typed[ADR].tp, typed[ADR].fp, typed[ADR].fn) == (1, 2, 1)
    assert (typed[SEV].tp, typed[SEV].fn) == (0, 1)
    untyped = mention_prf(gold, pred, "without-type")
    assert (untyped[SEV].tp, untyped.micro.tp, untyped.micro.fp) == (1, 2, 1)


def test_duplicate_predictions_count_once():
    scores = mention_prf([m(0, 4)], [m(0, 4, mid="P1"), m(0, 4, mid="P2")])
    assert (scores[ADR].tp, scores[ADR].fp) == (1, 1)


SPAN = st.tuples(st.integers(0, 30), st.integers(1, 5)).map(lambda t: (t[0], t[0] + t[1]))
MENTIONS = st.lists(st.tuples(SPAN, st.sampled_from([ADR, SEV, EntityClass.NEGATION])), max_size=12)


def build(items, prefix):
    return [MentionAnnotation(f"{prefix}{k}", c, (s,), "") for k, (s, c) in enumerate(items)]


@settings(max_examples=200, deadline=None)
@given(MENTIONS, MENTIONS, st.randoms(use_true_random=False))
def test_mention_prf_properties(g_items, p_items, rnd):
    gold, pred = build(g_items, "G"), build(p_items, "P")
    typed = mention_prf(gold, pred, MatchMode.WITH_TYPE).micro
    untyped = mention_prf(gold, pred, MatchMode.WITHOUT_TYPE).micro
    assert untyped.tp >= typed.tp and untyped.f1 >= typed.f1 - 1e-9
    assert typed.tp + typed.fn == len(gold) and typed.tp + typed.fp == len(pred)
    shuffled_g, shuffled_p = list(gold), list(pred)
    rnd.shuffle(shuffled_g)
    rnd.shuffle(shuffled_p)
    assert mention_prf(shuffled_g, shuffled_p).micro == typed
    assert mention_prf(gold, gold).micro.f1 == (100.0 if gold else 0.0)


def test_micro_pools_documents():
    gold = {"a": [m(0, 4)], "b": [m(0, 4), m(5, 9, SEV)]}
    pred = {"a": [m(0, 4)], "b": [m(5, 9, SEV)], "c": [m(1, 2)]}
    micro = mention_prf(gold, pred).micro
    assert (micro.tp, micro.fp, micro.fn) == (2, 1, 1)


def test_reports():
    scores = {"mention": PrfScores({ADR: Prf(4, 1, 1)})}
    report = format_report(scores)
    assert report.splitlines()[0] == "mention"
    assert "80.00" in report and "micro" in report
    summary = format_summary(scores).splitlines()
    assert summary[0] == "section\tclass\ttp\tfp\tfn\tP\tR\tF1"
    assert "mention\tAdverseReaction\t4\t1\t1\t80.00\t80.00\t80.00" in summary
    assert len(summary) == 1 + len(EntityClass) + 1
