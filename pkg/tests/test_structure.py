from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from adrtag.structure import (
    ElementKind,
    RowRole,
    SplitStrategy,
    classify_table_rows,
    dump_structure,
    parse_structure,
    split_cells,
    split_document,
)

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.parametrize("name", ["heading", "table", "list", "single_bullet", "label"])
def test_golden_structure_dump(name):
    text = (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")
    expected = (GOLDEN / f"{name}.json").read_bytes()
    assert dump_structure(parse_structure(text)).encode("utf-8") == expected


def kinds(text):
    return [el.kind for el in parse_structure(text).elements]


def test_heading_with_wide_gap_is_one_heading():
    assert kinds("5.1     Asthma-Related Death [See Boxed Warning]") == [ElementKind.HEADING]


def test_numbered_prose_is_not_a_heading():
    assert kinds("2 patients discontinued treatment.") == [ElementKind.PARAGRAPH]


def test_two_bullets_form_a_list_and_one_does_not():
    doc = parse_structure("* nausea\n* headache")
    (el,) = doc.elements
    assert el.kind is ElementKind.LIST
    assert [i.text for i in el.payload.items] == ["nausea", "headache"]
    assert kinds("* nausea") == [ElementKind.PARAGRAPH]


def test_table_rows_classified():
    text = "Table 1. Adverse events\nReaction\tPlacebo\tDrug\nNausea\t2%\t9%"
    lines, pos = [], 0
    for line in text.split("\n"):
        lines.append((line, (pos, pos + len(line))))
        pos += len(line) + 1
    table = classify_table_rows(lines)
    assert [len(table.caption_rows), len(table.header_rows), len(table.content_rows)] == [1, 1, 1]
    assert [c.text for c in table.content_rows[0].cells] == ["Nausea", "2%", "9%"]


def test_caption_only_table_has_no_content():
    table = classify_table_rows([("Table 3. Laboratory values", (0, 26))])
    assert len(table.caption_rows) == 1
    assert table.content_rows == () and table.header_rows == ()


def test_footnote_line_becomes_footer():
    doc = parse_structure("Table 1. X\nA\tB\n1\t2\n† reported in long-term studies")
    roles = [role for role, _ in doc.elements[0].payload.rows()]
    assert roles == [RowRole.CAPTION, RowRole.HEADER, RowRole.CONTENT, RowRole.FOOTER]


def test_rows_may_have_different_cell_counts():
    doc = parse_structure("Table 2. Y\nReaction\tDrug\tPlacebo\nNausea\t9%\nVomiting\t3%\t1%")
    table = doc.elements[0].payload
    assert [len(r.cells) for r in table.content_rows] == [2, 3]
    s, e = doc.elements[0].extent
    for _, row in table.rows():
        for cell in row.cells:
            assert s <= cell.extent[0] < cell.extent[1] <= e


def test_cells_split_on_double_spaces_without_tabs():
    text = "Back pain  4%   2%"
    assert [c.text for c in split_cells(text, (0, len(text)))] == ["Back pain", "4%", "2%"]


def test_table_runs_to_block_end_then_paragraph_follows():
    assert kinds("Table 1. T\nA\tB\n1\t2\n\nText after.") == [ElementKind.TABLE, ElementKind.PARAGRAPH]


def test_empty_text_has_no_elements():
    assert parse_structure("").elements == ()
    assert parse_structure(" \n \n").elements == ()


def test_whole_element_split_of_one_paragraph():
    text = "Nausea was reported."
    (unit,) = split_document(parse_structure(text), SplitStrategy.WHOLE_ELEMENT)
    assert unit.text == text and unit.start == 0


def test_sub_element_split_of_list_and_table():
    units = split_document(parse_structure("* nausea\n* headache"), SplitStrategy.SUB_ELEMENT)
    assert [u.text for u in units] == ["nausea", "headache"]
    units = split_document(parse_structure("Table 1. T\nNausea\t2%\t9%"), SplitStrategy.SUB_ELEMENT)
    assert [u.text for u in units] == ["Table 1. T", "Nausea", "2%", "9%"]


def test_label_fixture_units_round_trip():
    text = (GOLDEN / "label.txt").read_text(encoding="utf-8")
    doc = parse_structure(text)
    for strategy in SplitStrategy:
        for u in split_document(doc, strategy):
            assert text[u.start:u.end] == u.text
            assert list(u.offset_map) == list(range(u.start, u.end))


line_text = st.text(alphabet=st.sampled_from(list("ab1.%* \t†T")), max_size=12)
doc_text = st.lists(
    st.one_of(line_text, st.just(""), st.just("Table 1. x"), st.just("* item"), st.just("5.2 Title")),
    max_size=12,
).map("\n".join)


@settings(max_examples=300, deadline=None)
@given(doc_text)
def test_elements_sorted_disjoint_and_units_map_back(text):
    doc = parse_structure(text)
    prev_end = 0
    for el in doc.elements:
        s, e = el.extent
        assert prev_end <= s < e <= len(text)
        assert text[s:e] == el.text
        prev_end = e
    covered = set()
    for el in doc.elements:
        covered.update(range(*el.extent))
    # characters outside every element are separators (whitespace)
    assert all(text[i].isspace() for i in range(len(text)) if i not in covered)
    for strategy in SplitStrategy:
        for u in split_document(doc, strategy):
            for a in range(len(u.text) + 1):
                s, e = u.to_document(0, a)
                assert text[s:e] == u.text[:a]


@settings(max_examples=100, deadline=None)
@given(doc_text)
def test_parse_is_deterministic(text):
    assert dump_structure(parse_structure(text)) == dump_structure(parse_structure(text))


@pytest.mark.parametrize("name", ["heading", "table", "list", "single_bullet", "label"])
def test_reparsing_element_texts_keeps_kinds(name):
    doc = parse_structure((GOLDEN / f"{name}.txt").read_text(encoding="utf-8"))
    rebuilt = parse_structure("\n\n".join(el.text for el in doc.elements))
    assert [el.kind for el in rebuilt.elements] == [el.kind for el in doc.elements]
