"""Recover headings, tables, lists and paragraphs from flattened label text.

Drug labels arrive as plain text with the original layout flattened away.
:func:`parse_structure` rebuilds a flat sequence of typed elements using line
heuristics, and :func:`split_document` turns the elements into text units for
the taggers, either one unit per element or one unit per cell / list item.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

__all__ = [
    "ElementKind",
    "RowRole",
    "SplitStrategy",
    "Cell",
    "Row",
    "Table",
    "ListItem",
    "ListElement",
    "DocumentElement",
    "StructuredDocument",
    "TextUnit",
    "parse_structure",
    "classify_table_rows",
    "split_cells",
    "split_document",
    "dump_structure",
]

HEADING_RE = re.compile(r"^\s*\d{1,3}(?:\.\d{1,3}){0,3}\.?[ \t]+[A-Z]\S*")
CAPTION_RE = re.compile(r"^\s*Table\s+\S+\.")
LIST_ITEM_RE = re.compile(r"^(\s*\*+\s*)(.*)$")
CELL_SPLIT_RE = re.compile(r" {2,}")
FOOTNOTE_MARKERS = "†‡§¶*"
NUMERIC_CHARS = set("0123456789%.()-")


class ElementKind(str, enum.Enum):
    HEADING = "Heading"
    TABLE = "Table"
    LIST = "List"
    PARAGRAPH = "Paragraph"


class RowRole(str, enum.Enum):
    CAPTION = "caption"
    HEADER = "header"
    CONTENT = "content"
    FOOTER = "footer"


class SplitStrategy(str, enum.Enum):
    WHOLE_ELEMENT = "whole"
    SUB_ELEMENT = "sub"


Extent = tuple[int, int]


@dataclass(frozen=True)
class Cell:
    text: str
    extent: Extent

    @property
    def is_numeric(self) -> bool:
        chars = [c for c in self.text if not c.isspace()]
        if not chars:
            return False
        return sum(c in NUMERIC_CHARS for c in chars) * 2 >= len(chars)


@dataclass(frozen=True)
class Row:
    cells: tuple[Cell, ...]
    extent: Extent

    @property
    def text(self) -> str:
        return "\t".join(c.text for c in self.cells)

    def numeric_fraction(self) -> float:
        if not self.cells:
            return 0.0
        return sum(c.is_numeric for c in self.cells) / len(self.cells)


@dataclass(frozen=True)
class Table:
    caption_rows: tuple[Row, ...] = ()
    header_rows: tuple[Row, ...] = ()
    content_rows: tuple[Row, ...] = ()
    footer_rows: tuple[Row, ...] = ()

    def rows(self) -> Iterator[tuple[RowRole, Row]]:
        for role, rows in (
            (RowRole.CAPTION, self.caption_rows),
            (RowRole.HEADER, self.header_rows),
            (RowRole.CONTENT, self.content_rows),
            (RowRole.FOOTER, self.footer_rows),
        ):
            for row in rows:
                yield role, row


@dataclass(frozen=True)
class ListItem:
    text: str
    extent: Extent


@dataclass(frozen=True)
class ListElement:
    items: tuple[ListItem, ...]

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError("a list needs at least two items")


@dataclass(frozen=True)
class DocumentElement:
    kind: ElementKind
    extent: Extent
    text: str
    payload: Table | ListElement | None = None


@dataclass(frozen=True)
class StructuredDocument:
    text: str
    elements: tuple[DocumentElement, ...] = field(default=())


@dataclass(frozen=True)
class TextUnit:
    """A contiguous slice of a document handed to a tagger.

    ``offset_map[i]`` is the document offset of local character ``i``.
    """

    text: str
    start: int
    element_index: int = 0
    sub_index: int = 0
    kind: str = ""

    @property
    def end(self) -> int:
        return self.start + len(self.text)

    @property
    def offset_map(self) -> range:
        return range(self.start, self.end)

    def to_document(self, local_start: int, local_end: int) -> Extent:
        return self.start + local_start, self.start + local_end

    def to_local(self, doc_start: int, doc_end: int) -> Extent:
        return doc_start - self.start, doc_end - self.start


# ---------------------------------------------------------------------------
# line utilities


@dataclass(frozen=True)
class _Line:
    text: str  # stripped content
    extent: Extent  # tight extent of the stripped content

    @property
    def blank(self) -> bool:
        return not self.text


def _lines(text: str) -> list[_Line]:
    lines = []
    pos = 0
    for raw in text.split("\n"):
        stripped = raw.strip()
        if stripped:
            lead = len(raw) - len(raw.lstrip())
            start = pos + lead
            lines.append(_Line(stripped, (start, start + len(stripped))))
        else:
            lines.append(_Line("", (pos, pos)))
        pos += len(raw) + 1
    return lines


def _blocks(lines: Sequence[_Line]) -> list[list[_Line]]:
    """Group non-blank lines; any blank line counts as a paragraph separator.

    A single newline never produces a blank line, so two consecutive newline
    characters (optionally with whitespace between) are the minimal separator.
    """
    blocks: list[list[_Line]] = []
    current: list[_Line] = []
    for line in lines:
        if line.blank:
            if current:
                blocks.append(current)
                current = []
        else:
            current.append(line)
    if current:
        blocks.append(current)
    return blocks


def _tight(text: str, start: int, end: int) -> Extent:
    chunk = text[start:end]
    lead = len(chunk) - len(chunk.lstrip())
    trail = len(chunk) - len(chunk.rstrip())
    return start + lead, end - trail


def split_cells(text: str, extent: Extent) -> tuple[Cell, ...]:
    """Split one row into cells on tabs, or on runs of 2+ spaces when there are no tabs."""
    start, end = extent
    line = text[start:end]
    if "\t" in line:
        pieces = [(m.start(), m.end()) for m in re.finditer(r"[^\t]+", line)]
    else:
        pieces = []
        pos = 0
        for m in CELL_SPLIT_RE.finditer(line):
            pieces.append((pos, m.start()))
            pos = m.end()
        pieces.append((pos, len(line)))
    cells = []
    for a, b in pieces:
        s, e = _tight(text, start + a, start + b)
        if s < e:
            cells.append(Cell(text[s:e], (s, e)))
    return tuple(cells)


def _is_heading(line: _Line) -> bool:
    return bool(HEADING_RE.match(line.text))


def _is_caption(line: _Line) -> bool:
    return bool(CAPTION_RE.match(line.text))


def _is_bullet(line: _Line) -> bool:
    return line.text.startswith("*")


# ---------------------------------------------------------------------------
# tables


def _whole_row(text: str, extent: Extent) -> Row:
    return Row((Cell(text[extent[0]:extent[1]], extent),), extent)


def classify_table_rows(candidate_lines: Sequence[tuple[str, Extent]], text: str | None = None) -> Table:
    """Assign caption/header/content/footer roles to table row candidates.

    *candidate_lines* are ``(line_text, extent)`` pairs whose first entry is
    the caption trigger.  When *text* (the full document) is given, cell
    extents are document offsets; otherwise they are relative to a string
    in which each line sits at its stated extent.
    """
    if not candidate_lines:
        return Table()
    if text is None:
        size = max(e for _, (_, e) in candidate_lines)
        buf = [" "] * size
        for line, (s, _) in candidate_lines:
            buf[s:s + len(line)] = line
        text = "".join(buf)

    rows = [split_cells(text, extent) for _, extent in candidate_lines]
    rows = [Row(cells, extent) if cells else _whole_row(text, extent)
            for cells, (_, extent) in zip(rows, candidate_lines)]

    caption = [_whole_row(text, rows[0].extent)]
    rest = rows[1:]
    multi = [i for i, r in enumerate(rest) if len(r.cells) >= 2]
    if not multi:
        cut = next((i for i, r in enumerate(rest) if r.cells[0].text[:1] in FOOTNOTE_MARKERS), len(rest))
        caption += [_whole_row(text, r.extent) for r in rest[:cut]]
        footer = [_whole_row(text, r.extent) for r in rest[cut:]]
        return Table(tuple(caption), (), (), tuple(footer))

    first, last = multi[0], multi[-1]
    caption += [_whole_row(text, r.extent) for r in rest[:first]]
    body = rest[first:last + 1]
    footer = [_whole_row(text, r.extent) for r in rest[last + 1:]]

    first_numeric = next((i for i, r in enumerate(body) if r.numeric_fraction() > 0.5), None)
    n_header = 0
    for i, row in enumerate(body):
        if first_numeric is not None and i >= first_numeric:
            break
        if len(row.cells) < 2 or row.numeric_fraction() >= 0.2:
            break
        n_header += 1
    if first_numeric is None and n_header == len(body) and len(body) > 1:
        n_header = 1
    header = body[:n_header]
    content = body[n_header:]
    return Table(tuple(caption), tuple(header), tuple(content), tuple(footer))


# ---------------------------------------------------------------------------
# document parsing


def _element(kind: ElementKind, text: str, start: int, end: int, payload=None) -> DocumentElement:
    return DocumentElement(kind, (start, end), text[start:end], payload)


def parse_structure(text: str) -> StructuredDocument:
    """Parse *text* into an ordered tuple of non-overlapping elements.

    Rules, applied line by line inside blank-line separated blocks:

    * a numbered title line (``5.1 Asthma-Related Death``) is a heading;
    * a line starting ``Table NUM.`` opens a table that runs to the end of
      its block;
    * two or more consecutive lines starting with ``*`` form a list;
    * everything else accumulates into paragraphs.
    """
    elements: list[DocumentElement] = []
    for block in _blocks(_lines(text)):
        para: list[_Line] = []

        def flush():
            if para:
                elements.append(_element(ElementKind.PARAGRAPH, text, para[0].extent[0], para[-1].extent[1]))
                para.clear()

        i = 0
        while i < len(block):
            line = block[i]
            if _is_caption(line):
                flush()
                cands = [(ln.text, ln.extent) for ln in block[i:]]
                table = classify_table_rows(cands, text)
                elements.append(_element(ElementKind.TABLE, text, line.extent[0], block[-1].extent[1], table))
                break
            if _is_heading(line):
                flush()
                elements.append(_element(ElementKind.HEADING, text, *line.extent))
                i += 1
                continue
            if _is_bullet(line) and i + 1 < len(block) and _is_bullet(block[i + 1]):
                flush()
                j = i
                items = []
                while j < len(block) and _is_bullet(block[j]):
                    m = LIST_ITEM_RE.match(block[j].text)
                    s = block[j].extent[0] + len(m.group(1))
                    e = block[j].extent[1]
                    if s >= e:  # bare asterisk: keep the marker as item text
                        s = block[j].extent[0]
                    items.append(ListItem(text[s:e], (s, e)))
                    j += 1
                elements.append(_element(ElementKind.LIST, text, line.extent[0], block[j - 1].extent[1],
                                         ListElement(tuple(items))))
                i = j
                continue
            para.append(line)
            i += 1
        flush()
    return StructuredDocument(text, tuple(elements))


# ---------------------------------------------------------------------------
# splitting


def split_document(doc: StructuredDocument, strategy: SplitStrategy | str = SplitStrategy.WHOLE_ELEMENT) -> list[TextUnit]:
    strategy = SplitStrategy(strategy)
    units = []
    for idx, el in enumerate(doc.elements):
        if strategy is SplitStrategy.WHOLE_ELEMENT or el.kind in (ElementKind.HEADING, ElementKind.PARAGRAPH):
            units.append(TextUnit(el.text, el.extent[0], idx, 0, el.kind.value))
            continue
        pieces: list[Extent] = []
        if el.kind is ElementKind.LIST:
            pieces = [item.extent for item in el.payload.items]
        else:
            for role, row in el.payload.rows():
                if role in (RowRole.CAPTION, RowRole.FOOTER):
                    pieces.append(row.extent)
                else:
                    pieces.extend(cell.extent for cell in row.cells)
        for sub, (s, e) in enumerate(pieces):
            units.append(TextUnit(doc.text[s:e], s, idx, sub, el.kind.value))
    return units


# ---------------------------------------------------------------------------
# dumping


def _node(text: str, extent: Extent, **extra) -> dict:
    node = {"extent": list(extent), "text": text}
    node.update(extra)
    return node


def structure_to_dict(doc: StructuredDocument) -> dict:
    out = []
    for el in doc.elements:
        node: dict = {"kind": el.kind.value, "extent": list(el.extent)}
        if el.kind is ElementKind.TABLE:
            node["children"] = [
                {"role": role.value, "extent": list(row.extent),
                 "children": [_node(c.text, c.extent) for c in row.cells]}
                for role, row in el.payload.rows()
            ]
        elif el.kind is ElementKind.LIST:
            node["children"] = [_node(item.text, item.extent) for item in el.payload.items]
        else:
            node["text"] = el.text
        out.append(node)
    return {"length": len(doc.text), "elements": out}


def dump_structure(doc: StructuredDocument) -> str:
    """Render *doc* as indented JSON; stable byte-for-byte for golden tests."""
    return json.dumps(structure_to_dict(doc), indent=2, ensure_ascii=False) + "\n"
