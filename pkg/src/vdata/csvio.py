"""CSV dialect, cell typing, and schema inference.

Dialect (bit-exact): UTF-8, ``,`` delimiter, ``"`` quoting with doubled-quote
escape, ``\\n`` line ends, first row is the header, trailing newline after the
last row. Cell encoding per type:

- null          -> empty unquoted field
- int64         -> decimal digits
- float64       -> shortest round-trip decimal (``repr``); non-finite rejected
- bool          -> ``true`` / ``false``
- timestamp     -> ``YYYY-MM-DDTHH:MM:SS.ffffffZ`` (micros, UTC)
- string        -> raw text, quoted when it contains ``,``/``"``/newlines, is
                  empty, or would read back as another type

Quoting is meaningful on the way back in: during schema inference a quoted
cell is always a string, so serialize -> parse -> infer reproduces both cells
and column types exactly. When an explicit schema is supplied, quoting is
ignored and cells are parsed by the declared type.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

from .errors import DuplicateColumn, ParseError, RaggedRow
from .model import Column, ColumnType, Schema, Table

_INT_RE = re.compile(r"^[+-]?[0-9]+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")
_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(\.\d{1,6})?(Z|[+-]\d{2}:\d{2})$"
)

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# Inference priority: narrowest first, string as fallback.
_PRIORITY = (ColumnType.INT64, ColumnType.FLOAT64, ColumnType.BOOL, ColumnType.TIMESTAMP)


def try_parse_cell(text: str, dtype: ColumnType):
    """Strictly parse ``text`` as ``dtype``; returns the value or None on mismatch."""
    if dtype is ColumnType.INT64:
        if _INT_RE.match(text):
            v = int(text)
            if INT64_MIN <= v <= INT64_MAX:
                return v
        return None
    if dtype is ColumnType.FLOAT64:
        if _FLOAT_RE.match(text):
            return float(text)
        return None
    if dtype is ColumnType.BOOL:
        if text == "true":
            return True
        if text == "false":
            return False
        return None
    if dtype is ColumnType.TIMESTAMP:
        m = _TS_RE.match(text)
        if not m:
            return None
        year, month, day, hour, minute, sec = (int(m.group(i)) for i in range(1, 7))
        frac = m.group(7)
        micros = int((frac or ".0")[1:].ljust(6, "0"))
        tz_text = m.group(8)
        if tz_text == "Z":
            tz = timezone.utc
        else:
            sign = 1 if tz_text[0] == "+" else -1
            tz = timezone(sign * timedelta(hours=int(tz_text[1:3]), minutes=int(tz_text[4:6])))
        try:
            dt = datetime(year, month, day, hour, minute, sec, micros, tzinfo=tz)
        except ValueError:
            return None
        return (dt - _EPOCH) // timedelta(microseconds=1)
    if dtype is ColumnType.STRING:
        return text
    raise AssertionError(f"unhandled type {dtype}")


def render_cell(value, dtype: ColumnType) -> str:
    """Canonical unquoted text for one typed cell (None handled by the writer)."""
    if dtype is ColumnType.INT64:
        return str(value)
    if dtype is ColumnType.FLOAT64:
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("non-finite float64 cells cannot be serialized")
        return repr(float(value))
    if dtype is ColumnType.BOOL:
        return "true" if value else "false"
    if dtype is ColumnType.TIMESTAMP:
        dt = _EPOCH + timedelta(microseconds=int(value))
        return f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}.{dt.microsecond:06d}Z"
    if dtype is ColumnType.STRING:
        return str(value)
    raise AssertionError(f"unhandled type {dtype}")


def _reads_back_as_non_string(text: str) -> bool:
    return any(try_parse_cell(text, t) is not None for t in _PRIORITY)


def _encode_field(text: str, force_quote: bool) -> str:
    if force_quote or '"' in text or "," in text or "\n" in text or "\r" in text:
        return '"' + text.replace('"', '""') + '"'
    return text


def serialize_table(table: Table) -> bytes:
    """Canonical CSV bytes for a table (header + rows, trailing newline)."""
    out: list[str] = []
    out.append(",".join(_encode_field(c.name, _needs_quote_as_string(c.name)) for c in table.schema.columns))
    dtypes = [c.dtype for c in table.schema.columns]
    for row in table.rows:
        fields = []
        for value, dtype in zip(row, dtypes):
            if value is None:
                fields.append("")
            elif dtype is ColumnType.STRING:
                text = render_cell(value, dtype)
                fields.append(_encode_field(text, _needs_quote_as_string(text)))
            else:
                fields.append(render_cell(value, dtype))
        out.append(",".join(fields))
    return ("\n".join(out) + "\n").encode("utf-8")


def _needs_quote_as_string(text: str) -> bool:
    return text == "" or _reads_back_as_non_string(text)


def split_records(text: str) -> list[list[tuple[str, bool]]]:
    """Tokenize CSV text into records of (cell_text, was_quoted).

    Fast path splits unquoted lines directly; records containing quotes fall
    back to a character scan that honors embedded delimiters and newlines.
    """
    records: list[list[tuple[str, bool]]] = []
    i = 0
    n = len(text)
    while i < n:
        nl = text.find("\n", i)
        if nl == -1:
            nl = n
        line = text[i : nl]
        if '"' not in line:
            if line or records == [] or nl < n:
                # skip a single trailing empty line produced by the final \n
                if line == "" and nl == n:
                    break
                records.append([(cell, False) for cell in line.split(",")])
            i = nl + 1
            continue
        # slow path: scan from i, record may span newlines inside quotes
        record: list[tuple[str, bool]] = []
        buf: list[str] = []
        quoted = False
        in_quotes = False
        j = i
        while j < n:
            ch = text[j]
            if in_quotes:
                if ch == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    in_quotes = False
                    j += 1
                    continue
                buf.append(ch)
                j += 1
                continue
            if ch == '"':
                if buf:
                    raise ParseError(f"unexpected quote inside unquoted field at offset {j}")
                in_quotes = True
                quoted = True
                j += 1
                continue
            if ch == ",":
                record.append(("".join(buf), quoted))
                buf = []
                quoted = False
                j += 1
                continue
            if ch == "\n":
                break
            buf.append(ch)
            j += 1
        if in_quotes:
            raise ParseError("unterminated quoted field")
        record.append(("".join(buf), quoted))
        records.append(record)
        i = j + 1
    return records


def infer_schema(header_names: list[str], sample_rows: list[tuple[str, ...]]) -> Schema:
    """Infer the narrowest schema that admits every sampled cell.

    Empty cells are ignored for typing and mark the column nullable. A column
    with no non-empty samples falls back to nullable string.
    """
    cells = [tuple((c, False) for c in row) for row in sample_rows]
    return _infer_from_cells(header_names, cells)


def _infer_from_cells(
    header_names: list[str], rows: list[tuple[tuple[str, bool], ...]]
) -> Schema:
    if not header_names:
        raise ParseError("header must name at least one column")
    seen: set[str] = set()
    for name in header_names:
        if name in seen:
            raise DuplicateColumn(f"duplicate column {name!r}", name=name)
        seen.add(name)
    width = len(header_names)
    candidates = [list(_PRIORITY) for _ in range(width)]
    nullable = [False] * width
    saw_value = [False] * width
    for idx, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRow(f"row {idx} has {len(row)} cells, expected {width}", index=idx)
        for col, (text, was_quoted) in enumerate(row):
            if text == "" and not was_quoted:
                nullable[col] = True
                continue
            saw_value[col] = True
            if was_quoted:
                candidates[col] = []
                continue
            candidates[col] = [t for t in candidates[col] if try_parse_cell(text, t) is not None]
    columns = []
    for col, name in enumerate(header_names):
        if not saw_value[col]:
            dtype = ColumnType.STRING
        else:
            dtype = candidates[col][0] if candidates[col] else ColumnType.STRING
        columns.append(Column(name, dtype, nullable[col]))
    return Schema(tuple(columns))


def parse_table(data: bytes | str, schema: Schema | None = None) -> Table:
    """Parse CSV into a typed table, inferring the schema when none is given."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    records = split_records(text)
    if not records:
        raise ParseError("empty document: header row required")
    header = [cell for cell, _ in records[0]]
    body = records[1:]
    if schema is None:
        schema = _infer_from_cells(header, [tuple(r) for r in body])
    else:
        if header != [c.name for c in schema.columns]:
            raise ParseError(f"header {header!r} does not match schema")
    width = len(schema.columns)
    rows = []
    for idx, record in enumerate(body):
        if len(record) != width:
            raise RaggedRow(f"row {idx} has {len(record)} cells, expected {width}", index=idx)
        row = []
        for col, (text, was_quoted) in enumerate(record):
            dtype = schema.columns[col].dtype
            if text == "" and not was_quoted:
                row.append(None)
                continue
            if dtype is ColumnType.STRING:
                row.append(text)
                continue
            value = try_parse_cell(text, dtype)
            if value is None:
                raise ParseError(
                    f"row {idx}, column {schema.columns[col].name!r}: "
                    f"{text!r} is not a valid {dtype.value}",
                    row=idx,
                    column=schema.columns[col].name,
                )
            row.append(value)
        rows.append(tuple(row))
    return Table(schema, tuple(rows))
