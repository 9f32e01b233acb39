"""Core data model: typed columns, schemas, tables, data objects, identifiers.

All values here are immutable after construction and safe to share across
threads. A table cell is ``None`` (null) or a Python value matching its
column type; timestamps are integer microseconds since the Unix epoch, UTC.
"""

from __future__ import annotations

import enum
import math
import secrets
from dataclasses import dataclass, field

from .errors import NotFound


class ColumnType(enum.Enum):
    INT64 = "int64"
    FLOAT64 = "float64"
    STRING = "string"
    BOOL = "bool"
    TIMESTAMP = "timestamp"  # microseconds since epoch, UTC

NUMERIC_TYPES = (ColumnType.INT64, ColumnType.FLOAT64)


@dataclass(frozen=True)
class Column:
    name: str
    dtype: ColumnType
    nullable: bool = False


@dataclass(frozen=True)
class Schema:
    """Ordered, uniquely named columns. Order is significant and preserved."""

    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate column names: {dupes}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def column(self, name: str) -> Column:
        return self.columns[self.index_of(name)]

    def has(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def to_dict(self) -> list[dict]:
        return [
            {"name": c.name, "type": c.dtype.value, "nullable": c.nullable}
            for c in self.columns
        ]

    @classmethod
    def from_dict(cls, data: list[dict]) -> "Schema":
        return cls(
            tuple(
                Column(d["name"], ColumnType(d["type"]), bool(d.get("nullable", False)))
                for d in data
            )
        )


@dataclass(frozen=True)
class Table:
    """Rows of typed cells. Row order is deterministic and round-trip stable."""

    schema: Schema
    rows: tuple[tuple, ...] = ()

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def column_values(self, name: str) -> list:
        i = self.schema.index_of(name)
        return [row[i] for row in self.rows]

    def project(self, names: list[str]) -> "Table":
        """New table with the named columns, in the given order."""
        indices = [self.schema.index_of(n) for n in names]
        schema = Schema(tuple(self.schema.columns[i] for i in indices))
        rows = tuple(tuple(row[i] for i in indices) for row in self.rows)
        return Table(schema, rows)

    def slice_rows(self, start: int, stop: int) -> "Table":
        return Table(self.schema, self.rows[start:stop])


@dataclass(frozen=True)
class Violation:
    rule: str  # ragged_row | type_mismatch | int64_range | non_finite
    row: int
    column: str | None = None

    def __str__(self) -> str:
        where = f"row {self.row}" + (f", column {self.column}" if self.column else "")
        return f"{self.rule} at {where}"


_PYTHON_TYPES = {
    ColumnType.INT64: int,
    ColumnType.FLOAT64: float,
    ColumnType.STRING: str,
    ColumnType.BOOL: bool,
    ColumnType.TIMESTAMP: int,
}


def validate_table(table: Table) -> list[Violation]:
    """Check every table invariant; an empty list means the table is well formed."""
    violations: list[Violation] = []
    width = len(table.schema.columns)
    for r, row in enumerate(table.rows):
        if len(row) != width:
            violations.append(Violation("ragged_row", r))
            continue
        for c, (value, col) in enumerate(zip(row, table.schema.columns)):
            if value is None:
                continue
            expected = _PYTHON_TYPES[col.dtype]
            # bool is an int subclass; keep the two apart
            if isinstance(value, bool) and col.dtype is not ColumnType.BOOL:
                violations.append(Violation("type_mismatch", r, col.name))
            elif not isinstance(value, expected):
                violations.append(Violation("type_mismatch", r, col.name))
            elif col.dtype in (ColumnType.INT64, ColumnType.TIMESTAMP) and not (
                -(1 << 63) <= value < (1 << 63)
            ):
                violations.append(Violation("int64_range", r, col.name))
            elif col.dtype is ColumnType.FLOAT64 and not math.isfinite(value):
                violations.append(Violation("non_finite", r, col.name))
    return violations


def common_columns(schemas: list[Schema]) -> tuple[list[Column], list[str]]:
    """Columns present in every schema under the same name and type.

    Ordered by the first schema's column order; a name shared everywhere but
    with conflicting types is excluded and reported in the second element.
    Nullability widens: the result is nullable if any input column is.
    """
    if not schemas:
        raise ValueError("at least one schema required")
    shared: list[Column] = []
    conflicts: list[str] = []
    rest = [{c.name: c for c in s.columns} for s in schemas[1:]]
    for col in schemas[0].columns:
        others = [m.get(col.name) for m in rest]
        if any(o is None for o in others):
            continue
        if any(o.dtype is not col.dtype for o in others):
            conflicts.append(col.name)
            continue
        nullable = col.nullable or any(o.nullable for o in others)
        shared.append(Column(col.name, col.dtype, nullable))
    return shared, conflicts


@dataclass(frozen=True)
class SourceLink:
    """Per-object provenance: where this object's payload comes from."""

    dataset_id: str
    object_id: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"dataset": self.dataset_id, "object": self.object_id}
        if self.params:
            d["params"] = dict(self.params)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SourceLink":
        return cls(data["dataset"], data["object"], dict(data.get("params", {})))


@dataclass(frozen=True)
class DataObject:
    """One tabular data object; payload is None while the object is virtual."""

    object_id: str
    payload: Table | None = None
    labels: dict = field(default_factory=dict)
    source_link: SourceLink | None = None


def new_id(rng=None) -> str:
    """Random 128-bit identifier as 32 lowercase hex chars."""
    if rng is None:
        return secrets.token_hex(16)
    return f"{rng.getrandbits(128):032x}"


def is_valid_id(text: str) -> bool:
    return len(text) == 32 and all(ch in "0123456789abcdef" for ch in text)


class ObjectIndexEntry:
    """Catalog-side view of one object: identity, labels, provenance, stats."""

    __slots__ = ("object_id", "labels", "source_link", "row_count", "schema")

    def __init__(
        self,
        object_id: str,
        labels: dict | None = None,
        source_link: SourceLink | None = None,
        row_count: int | None = None,
        schema: Schema | None = None,
    ) -> None:
        self.object_id = object_id
        self.labels = labels or {}
        self.source_link = source_link
        self.row_count = row_count
        self.schema = schema

    def __repr__(self) -> str:  # pragma: no cover
        return f"ObjectIndexEntry({self.object_id!r}, rows={self.row_count})"


class ObjectIndex:
    """Ordered collection of index entries with id lookup."""

    def __init__(self, entries: list[ObjectIndexEntry]) -> None:
        self._entries = list(entries)
        self._by_id = {e.object_id: i for i, e in enumerate(self._entries)}
        if len(self._by_id) != len(self._entries):
            raise ValueError("object ids must be unique within a dataset")

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def entries(self) -> list[ObjectIndexEntry]:
        return list(self._entries)

    def ids(self) -> list[str]:
        return [e.object_id for e in self._entries]

    def get(self, object_id: str) -> ObjectIndexEntry:
        try:
            return self._entries[self._by_id[object_id]]
        except KeyError:
            raise NotFound(f"object {object_id!r} not in dataset") from None

    def position(self, object_id: str) -> int:
        try:
            return self._by_id[object_id]
        except KeyError:
            raise NotFound(f"object {object_id!r} not in dataset") from None

    def has(self, object_id: str) -> bool:
        return object_id in self._by_id
