"""Read-only access to explicit datasets: local CSV directories and in-memory fixtures.

URI forms: ``file:///abs/path/dir`` and ``mem://fixture-name``. Virtualization
never mutates source data; a content fingerprint taken at registration is
verified on every read so silent source edits surface as SourceChanged instead
of corrupt caches.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

from .csvio import parse_table, serialize_table, split_records
from .errors import NotFound, ParseError, RaggedRow, SourceChanged, UnreadableSource, VdataError
from .model import Schema, Table, Violation
from .rng import fnv1a64


@dataclass(frozen=True)
class ObjectStat:
    """Listing-time facts about one stored object."""

    object_id: str
    byte_size: int
    row_count: int
    schema: Schema | None
    fingerprint: str  # 16 hex chars, FNV-1a over the raw bytes
    warnings: tuple[str, ...] = ()


def fingerprint_bytes(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


def _stat_from_bytes(object_id: str, data: bytes) -> ObjectStat:
    fp = fingerprint_bytes(data)
    try:
        table = parse_table(data)
        return ObjectStat(object_id, len(data), table.row_count, table.schema, fp)
    except RaggedRow as exc:
        warning = str(Violation("ragged_row", exc.details.get("index", -1)))
    except VdataError as exc:
        warning = str(exc)
    rows = max(len(split_records_safe(data)) - 1, 0)
    return ObjectStat(object_id, len(data), rows, None, fp, warnings=(warning,))


def split_records_safe(data: bytes) -> list:
    try:
        return split_records(data.decode("utf-8"))
    except (UnicodeDecodeError, VdataError):
        return []


class FileAdapter:
    scheme = "file"

    @staticmethod
    def _dir(uri: str) -> Path:
        if not uri.startswith("file://"):
            raise UnreadableSource(f"not a file URI: {uri!r}", uri=uri)
        path = Path(uri[len("file://") :])
        if not path.is_dir():
            raise UnreadableSource(f"{path} is not a readable directory", uri=uri)
        return path

    def list_objects(self, uri: str) -> list[ObjectStat]:
        path = self._dir(uri)
        stats = []
        for entry in sorted(path.glob("*.csv"), key=lambda p: p.stem):
            stats.append(_stat_from_bytes(entry.stem, entry.read_bytes()))
        return stats

    def read_bytes(self, uri: str, object_id: str) -> bytes:
        path = self._dir(uri) / f"{object_id}.csv"
        if not path.is_file():
            raise NotFound(f"object {object_id!r} not found under {uri}", object_id=object_id)
        return path.read_bytes()


class MemAdapter:
    """Named in-memory fixtures, mainly for tests and demos."""

    scheme = "mem"

    def __init__(self) -> None:
        self._fixtures: dict[str, dict[str, bytes]] = {}

    def put_fixture(self, name: str, objects: dict[str, Table | bytes]) -> str:
        self._fixtures[name] = {
            oid: (value if isinstance(value, bytes) else serialize_table(value))
            for oid, value in objects.items()
        }
        return f"mem://{name}"

    def _fixture(self, uri: str) -> dict[str, bytes]:
        name = uri[len("mem://") :]
        if name not in self._fixtures:
            raise UnreadableSource(f"no fixture named {name!r}", uri=uri)
        return self._fixtures[name]

    def list_objects(self, uri: str) -> list[ObjectStat]:
        objects = self._fixture(uri)
        return [_stat_from_bytes(oid, objects[oid]) for oid in sorted(objects)]

    def read_bytes(self, uri: str, object_id: str) -> bytes:
        objects = self._fixture(uri)
        if object_id not in objects:
            raise NotFound(f"object {object_id!r} not found under {uri}", object_id=object_id)
        return objects[object_id]


@dataclass
class Storage:
    """Scheme router with a small parsed-table cache.

    Adapters are stateless with respect to reads; concurrent reads are safe.
    The memo keeps recently parsed tables keyed by content fingerprint, so a
    hit can never serve stale data.
    """

    memo_capacity: int = 16
    _mem: MemAdapter = field(default_factory=MemAdapter)
    _file: FileAdapter = field(default_factory=FileAdapter)

    def __post_init__(self) -> None:
        self._memo: OrderedDict[tuple, Table] = OrderedDict()
        self._lock = threading.Lock()

    def _adapter(self, uri: str):
        if uri.startswith("file://"):
            return self._file
        if uri.startswith("mem://"):
            return self._mem
        raise UnreadableSource(f"unsupported URI scheme: {uri!r}", uri=uri)

    def put_fixture(self, name: str, objects: dict[str, Table | bytes]) -> str:
        return self._mem.put_fixture(name, objects)

    def list_objects(self, uri: str) -> list[ObjectStat]:
        return self._adapter(uri).list_objects(uri)

    def read_object(
        self, uri: str, object_id: str, expected_fingerprint: str | None = None
    ) -> Table:
        data = self._adapter(uri).read_bytes(uri, object_id)
        fp = fingerprint_bytes(data)
        if expected_fingerprint is not None and fp != expected_fingerprint:
            raise SourceChanged(
                f"object {object_id!r} under {uri} changed since registration",
                object_id=object_id,
                expected=expected_fingerprint,
                got=fp,
            )
        key = (uri, object_id, fp)
        with self._lock:
            if key in self._memo:
                self._memo.move_to_end(key)
                return self._memo[key]
        try:
            table = parse_table(data)
        except VdataError as exc:
            raise ParseError(f"object {object_id!r}: {exc}", object_id=object_id) from exc
        with self._lock:
            self._memo[key] = table
            while len(self._memo) > self.memo_capacity:
                self._memo.popitem(last=False)
        return table
