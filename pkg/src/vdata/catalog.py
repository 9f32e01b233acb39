"""Dataset catalog: registry of explicit and virtual datasets plus lineage.

The catalog holds full knowledge of every dataset: explicit ones point at a
storage URI, virtual ones carry their spec and a per-object index derived
without materializing any payload. Mutations append to a human-inspectable
log (``catalog/records.log``); ``catalog/snapshot.yaml`` mirrors current state
for audit. The log is authoritative on load.

Windowed datasets would dominate the log if every segment were written out
(a 100k-row series at stride 1 yields ~100k segments), so their index is
persisted compactly as (source object, length) pairs and segment entries are
regenerated on demand from the pinned id derivation.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import (
    CycleDetected,
    EmptyDataset,
    HasDependents,
    NotFound,
    ParamError,
    UnreadableSource,
    ValidationStale,
)
from .model import ObjectIndex, ObjectIndexEntry, Schema, SourceLink, new_id
from .ssvd import ValidatedSpec, VirtualDatasetSpec, parse_spec, spec_to_dict, validate_spec
from .storage import Storage
from .transforms import InputView, Registry, window_count, window_object_id
from .csvio import parse_table


@dataclass(frozen=True)
class WindowSource:
    object_id: str
    row_count: int
    labels: dict
    schema: Schema | None


class WindowedIndex:
    """Segment index generated lazily from per-source row counts."""

    def __init__(self, input_dataset_id: str, w: int, stride: int, sources: list[WindowSource]):
        self.input_dataset_id = input_dataset_id
        self.w = w
        self.stride = stride
        self.sources = list(sources)
        self._total = sum(window_count(s.row_count, w, stride) for s in self.sources)
        self._built: ObjectIndex | None = None
        self._lock = threading.Lock()

    def _entries_for(self, source: WindowSource):
        for k in range(window_count(source.row_count, self.w, self.stride)):
            offset = k * self.stride
            yield ObjectIndexEntry(
                object_id=window_object_id(source.object_id, offset, self.w),
                labels=dict(source.labels),
                source_link=SourceLink(
                    self.input_dataset_id,
                    source.object_id,
                    {"offset": offset, "length": self.w},
                ),
                row_count=self.w,
                schema=source.schema,
            )

    def _index(self) -> ObjectIndex:
        with self._lock:
            if self._built is None:
                entries = [e for s in self.sources for e in self._entries_for(s)]
                self._built = ObjectIndex(entries)
            return self._built

    def __len__(self) -> int:
        return self._total

    def __iter__(self):
        for s in self.sources:
            yield from self._entries_for(s)

    def entries(self) -> list[ObjectIndexEntry]:
        return self._index().entries()

    def ids(self) -> list[str]:
        return [e.object_id for e in self]

    def get(self, object_id: str) -> ObjectIndexEntry:
        return self._index().get(object_id)

    def position(self, object_id: str) -> int:
        return self._index().position(object_id)

    def has(self, object_id: str) -> bool:
        return self._index().has(object_id)


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    kind: str  # explicit | virtual
    name: str
    created_at: float
    creator: str
    status: str  # active | removed
    seq: int
    metadata: dict = field(default_factory=dict)
    # explicit datasets
    uri: str | None = None
    format: str | None = None
    fingerprints: dict = field(default_factory=dict)
    # virtual datasets
    spec: VirtualDatasetSpec | None = None
    input_ids: tuple[str, ...] = ()
    index: ObjectIndex | WindowedIndex | None = None

    @property
    def transform_id(self) -> str | None:
        return self.spec.transform.transform_id if self.spec else None

    @property
    def object_count(self) -> int:
        return len(self.index) if self.index is not None else 0


@dataclass(frozen=True)
class LineageGraph:
    nodes: frozenset
    edges: frozenset  # (from_id, to_id, via_transform, input_position)

    def to_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": [
                {"from": f, "to": t, "via": v, "input_position": p}
                for f, t, v, p in sorted(self.edges)
            ],
        }


def _schema_intern(schemas: list, memo: dict, schema: Schema | None) -> int:
    if schema is None:
        return -1
    key = tuple((c.name, c.dtype.value, c.nullable) for c in schema.columns)
    if key not in memo:
        memo[key] = len(schemas)
        schemas.append(schema.to_dict())
    return memo[key]


def _index_to_dict(index) -> dict:
    schemas: list = []
    memo: dict = {}
    if isinstance(index, WindowedIndex):
        sources = [
            {
                "id": s.object_id,
                "rows": s.row_count,
                "labels": s.labels,
                "s": _schema_intern(schemas, memo, s.schema),
            }
            for s in index.sources
        ]
        return {
            "kind": "windowed",
            "input": index.input_dataset_id,
            "w": index.w,
            "stride": index.stride,
            "sources": sources,
            "schemas": schemas,
        }
    entries = []
    for e in index:
        item = {"id": e.object_id, "s": _schema_intern(schemas, memo, e.schema)}
        if e.labels:
            item["labels"] = e.labels
        if e.source_link is not None:
            item["link"] = e.source_link.to_dict()
        if e.row_count is not None:
            item["rows"] = e.row_count
        entries.append(item)
    return {"kind": "list", "entries": entries, "schemas": schemas}


def _index_from_dict(data: dict):
    schemas = [Schema.from_dict(s) for s in data.get("schemas", [])]

    def schema_at(i: int) -> Schema | None:
        return None if i < 0 else schemas[i]

    if data["kind"] == "windowed":
        sources = [
            WindowSource(s["id"], s["rows"], dict(s.get("labels", {})), schema_at(s["s"]))
            for s in data["sources"]
        ]
        return WindowedIndex(data["input"], data["w"], data["stride"], sources)
    entries = [
        ObjectIndexEntry(
            object_id=item["id"],
            labels=dict(item.get("labels", {})),
            source_link=SourceLink.from_dict(item["link"]) if "link" in item else None,
            row_count=item.get("rows"),
            schema=schema_at(item["s"]),
        )
        for item in data["entries"]
    ]
    return ObjectIndex(entries)


def _record_to_dict(record: DatasetRecord) -> dict:
    doc: dict = {
        "id": record.id,
        "kind": record.kind,
        "name": record.name,
        "created_at": record.created_at,
        "creator": record.creator,
        "status": record.status,
        "seq": record.seq,
    }
    if record.metadata:
        doc["metadata"] = record.metadata
    if record.kind == "explicit":
        doc["uri"] = record.uri
        doc["format"] = record.format
        doc["fingerprints"] = record.fingerprints
    else:
        doc["spec"] = spec_to_dict(record.spec)
        doc["input_ids"] = list(record.input_ids)
    doc["index"] = _index_to_dict(record.index)
    return doc


def _record_from_dict(doc: dict) -> DatasetRecord:
    spec = None
    if "spec" in doc:
        spec = parse_spec(yaml.safe_dump(doc["spec"], sort_keys=True))
    return DatasetRecord(
        id=doc["id"],
        kind=doc["kind"],
        name=doc["name"],
        created_at=doc["created_at"],
        creator=doc["creator"],
        status=doc["status"],
        seq=doc["seq"],
        metadata=dict(doc.get("metadata", {})),
        uri=doc.get("uri"),
        format=doc.get("format"),
        fingerprints=dict(doc.get("fingerprints", {})),
        spec=spec,
        input_ids=tuple(doc.get("input_ids", ())),
        index=_index_from_dict(doc["index"]),
    )


class Catalog:
    """Thread-safe dataset registry with optimistic validation.

    Readers take the lock only long enough to copy references; records are
    immutable, so a returned record is always a consistent snapshot. Writes
    are serialized. ``id_seed`` makes identifier minting reproducible, which
    keeps replayed sessions comparable in tests.
    """

    def __init__(
        self,
        storage: Storage,
        registry: Registry,
        data_dir: str | Path | None = None,
        id_seed: int | None = None,
        creator: str = "anonymous",
    ) -> None:
        self.storage = storage
        self.registry = registry
        self.creator = creator
        self._records: dict[str, DatasetRecord] = {}
        self._children: dict[str, set] = {}
        self._generation = 0
        self._seq = 0
        self._lock = threading.RLock()
        self._rng = random.Random(id_seed) if id_seed is not None else None
        self._data_dir = Path(data_dir) if data_dir else None
        self._log_path = None
        if self._data_dir:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            self._log_path = self._data_dir / "records.log"
            if self._log_path.exists():
                self._replay_log()

    # -- identifiers --------------------------------------------------------

    def _mint_id(self) -> str:
        while True:
            candidate = new_id(self._rng)
            if candidate not in self._records:
                return candidate

    def _mint_object_id(self) -> str:
        return new_id(self._rng)

    # -- persistence ---------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self._log_path is None:
            return
        payload = yaml.safe_dump(event, sort_keys=True, allow_unicode=True, width=4096).encode()
        with open(self._log_path, "ab") as fh:
            fh.write(f"{len(payload)}\n".encode())
            fh.write(payload)
            fh.write(b"\n")

    def _replay_log(self) -> None:
        data = self._log_path.read_bytes()
        pos = 0
        while pos < len(data):
            nl = data.index(b"\n", pos)
            length = int(data[pos:nl])
            start = nl + 1
            event = yaml.safe_load(data[start : start + length].decode())
            pos = start + length + 1  # trailing newline
            self._apply_event(event, logging=False)

    def _apply_event(self, event: dict, logging: bool = True) -> None:
        if event["event"] in ("register", "create"):
            record = _record_from_dict(event["record"])
            self._insert(record, logging=logging, event_name=event["event"])
        elif event["event"] == "remove":
            for rid in event["ids"]:
                self._records[rid] = replace(self._records[rid], status="removed")
            self._generation += 1
            if logging:
                self._append_event(event)
        else:  # pragma: no cover
            raise ValueError(f"unknown event {event['event']!r}")

    def _insert(self, record: DatasetRecord, logging: bool = True, event_name: str = "create") -> None:
        self._records[record.id] = record
        self._children.setdefault(record.id, set())
        for parent in record.input_ids:
            self._children.setdefault(parent, set()).add(record.id)
        self._seq = max(self._seq, record.seq + 1)
        self._generation += 1
        if logging:
            self._append_event({"event": event_name, "record": _record_to_dict(record)})

    def save(self) -> None:
        """Refresh the human-readable snapshot (the log stays authoritative)."""
        if self._data_dir is None:
            return
        with self._lock:
            records = [
                _record_to_dict(r) for r in sorted(self._records.values(), key=lambda r: r.seq)
            ]
        snapshot = {"generation": self._generation, "records": records}
        path = self._data_dir / "snapshot.yaml"
        path.write_text(yaml.safe_dump(snapshot, sort_keys=True, allow_unicode=True, width=4096))

    # -- queries -------------------------------------------------------------

    @property
    def generation(self) -> int:
        return self._generation

    def resolve_ref(self, target: str) -> DatasetRecord | None:
        with self._lock:
            record = self._records.get(target)
            if record is not None:
                return record if record.status == "active" else None
            for r in self._records.values():
                if r.status == "active" and r.kind == "explicit" and r.uri == target:
                    return r
        return None

    def get(self, dataset_id: str) -> DatasetRecord:
        with self._lock:
            record = self._records.get(dataset_id)
        if record is None or record.status != "active":
            raise NotFound(f"dataset {dataset_id!r} not found", dataset_id=dataset_id)
        return record

    def get_any(self, dataset_id: str) -> DatasetRecord:
        with self._lock:
            record = self._records.get(dataset_id)
        if record is None:
            raise NotFound(f"dataset {dataset_id!r} not found", dataset_id=dataset_id)
        return record

    def search(
        self,
        name: str | None = None,
        label: tuple[str, str] | None = None,
        kind: str | None = None,
        transform_id: str | None = None,
        creator: str | None = None,
    ) -> list[DatasetRecord]:
        with self._lock:
            records = list(self._records.values())
        out = []
        for r in records:
            if r.status != "active":
                continue
            if name is not None and name not in r.name:
                continue
            if kind is not None and r.kind != kind:
                continue
            if transform_id is not None and r.transform_id != transform_id:
                continue
            if creator is not None and r.creator != creator:
                continue
            if label is not None:
                key, value = label
                in_meta = str(r.metadata.get(key)) == value if key in r.metadata else False
                in_objects = any(e.labels.get(key) == value for e in r.index)
                if not (in_meta or in_objects):
                    continue
            out.append(r)
        out.sort(key=lambda r: (r.created_at, r.seq))
        return out

    def lineage(self, dataset_id: str, direction: str = "backward", depth: int | None = None) -> LineageGraph:
        with self._lock:
            if dataset_id not in self._records:
                raise NotFound(f"dataset {dataset_id!r} not found", dataset_id=dataset_id)
            nodes = {dataset_id}
            edges = set()
            frontier = [dataset_id]
            level = 0
            while frontier and (depth is None or level < depth):
                level += 1
                next_frontier = []
                for rid in frontier:
                    record = self._records[rid]
                    if direction == "backward":
                        for pos, parent in enumerate(record.input_ids):
                            edges.add((parent, rid, record.transform_id, pos))
                            if parent not in nodes:
                                nodes.add(parent)
                                next_frontier.append(parent)
                    else:
                        for child_id in self._children.get(rid, ()):
                            child = self._records[child_id]
                            for pos, parent in enumerate(child.input_ids):
                                if parent == rid:
                                    edges.add((rid, child_id, child.transform_id, pos))
                            if child_id not in nodes:
                                nodes.add(child_id)
                                next_frontier.append(child_id)
                frontier = next_frontier
            return LineageGraph(frozenset(nodes), frozenset(edges))

    def active_dependents(self, dataset_id: str) -> list[str]:
        with self._lock:
            out = []
            seen = {dataset_id}
            frontier = [dataset_id]
            while frontier:
                rid = frontier.pop()
                for child in self._children.get(rid, ()):
                    if child in seen:
                        continue
                    seen.add(child)
                    if self._records[child].status == "active":
                        out.append(child)
                    frontier.append(child)
            return out

    # -- mutations -----------------------------------------------------------

    def register_explicit(
        self,
        uri: str,
        format: str = "csv-dir",
        name: str = "",
        labels_file: str | Path | None = None,
        metadata: dict | None = None,
        creator: str | None = None,
    ) -> str:
        if format != "csv-dir":
            raise UnreadableSource(f"unsupported format {format!r}", format=format)
        stats = self.storage.list_objects(uri)
        if not stats:
            raise EmptyDataset(f"no objects found under {uri}", uri=uri)
        labels = _load_labels(labels_file) if labels_file else {}
        warnings = {s.object_id: list(s.warnings) for s in stats if s.warnings}
        meta = dict(metadata or {})
        if warnings:
            meta["warnings"] = warnings
        entries = [
            ObjectIndexEntry(
                object_id=s.object_id,
                labels=labels.get(s.object_id, {}),
                source_link=None,
                row_count=s.row_count,
                schema=s.schema,
            )
            for s in stats
        ]
        with self._lock:
            record = DatasetRecord(
                id=self._mint_id(),
                kind="explicit",
                name=name,
                created_at=time.time(),
                creator=creator or self.creator,
                status="active",
                seq=self._seq,
                metadata=meta,
                uri=uri,
                format=format,
                fingerprints={s.object_id: s.fingerprint for s in stats},
                index=ObjectIndex(entries),
            )
            self._insert(record, event_name="register")
            return record.id

    def create_virtual(self, validated: ValidatedSpec, creator: str | None = None) -> str:
        spec = validated.spec
        with self._lock:
            if validated.catalog_generation != self._generation:
                raise ValidationStale(
                    f"catalog moved from generation {validated.catalog_generation} to {self._generation}"
                )
            new_dataset_id = self._mint_id()
            if new_dataset_id in validated.input_ids:
                raise CycleDetected("dataset would be its own ancestor", dataset_id=new_dataset_id)
            views = []
            for input_id in validated.input_ids:
                record = self._records.get(input_id)
                if record is None or record.status != "active":
                    raise ValidationStale(f"input {input_id!r} is no longer active")
                views.append(InputView(record.id, record.name, record.index))
            index = self._derive_index(new_dataset_id, spec, views)
            record = DatasetRecord(
                id=new_dataset_id,
                kind="virtual",
                name=spec.name,
                created_at=time.time(),
                creator=creator or self.creator,
                status="active",
                seq=self._seq,
                metadata=dict(spec.metadata),
                spec=spec,
                input_ids=validated.input_ids,
                index=index,
            )
            self._insert(record)
            return record.id

    def create_virtual_from_spec(self, spec: VirtualDatasetSpec, creator: str | None = None) -> str:
        """Validate and create atomically under the writer lock."""
        with self._lock:
            validated = validate_spec(spec, self.registry, self)
            return self.create_virtual(validated, creator=creator)

    def _derive_index(self, dataset_id: str, spec: VirtualDatasetSpec, views: list[InputView]):
        seed = spec.transform.seed if spec.transform.seed is not None else 0
        if spec.transform.transform_id == "window":
            view = views[0]
            sources = []
            for e in view.index:
                if e.row_count is None:
                    raise ParamError(
                        "w",
                        f"row count of object {e.object_id!r} is unknown; windowing needs stored lengths",
                    )
                sources.append(WindowSource(e.object_id, e.row_count, dict(e.labels), e.schema))
            return WindowedIndex(
                view.dataset_id, spec.transform.params["w"], spec.transform.params["stride"], sources
            )
        impl = self.registry.impl(spec.transform.transform_id)
        slots = impl.plan_index(views, spec.transform.params, seed, mint=self._mint_object_id)
        return ObjectIndex(slots[spec.output_index])

    def remove(self, dataset_id: str, mode: str = "restrict") -> list[str]:
        if mode not in ("restrict", "cascade"):
            raise ValueError(f"unknown removal mode {mode!r}")
        with self._lock:
            record = self._records.get(dataset_id)
            if record is None or record.status != "active":
                raise NotFound(f"dataset {dataset_id!r} not found", dataset_id=dataset_id)
            dependents = self.active_dependents(dataset_id)
            if mode == "restrict":
                if dependents:
                    raise HasDependents(sorted(dependents))
                doomed = [dataset_id]
            else:
                doomed = self._topo_order({dataset_id, *dependents})
            self._apply_event({"event": "remove", "ids": doomed})
            return doomed

    def _topo_order(self, ids: set) -> list[str]:
        """Ancestors before descendants within the induced subgraph."""
        indegree = {
            rid: len({p for p in self._records[rid].input_ids if p in ids}) for rid in ids
        }
        ready = sorted(rid for rid, deg in indegree.items() if deg == 0)
        out = []
        while ready:
            rid = ready.pop(0)
            out.append(rid)
            for child in sorted(self._children.get(rid, ())):
                if child in indegree:
                    indegree[child] -= 1
                    if indegree[child] == 0:
                        ready.append(child)
        if len(out) != len(ids):  # pragma: no cover
            raise CycleDetected("cycle detected in removal set")
        return out

    # -- integrity -----------------------------------------------------------

    def check_integrity(self) -> list[str]:
        """Structural audit: acyclicity, referential integrity, rooted closures."""
        problems = []
        with self._lock:
            records = dict(self._records)
        # acyclicity via depth-first search over input edges
        state: dict[str, int] = {}

        def visit(rid: str) -> None:
            state[rid] = 1
            for parent in records[rid].input_ids:
                if parent not in records:
                    problems.append(f"{rid} references missing dataset {parent}")
                    continue
                mark = state.get(parent, 0)
                if mark == 1:
                    problems.append(f"cycle through {parent}")
                elif mark == 0:
                    visit(parent)
            state[rid] = 2

        for rid in records:
            if state.get(rid, 0) == 0:
                visit(rid)
        for rid, record in records.items():
            if record.status != "active":
                continue
            for parent in record.input_ids:
                parent_record = records.get(parent)
                if parent_record is None or parent_record.status != "active":
                    problems.append(f"active {rid} references inactive {parent}")
            if record.kind == "virtual" and not self._has_explicit_root(rid, records):
                problems.append(f"virtual {rid} has no explicit root")
        return problems

    @staticmethod
    def _has_explicit_root(rid: str, records: dict) -> bool:
        frontier = [rid]
        seen = set()
        while frontier:
            current = frontier.pop()
            if current in seen or current not in records:
                continue
            seen.add(current)
            record = records[current]
            if record.kind == "explicit":
                return True
            frontier.extend(record.input_ids)
        return False


def _load_labels(labels_file: str | Path) -> dict[str, dict[str, str]]:
    path = Path(str(labels_file).removeprefix("file://"))
    if not path.is_file():
        raise UnreadableSource(f"labels file {path} not found", uri=str(labels_file))
    table = parse_table(path.read_bytes())
    names = table.schema.names
    if not names or names[0] != "object_id":
        raise UnreadableSource("labels file must start with an object_id column")
    out: dict[str, dict[str, str]] = {}
    for row in table.rows:
        oid = str(row[0])
        out[oid] = {
            names[i]: str(row[i]) for i in range(1, len(names)) if row[i] is not None
        }
    return out
