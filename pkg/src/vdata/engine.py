"""Query and processing engine: resolve, execute, cache.

A virtual dataset is materialized by walking its lineage back to explicit
roots, then executing transform nodes in topological order through a
content-addressed cache. Cache keys cover everything a computation reads:
the transform's semantic core (id, params, seed, output slot), the input
nodes' keys, the input object ids and labels, and the source file
fingerprints. Equal keys therefore imply equal recomputed payloads, and
logically identical computations collide onto one key across catalogs.

Single objects are served without full materialization when the transform
chain is object-local: ``open_object`` follows provenance links upward and
computes just the needed slice.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import yaml

from .catalog import Catalog, DatasetRecord
from .csvio import parse_table, serialize_table
from .errors import (
    BrokenLineage,
    CacheCorrupt,
    NotFound,
    SourceChanged,
    TransformFailed,
    VdataError,
)
from .model import Table
from .ssvd import VirtualDatasetSpec
from .transforms import InputView, Registry

_MAGIC = b"VDC1"


# ---------------------------------------------------------------------------
# cache


@dataclass
class _EntryMeta:
    byte_size: int
    created_at: float
    last_hit_at: float
    hit_count: int = 0


class Cache:
    """Content-addressed payload store with an LRU byte budget.

    On disk: ``cache/<first-2-hex>/<digest>.bin`` plus ``cache/index.log``
    (one JSON event per line: put/hit/evict) so hit ordering survives
    restarts. With no directory the cache lives in memory. Budget 0 stores
    nothing; materialization then always recomputes, with identical output.
    """

    def __init__(self, directory: str | Path | None = None, budget_bytes: int | None = None):
        self._dir = Path(directory) if directory is not None else None
        self.budget_bytes = budget_bytes
        self._meta: dict[str, _EntryMeta] = {}
        self._blobs: dict[str, bytes] = {}
        self._pins: dict[str, int] = {}
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
            self._replay_index()

    # -- layout --

    def _path(self, key: str) -> Path:
        return self._dir / key[:2] / f"{key}.bin"

    def _log(self, event: dict) -> None:
        if self._dir is None:
            return
        with open(self._dir / "index.log", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay_index(self) -> None:
        log = self._dir / "index.log"
        if not log.exists():
            return
        for line in log.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            key = event["key"]
            if event["op"] == "put":
                self._meta[key] = _EntryMeta(event["bytes"], event["t"], event["t"])
            elif event["op"] == "hit" and key in self._meta:
                self._meta[key].last_hit_at = event["t"]
                self._meta[key].hit_count += 1
            elif event["op"] == "evict":
                self._meta.pop(key, None)
        for key in [k for k, m in self._meta.items() if not self._path(k).is_file()]:
            del self._meta[key]

    # -- operations --

    def contains(self, key: str) -> bool:
        """Presence check that counts as a cache hit or miss."""
        with self._lock:
            meta = self._meta.get(key)
            if meta is None:
                self.misses += 1
                return False
            now = time.time()
            meta.last_hit_at = now
            meta.hit_count += 1
            self.hits += 1
            self._log({"op": "hit", "key": key, "t": now})
            return True

    def pin(self, key: str) -> None:
        with self._lock:
            self._pins[key] = self._pins.get(key, 0) + 1

    def unpin(self, key: str) -> None:
        with self._lock:
            count = self._pins.get(key, 0) - 1
            if count <= 0:
                self._pins.pop(key, None)
            else:
                self._pins[key] = count

    def put(self, key: str, payload: bytes) -> bool:
        """Store unless the budget forbids it; returns True when stored."""
        with self._lock:
            if key in self._meta:
                return True
            if self.budget_bytes is not None and len(payload) > self.budget_bytes:
                return False
            now = time.time()
            if self._dir is None:
                self._blobs[key] = payload
            else:
                path = self._path(key)
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(payload)
                tmp.replace(path)
            self._meta[key] = _EntryMeta(len(payload), now, now)
            self._log({"op": "put", "key": key, "bytes": len(payload), "t": now})
            self._evict_to_budget()
            return True

    def read(self, key: str) -> bytes:
        with self._lock:
            if key not in self._meta:
                raise CacheCorrupt(f"cache entry {key} missing", key=key)
            if self._dir is None:
                return self._blobs[key]
            path = self._path(key)
        try:
            return path.read_bytes()
        except OSError as exc:
            raise CacheCorrupt(f"cache entry {key} unreadable: {exc}", key=key) from exc

    def evict(self) -> None:
        """Policy trigger: shed least-recently-hit unpinned entries to budget."""
        with self._lock:
            self._evict_to_budget()

    def _evict_to_budget(self) -> None:
        if self.budget_bytes is None:
            return
        while self.total_bytes() > self.budget_bytes:
            candidates = [
                (meta.last_hit_at, meta.created_at, key)
                for key, meta in self._meta.items()
                if key not in self._pins
            ]
            if not candidates:
                return
            _, _, victim = min(candidates)
            meta = self._meta.pop(victim)
            self._blobs.pop(victim, None)
            if self._dir is not None:
                self._path(victim).unlink(missing_ok=True)
            self.evictions += 1
            self._log({"op": "evict", "key": victim, "t": time.time()})

    def total_bytes(self) -> int:
        return sum(m.byte_size for m in self._meta.values())

    def stats(self) -> dict:
        with self._lock:
            return {
                "entries": len(self._meta),
                "bytes": self.total_bytes(),
                "hits": self.hits,
                "misses": self.misses,
                "evictions": self.evictions,
            }


def encode_entry(tables: list[Table]) -> bytes:
    """Frame a node's payloads positionally (ids live in the catalog index)."""
    parts = [_MAGIC, struct.pack("<I", len(tables))]
    for table in tables:
        blob = serialize_table(table)
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def decode_entry(data: bytes, expected_count: int | None = None) -> list[Table]:
    tables = []
    try:
        if data[:4] != _MAGIC:
            raise CacheCorrupt("bad cache entry magic")
        (count,) = struct.unpack_from("<I", data, 4)
        pos = 8
        for _ in range(count):
            (length,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            tables.append(parse_table(data[pos : pos + length]))
            pos += length
    except (struct.error, IndexError, VdataError) as exc:
        raise CacheCorrupt(f"undecodable cache entry: {exc}") from exc
    if expected_count is not None and count != expected_count:
        raise CacheCorrupt(f"cache entry holds {count} objects, index expects {expected_count}")
    return tables


def decode_entry_at(data: bytes, position: int) -> Table:
    if data[:4] != _MAGIC:
        raise CacheCorrupt("bad cache entry magic")
    (count,) = struct.unpack_from("<I", data, 4)
    if position >= count:
        raise CacheCorrupt(f"position {position} out of range ({count} objects)")
    pos = 8
    for i in range(count):
        (length,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if i == position:
            return parse_table(data[pos : pos + length])
        pos += length
    raise CacheCorrupt("truncated cache entry")


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class PlanNode:
    dataset_id: str
    node_kind: str  # source | transform
    cache_key: str
    input_ids: tuple[str, ...] = ()
    transform_id: str | None = None
    output_index: int = 0
    estimated_rows: int | None = None


@dataclass(frozen=True)
class Plan:
    target: str
    nodes: tuple[PlanNode, ...]  # topologically ordered, inputs first

    def node(self, dataset_id: str) -> PlanNode:
        for n in self.nodes:
            if n.dataset_id == dataset_id:
                return n
        raise KeyError(dataset_id)

    @property
    def transform_nodes(self) -> list[PlanNode]:
        return [n for n in self.nodes if n.node_kind == "transform"]


def node_core(spec: VirtualDatasetSpec, output_index: int | None = None) -> str:
    """Semantic core of a node: what it computes, not what it is called."""
    doc = {
        "transform": {
            "id": spec.transform.transform_id,
            "params": spec.transform.params,
        },
        "output_index": spec.output_index if output_index is None else output_index,
    }
    if spec.transform.seed is not None:
        doc["transform"]["seed"] = spec.transform.seed
    return yaml.safe_dump(doc, sort_keys=True, width=4096)


def index_metadata_digest(record: DatasetRecord) -> str:
    """Digest of the object ids and labels a downstream computation may read."""
    h = hashlib.sha256(b"idx\x00")
    for entry in record.index:
        h.update(entry.object_id.encode())
        h.update(b"\x00")
        for k in sorted(entry.labels):
            h.update(f"{k}={entry.labels[k]}".encode())
            h.update(b"\x1f")
        h.update(b"\x1e")
    return h.hexdigest()


def source_cache_key(record: DatasetRecord) -> str:
    h = hashlib.sha256(b"source\x00")
    for entry in record.index:
        h.update(entry.object_id.encode())
        h.update(b"\x00")
        h.update(record.fingerprints.get(entry.object_id, "").encode())
        h.update(b"\x1e")
    return h.hexdigest()


def transform_cache_key(
    spec: VirtualDatasetSpec,
    inputs: list[tuple[str, str]],
    output_index: int | None = None,
) -> str:
    """inputs: ordered (input cache key, input index metadata digest) pairs."""
    h = hashlib.sha256(b"transform\x00")
    h.update(node_core(spec, output_index).encode())
    for key, idx_digest in inputs:
        h.update(b"\x00")
        h.update(key.encode())
        h.update(idx_digest.encode())
    return h.hexdigest()


@dataclass
class RunStats:
    nodes_total: int = 0
    cache_hits: int = 0
    transforms_executed: int = 0
    bytes_written: int = 0
    audits: int = 0
    elapsed_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "nodes_total": self.nodes_total,
            "cache_hits": self.cache_hits,
            "transforms_executed": self.transforms_executed,
            "bytes_written": self.bytes_written,
            "audits": self.audits,
            "elapsed_seconds": round(self.elapsed_seconds, 6),
        }


class MaterializedHandle:
    """Enumerates a materialized dataset's objects and serves their payloads."""

    def __init__(self, record: DatasetRecord, getter, stats: RunStats):
        self._record = record
        self._getter = getter
        self.stats = stats

    @property
    def dataset_id(self) -> str:
        return self._record.id

    def object_ids(self) -> list[str]:
        return self._record.index.ids()

    def get(self, object_id: str) -> Table:
        position = self._record.index.position(object_id)
        return self._getter(position)

    def tables(self):
        for position, _ in enumerate(self._record.index.ids()):
            yield self._getter(position)


class _NodeResult:
    """Either in-memory payloads or a lazily read cache entry."""

    def __init__(self, tables: list[Table] | None = None, cache: Cache | None = None, key: str | None = None):
        self._tables = tables
        self._cache = cache
        self._key = key
        self._lock = threading.Lock()

    def all_tables(self, expected: int) -> list[Table]:
        with self._lock:
            if self._tables is None:
                self._tables = decode_entry(self._cache.read(self._key), expected)
            return self._tables

    def at(self, position: int) -> Table:
        with self._lock:
            if self._tables is not None:
                return self._tables[position]
        return decode_entry_at(self._cache.read(self._key), position)


class Engine:
    """Materializes virtual datasets through the cache.

    Concurrent materializations of distinct datasets proceed in parallel;
    concurrent work on one cache key is single-flighted. ``audit_hit_fraction``
    recomputes that share of cache hits and compares bytes, failing loudly on
    any divergence.
    """

    def __init__(
        self,
        catalog: Catalog,
        registry: Registry | None = None,
        cache: Cache | None = None,
        audit_hit_fraction: float = 0.0,
    ) -> None:
        self.catalog = catalog
        self.registry = registry or catalog.registry
        self.cache = cache or Cache()
        self.audit_hit_fraction = audit_hit_fraction
        self._inflight: dict[str, threading.Lock] = {}
        self._inflight_mutex = threading.Lock()

    # -- resolve ------------------------------------------------------------

    def resolve(self, dataset_id: str) -> Plan:
        target = self.catalog.get(dataset_id)
        order: list[DatasetRecord] = []
        seen: set[str] = set()

        def visit(record: DatasetRecord) -> None:
            if record.id in seen:
                return
            seen.add(record.id)
            for input_id in record.input_ids:
                try:
                    parent = self.catalog.get_any(input_id)
                except NotFound:
                    raise BrokenLineage(
                        f"ancestor {input_id!r} of {record.id!r} is gone", missing=input_id
                    ) from None
                visit(parent)
            order.append(record)

        visit(target)
        keys: dict[str, str] = {}
        idx_digests: dict[str, str] = {}
        nodes = []
        for record in order:
            idx_digests[record.id] = index_metadata_digest(record)
            if record.kind == "explicit":
                key = source_cache_key(record)
                nodes.append(PlanNode(record.id, "source", key, estimated_rows=_estimate(record)))
            else:
                key = transform_cache_key(
                    record.spec,
                    [(keys[i], idx_digests[i]) for i in record.input_ids],
                )
                nodes.append(
                    PlanNode(
                        record.id,
                        "transform",
                        key,
                        input_ids=record.input_ids,
                        transform_id=record.transform_id,
                        output_index=record.spec.output_index,
                        estimated_rows=_estimate(record),
                    )
                )
            keys[record.id] = key
        return Plan(dataset_id, tuple(nodes))

    def cache_key(self, dataset_id: str) -> str:
        plan = self.resolve(dataset_id)
        return plan.node(dataset_id).cache_key

    # -- materialize ----------------------------------------------------------

    def materialize(self, dataset_id: str, force_recompute: bool = False) -> MaterializedHandle:
        started = time.time()
        plan = self.resolve(dataset_id)
        stats = RunStats(nodes_total=len(plan.nodes))
        results: dict[str, _NodeResult] = {}
        records = {n.dataset_id: self.catalog.get_any(n.dataset_id) for n in plan.nodes}
        pinned: list[str] = []

        def fetch(ds: str, oid: str) -> Table:
            record = records[ds]
            if record.kind == "explicit":
                return self.catalog.storage.read_object(
                    record.uri, oid, record.fingerprints.get(oid)
                )
            return results[ds].at(record.index.position(oid))

        try:
            for node in plan.nodes:
                if node.node_kind == "source":
                    continue
                record = records[node.dataset_id]
                lock = self._acquire_flight(node.cache_key)
                try:
                    if not force_recompute and self.cache.contains(node.cache_key):
                        self.cache.pin(node.cache_key)
                        pinned.append(node.cache_key)
                        stats.cache_hits += 1
                        results[node.dataset_id] = _NodeResult(cache=self.cache, key=node.cache_key)
                        if self._should_audit(node.cache_key):
                            stats.audits += 1
                            self._audit_node(node, record, results, fetch)
                        continue
                    tables = self._execute_node(node, record, records, plan, fetch, stats)
                    results[node.dataset_id] = _NodeResult(tables=tables)
                finally:
                    lock.release()
            final = records[dataset_id]
            if final.kind == "explicit":
                getter = lambda pos: fetch(dataset_id, final.index.entries()[pos].object_id)
            else:
                result = results[dataset_id]
                getter = result.at
            stats.elapsed_seconds = time.time() - started
            return MaterializedHandle(final, getter, stats)
        finally:
            for key in pinned:
                self.cache.unpin(key)

    def _acquire_flight(self, key: str) -> threading.Lock:
        with self._inflight_mutex:
            lock = self._inflight.setdefault(key, threading.Lock())
        lock.acquire()
        return lock

    def _should_audit(self, key: str) -> bool:
        if self.audit_hit_fraction <= 0.0:
            return False
        share = int(key[:8], 16) / 0xFFFFFFFF
        return share < self.audit_hit_fraction

    def _views(self, record: DatasetRecord) -> list[InputView]:
        views = []
        for input_id in record.input_ids:
            parent = self.catalog.get_any(input_id)
            views.append(InputView(parent.id, parent.name, parent.index))
        return views

    def _execute_node(self, node, record, records, plan, fetch, stats) -> list[Table]:
        impl = self.registry.impl(record.transform_id)
        spec = record.spec
        seed = spec.transform.seed if spec.transform.seed is not None else 0
        views = [InputView(records[i].id, records[i].name, records[i].index) for i in record.input_ids]
        entries = record.index.entries()
        try:
            if impl.descriptor.output_arity == 1:
                slot_tables = impl.compute_slot(entries, views, fetch, spec.transform.params, seed)
                all_slots = {spec.output_index: slot_tables}
            else:
                # shared multi-output computation: derive every sibling slot once
                slots = impl.plan_index(views, spec.transform.params, seed, mint=_refuse_mint)
                all_slots = {}
                for idx, slot_entries in enumerate(slots):
                    if idx == spec.output_index:
                        slot_entries = entries  # catalog's stored slot is authoritative
                    all_slots[idx] = impl.compute_slot(
                        slot_entries, views, fetch, spec.transform.params, seed
                    )
        except (SourceChanged, CacheCorrupt):
            raise
        except VdataError as exc:
            raise TransformFailed(record.id, exc) from exc
        stats.transforms_executed += 1
        sibling_inputs = [
            (plan.node(i).cache_key, index_metadata_digest(records[i])) for i in record.input_ids
        ]
        for idx, tables in all_slots.items():
            key = (
                node.cache_key
                if idx == spec.output_index
                else transform_cache_key(spec, sibling_inputs, output_index=idx)
            )
            payload = encode_entry(tables)
            if self.cache.put(key, payload):
                stats.bytes_written += len(payload)
        return all_slots[spec.output_index]

    def _audit_node(self, node, record, results, fetch) -> None:
        cached = self.cache.read(node.cache_key)
        recomputed = encode_entry(self._recompute_for_audit(node, record, results, fetch))
        if cached != recomputed:
            raise CacheCorrupt(
                f"audit mismatch for node {record.id}: cached bytes differ from recomputation",
                key=node.cache_key,
            )

    def _recompute_for_audit(self, node, record, results, fetch) -> list[Table]:
        impl = self.registry.impl(record.transform_id)
        spec = record.spec
        seed = spec.transform.seed if spec.transform.seed is not None else 0
        views = self._views(record)
        return impl.compute_slot(record.index.entries(), views, fetch, spec.transform.params, seed)

    # -- single objects -------------------------------------------------------

    def open_object(self, dataset_id: str, object_id: str) -> Table:
        """Serve one object, computing only the minimal upstream slice."""
        record = self.catalog.get(dataset_id)
        return self._open_entry(record, object_id)

    def _open_entry(self, record: DatasetRecord, object_id: str) -> Table:
        if record.kind == "explicit":
            return self.catalog.storage.read_object(
                record.uri, object_id, record.fingerprints.get(object_id)
            )
        entry = record.index.get(object_id)
        impl = self.registry.impl(record.transform_id)
        spec = record.spec
        if not impl.object_local(spec.transform.params):
            return self.materialize(record.id).get(object_id)
        seed = spec.transform.seed if spec.transform.seed is not None else 0
        views = self._views(record)

        def fetch(ds: str, oid: str) -> Table:
            return self._open_entry(self.catalog.get_any(ds), oid)

        try:
            return impl.compute_object(entry, views, fetch, spec.transform.params, seed)
        except VdataError as exc:
            if isinstance(exc, (TransformFailed, NotFound, SourceChanged)):
                raise
            raise TransformFailed(record.id, exc) from exc

    # -- cache admin ----------------------------------------------------------

    def cache_stats(self) -> dict:
        return self.cache.stats()


def _estimate(record: DatasetRecord) -> int | None:
    total = 0
    for entry in record.index:
        if entry.row_count is None:
            return None
        total += entry.row_count
    return total


def _refuse_mint() -> str:
    raise AssertionError("sibling derivation must not mint ids")
