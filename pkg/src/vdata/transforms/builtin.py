"""Built-in transformation functions.

Every transform is a pure function of (inputs, params, seed): repeated
application is byte-identical, and the object-count algebra promised by each
plan_index is honored exactly by the corresponding payload computation.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from typing import Callable

from ..errors import (
    MissingKey,
    NoCommonColumns,
    NonNumericColumn,
    ParamError,
    UnknownColumn,
    UnknownLabelKey,
    UnpairedObject,
)
from ..model import (
    NUMERIC_TYPES,
    Column,
    ColumnType,
    ObjectIndexEntry,
    Schema,
    SourceLink,
    Table,
    common_columns,
)
from ..rng import Xoshiro256StarStar, derive_object_seed
from .registry import InputView, ParamSpec, Registry, TransformDescriptor, TransformImpl


def _retag(table: Table, schema: Schema) -> Table:
    """Rebind a payload to the index schema (same names/types, widened nullability)."""
    assert [c.name for c in schema.columns] == [c.name for c in table.schema.columns]
    return Table(schema, table.rows)


def _positive(v) -> str | None:
    return None if v >= 1 else "must be >= 1"


def _non_empty(v) -> str | None:
    return None if len(v) > 0 else "must be non-empty"


# ---------------------------------------------------------------------------
# merge


class Merge(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="merge",
        input_arity=None,
        output_arity=1,
        params=(
            ParamSpec("columns", "str_list", required=False, constraint="subset of the shared columns", check=_non_empty),
        ),
    )

    @staticmethod
    def target_columns(inputs: list[InputView], params: dict) -> list[Column]:
        schemas = [e.schema for view in inputs for e in view.index]
        if not schemas:
            raise NoCommonColumns("inputs contain no objects to merge")
        shared, _conflicts = common_columns(schemas)
        if params.get("columns"):
            by_name = {c.name: c for c in shared}
            chosen = []
            for name in params["columns"]:
                if name not in by_name:
                    raise NoCommonColumns(
                        f"requested column {name!r} is not shared by every object", column=name
                    )
                chosen.append(by_name[name])
            return chosen
        if not shared:
            raise NoCommonColumns("inputs share no columns of identical name and type")
        return shared

    def plan_index(self, inputs, params, seed, mint):
        target = Schema(tuple(self.target_columns(inputs, params)))
        entries = []
        for view in inputs:
            for e in view.index:
                entries.append(
                    ObjectIndexEntry(
                        object_id=mint(),
                        labels=dict(e.labels),
                        source_link=SourceLink(view.dataset_id, e.object_id),
                        row_count=e.row_count,
                        schema=target,
                    )
                )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        link = entry.source_link
        source = fetch(link.dataset_id, link.object_id)
        return _retag(source.project(entry.schema.names), entry.schema)


# ---------------------------------------------------------------------------
# integrate


class Integrate(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="integrate",
        input_arity=None,
        output_arity=1,
        params=(ParamSpec("key", "str", constraint="join column present in every input"),),
    )

    @staticmethod
    def _namespaces(inputs: list[InputView]) -> list[str]:
        names = [view.name for view in inputs]
        if all(names) and len(set(names)) == len(names):
            return names
        return [f"in{i}" for i in range(len(inputs))]

    def _joined_schema(self, inputs: list[InputView], object_id: str, key: str) -> Schema:
        namespaces = self._namespaces(inputs)
        key_cols = []
        for view in inputs:
            schema = view.index.get(object_id).schema
            if not schema.has(key):
                raise MissingKey(f"input {view.name or view.dataset_id!r} lacks key column {key!r}", dataset=view.dataset_id)
            key_cols.append(schema.column(key))
        if len({c.dtype for c in key_cols}) != 1:
            kinds = sorted({c.dtype.value for c in key_cols})
            raise MissingKey(f"key column {key!r} has conflicting types {kinds}", key=key)
        columns = [Column(key, key_cols[0].dtype, any(c.nullable for c in key_cols))]
        for view, ns in zip(inputs, namespaces):
            schema = view.index.get(object_id).schema
            for col in schema.columns:
                if col.name == key:
                    continue
                columns.append(Column(f"{ns}.{col.name}", col.dtype, col.nullable))
        try:
            return Schema(tuple(columns))
        except ValueError as exc:
            raise ParamError("key", f"column collision after namespacing: {exc}") from exc

    def plan_index(self, inputs, params, seed, mint):
        key = params["key"]
        id_sets = [set(view.index.ids()) for view in inputs]
        universe = set().union(*id_sets)
        for oid in sorted(universe):
            if any(oid not in s for s in id_sets):
                raise UnpairedObject(f"object {oid!r} is not present in every input", object_id=oid)
        entries = []
        for e in inputs[0].index:
            entries.append(
                ObjectIndexEntry(
                    object_id=e.object_id,
                    labels=dict(e.labels),
                    source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                    row_count=None,  # join size is data-dependent
                    schema=self._joined_schema(inputs, e.object_id, key),
                )
            )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        key = params["key"]
        oid = entry.source_link.object_id
        tables = [fetch(view.dataset_id, oid) for view in inputs]
        groups = []
        for table in tables:
            ki = table.schema.index_of(key)
            by_key: dict = {}
            for row in table.rows:
                if row[ki] is None:
                    continue  # inner join: null keys never match
                by_key.setdefault(row[ki], []).append(row)
            groups.append((ki, by_key))
        shared_keys = set(groups[0][1])
        for _, by_key in groups[1:]:
            shared_keys &= set(by_key)
        rows = []
        for k in sorted(shared_keys):
            pools = [by_key[k] for _, by_key in groups]
            for combo in itertools.product(*pools):
                out = [k]
                for (ki, _), row in zip(groups, combo):
                    out.extend(v for i, v in enumerate(row) if i != ki)
                rows.append(tuple(out))
        return Table(entry.schema, tuple(rows))


# ---------------------------------------------------------------------------
# select_columns


class SelectColumns(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="select_columns",
        input_arity=1,
        output_arity=1,
        params=(ParamSpec("columns", "str_list", constraint="column names; a bare name also selects its `name.*` group", check=_non_empty),),
    )

    @staticmethod
    def expand(schema: Schema, names: list[str], object_id: str) -> list[str]:
        out = []
        for name in names:
            if schema.has(name):
                out.append(name)
                continue
            group = [c.name for c in schema.columns if c.name.startswith(name + ".")]
            if not group:
                raise UnknownColumn(f"column {name!r} not in object {object_id!r}", column=name, object_id=object_id)
            out.extend(group)
        return out

    def plan_index(self, inputs, params, seed, mint):
        entries = []
        for e in inputs[0].index:
            selected = self.expand(e.schema, params["columns"], e.object_id)
            schema = Schema(tuple(e.schema.column(n) for n in selected))
            entries.append(
                ObjectIndexEntry(
                    object_id=e.object_id,
                    labels=dict(e.labels),
                    source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                    row_count=e.row_count,
                    schema=schema,
                )
            )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        source = fetch(entry.source_link.dataset_id, entry.source_link.object_id)
        return _retag(source.project(entry.schema.names), entry.schema)


# ---------------------------------------------------------------------------
# select_labels


class SelectLabels(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="select_labels",
        input_arity=1,
        output_arity=1,
        params=(
            ParamSpec("label_key", "str"),
            ParamSpec("label_values", "str_list", constraint="kept values; may be empty"),
        ),
    )

    def plan_index(self, inputs, params, seed, mint):
        key = params["label_key"]
        wanted = set(params["label_values"])
        if not any(key in e.labels for e in inputs[0].index):
            raise UnknownLabelKey(f"no object carries label {key!r}", label_key=key)
        entries = []
        for e in inputs[0].index:
            if e.labels.get(key) in wanted:
                entries.append(
                    ObjectIndexEntry(
                        object_id=e.object_id,
                        labels=dict(e.labels),
                        source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                        row_count=e.row_count,
                        schema=e.schema,
                    )
                )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        return fetch(entry.source_link.dataset_id, entry.source_link.object_id)


# ---------------------------------------------------------------------------
# normalize


def _check_numeric(schema: Schema, names: list[str], object_id: str) -> None:
    for name in names:
        if not schema.has(name):
            raise UnknownColumn(f"column {name!r} not in object {object_id!r}", column=name, object_id=object_id)
        if schema.column(name).dtype not in NUMERIC_TYPES:
            raise NonNumericColumn(
                f"column {name!r} is {schema.column(name).dtype.value}", column=name
            )


def _minmax_map(values: list) -> Callable[[float], float]:
    present = [v for v in values if v is not None]
    if not present:
        return lambda v: 0.0
    lo, hi = min(present), max(present)
    if lo == hi:
        return lambda v: 0.0  # constant column rule
    span = hi - lo
    return lambda v: (v - lo) / span


def _zscore_map(values: list) -> Callable[[float], float]:
    present = [float(v) for v in values if v is not None]
    if not present:
        return lambda v: 0.0
    mean = math.fsum(present) / len(present)
    var = math.fsum((v - mean) ** 2 for v in present) / len(present)
    if var == 0.0:
        return lambda v: 0.0  # constant column rule
    std = math.sqrt(var)
    return lambda v: (v - mean) / std


class Normalize(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="normalize",
        input_arity=1,
        output_arity=1,
        granularity="dataset-level",
        params=(
            ParamSpec("method", "str", check=lambda v: None if v in ("minmax", "zscore") else "must be minmax or zscore"),
            ParamSpec("columns", "str_list", check=_non_empty),
            ParamSpec(
                "stats_scope",
                "str",
                required=False,
                constraint="per-object (default) or global",
                check=lambda v: None if v in ("per-object", "global") else "must be per-object or global",
            ),
        ),
    )

    def object_local(self, params):
        return params.get("stats_scope", "per-object") == "per-object"

    def plan_index(self, inputs, params, seed, mint):
        entries = []
        for e in inputs[0].index:
            _check_numeric(e.schema, params["columns"], e.object_id)
            columns = tuple(
                Column(c.name, ColumnType.FLOAT64, c.nullable) if c.name in params["columns"] else c
                for c in e.schema.columns
            )
            entries.append(
                ObjectIndexEntry(
                    object_id=e.object_id,
                    labels=dict(e.labels),
                    source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                    row_count=e.row_count,
                    schema=Schema(columns),
                )
            )
        return [entries]

    @staticmethod
    def _apply_maps(source: Table, schema: Schema, maps: dict) -> Table:
        by_index = {source.schema.index_of(name): fn for name, fn in maps.items()}
        rows = []
        for row in source.rows:
            out = list(row)
            for i, fn in by_index.items():
                if out[i] is not None:
                    out[i] = fn(out[i])
            rows.append(tuple(out))
        return Table(schema, tuple(rows))

    def _maps_for(self, per_column_values: dict, method: str) -> dict:
        build = _minmax_map if method == "minmax" else _zscore_map
        return {name: build(values) for name, values in per_column_values.items()}

    def compute_object(self, entry, inputs, fetch, params, seed):
        source = fetch(entry.source_link.dataset_id, entry.source_link.object_id)
        values = {name: source.column_values(name) for name in params["columns"]}
        return self._apply_maps(source, entry.schema, self._maps_for(values, params["method"]))

    def compute_slot(self, entries, inputs, fetch, params, seed):
        if self.object_local(params):
            return [self.compute_object(e, inputs, fetch, params, seed) for e in entries]
        # global scope: one statistics pass across every input object, in index order
        sources = {
            e.object_id: fetch(e.source_link.dataset_id, e.source_link.object_id) for e in entries
        }
        pooled: dict = {name: [] for name in params["columns"]}
        for e in entries:
            for name in params["columns"]:
                pooled[name].extend(sources[e.object_id].column_values(name))
        maps = self._maps_for(pooled, params["method"])
        return [self._apply_maps(sources[e.object_id], e.schema, maps) for e in entries]


# ---------------------------------------------------------------------------
# window


def window_count(length: int, w: int, stride: int) -> int:
    return (length - w) // stride + 1 if length >= w else 0


def window_object_id(source_object_id: str, offset: int, w: int) -> str:
    digest = hashlib.sha256(f"{source_object_id}\x00{offset}\x00{w}".encode()).hexdigest()
    return digest[:32]


class Window(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="window",
        input_arity=1,
        output_arity=1,
        params=(
            ParamSpec("w", "int", constraint=">= 1", check=_positive),
            ParamSpec("stride", "int", constraint=">= 1", check=_positive),
        ),
    )

    def plan_index(self, inputs, params, seed, mint):
        w, stride = params["w"], params["stride"]
        entries = []
        for e in inputs[0].index:
            if e.row_count is None:
                raise ParamError(
                    "w", f"row count of object {e.object_id!r} is unknown; windowing needs stored lengths"
                )
            for offset in range(0, stride * window_count(e.row_count, w, stride), stride):
                entries.append(
                    ObjectIndexEntry(
                        object_id=window_object_id(e.object_id, offset, w),
                        labels=dict(e.labels),
                        source_link=SourceLink(
                            inputs[0].dataset_id, e.object_id, {"offset": offset, "length": w}
                        ),
                        row_count=w,
                        schema=e.schema,
                    )
                )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        link = entry.source_link
        source = fetch(link.dataset_id, link.object_id)
        offset = link.params["offset"]
        return source.slice_rows(offset, offset + link.params["length"])


# ---------------------------------------------------------------------------
# extract_features

_STATS = ("mean", "std", "min", "max", "range")


def _parse_features(raw: list[str]) -> list[tuple[str, str]]:
    out = []
    for item in raw:
        col, sep, stat = item.rpartition(":")
        if not sep or not col or stat not in _STATS:
            raise ParamError("features", f"expected '<column>:<stat>' with stat in {_STATS}, got {item!r}")
        out.append((col, stat))
    return out


def _features_cross_check(params: dict) -> None:
    _parse_features(params["features"])


def _feature_value(values: list, stat: str) -> float | None:
    present = [float(v) for v in values if v is not None]
    if not present:
        return None
    if stat == "mean":
        return math.fsum(present) / len(present)
    if stat == "std":
        mean = math.fsum(present) / len(present)
        return math.sqrt(math.fsum((v - mean) ** 2 for v in present) / len(present))
    if stat == "min":
        return min(present)
    if stat == "max":
        return max(present)
    if stat == "range":
        return max(present) - min(present)
    raise AssertionError(stat)


class ExtractFeatures(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="extract_features",
        input_arity=1,
        output_arity=1,
        params=(
            ParamSpec(
                "features",
                "str_list",
                constraint="entries '<column>:<stat>', stat in mean|std|min|max|range",
                check=_non_empty,
            ),
        ),
        cross_check=_features_cross_check,
    )

    def plan_index(self, inputs, params, seed, mint):
        features = _parse_features(params["features"])
        names = [f"{col}_{stat}" for col, stat in features]
        if len(set(names)) != len(names):
            raise ParamError("features", "duplicate feature column")
        entries = []
        for e in inputs[0].index:
            _check_numeric(e.schema, [col for col, _ in features], e.object_id)
            schema = Schema(tuple(Column(n, ColumnType.FLOAT64, True) for n in names))
            entries.append(
                ObjectIndexEntry(
                    object_id=e.object_id,
                    labels=dict(e.labels),
                    source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                    row_count=1,
                    schema=schema,
                )
            )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        source = fetch(entry.source_link.dataset_id, entry.source_link.object_id)
        features = _parse_features(params["features"])
        row = tuple(_feature_value(source.column_values(col), stat) for col, stat in features)
        return Table(entry.schema, (row,))


# ---------------------------------------------------------------------------
# partition


def _partition_check(params: dict) -> None:
    a, b, c = params.get("a", 0), params.get("b", 0), params.get("c", 0)
    if a + b + c != 100:
        raise ParamError("a", "a+b+c must equal 100")


def partition_sizes(n: int, a: int, b: int) -> tuple[int, int, int]:
    """Floor the first two slots; the remainder goes to the last."""
    n_trn = n * a // 100
    n_vld = n * b // 100
    return n_trn, n_vld, n - n_trn - n_vld


def partition_assignment(object_ids: list[str], a: int, b: int, seed: int) -> list[list[str]]:
    """Seeded Fisher-Yates over lexicographically sorted ids, then contiguous slices."""
    ids = sorted(object_ids)
    Xoshiro256StarStar(seed).shuffle(ids)
    n_trn, n_vld, _ = partition_sizes(len(ids), a, b)
    return [ids[:n_trn], ids[n_trn : n_trn + n_vld], ids[n_trn + n_vld :]]


def _pct(v) -> str | None:
    return None if 0 < v < 100 else "must be in (0, 100)"


class Partition(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="partition",
        input_arity=1,
        output_arity=3,
        seeded=True,
        params=(
            ParamSpec("a", "int", constraint="training percentage", check=_pct),
            ParamSpec("b", "int", constraint="validation percentage", check=_pct),
            ParamSpec("c", "int", constraint="testing percentage", check=_pct),
        ),
        cross_check=_partition_check,
    )

    def plan_index(self, inputs, params, seed, mint):
        view = inputs[0]
        slots = partition_assignment(view.index.ids(), params["a"], params["b"], seed)
        out = []
        for slot_ids in slots:
            entries = []
            for oid in slot_ids:
                e = view.index.get(oid)
                entries.append(
                    ObjectIndexEntry(
                        object_id=e.object_id,
                        labels=dict(e.labels),
                        source_link=SourceLink(view.dataset_id, e.object_id),
                        row_count=e.row_count,
                        schema=e.schema,
                    )
                )
            out.append(entries)
        return out

    def compute_object(self, entry, inputs, fetch, params, seed):
        return fetch(entry.source_link.dataset_id, entry.source_link.object_id)


# ---------------------------------------------------------------------------
# sample

_STRATEGIES = ("uniform_grid", "uniform_random", "latin_hypercube")


def integer_root_ceil(n: int, d: int) -> int:
    """Smallest m with m**d >= n."""
    m = 1
    while m**d < n:
        m += 1
    return m


def _grid_points(lo: float, hi: float, m: int) -> list[float]:
    if m == 1:
        return [(lo + hi) / 2.0]
    return [lo + i * (hi - lo) / (m - 1) for i in range(m)]


def uniform_grid_rows(table: Table, columns: list[str], n: int) -> list[int]:
    """Indexes of rows nearest each axis-aligned grid point (deduplicated, sorted)."""
    coords = _coordinate_rows(table, columns)
    if not coords:
        return []
    d = len(columns)
    m = integer_root_ceil(n, d)
    axes = []
    for dim in range(d):
        values = [c[dim] for _, c in coords]
        axes.append(_grid_points(min(values), max(values), m))
    selected: set[int] = set()
    for point in itertools.product(*axes):
        best_idx, best_dist = -1, math.inf
        for idx, coord in coords:
            dist = sum((a - b) ** 2 for a, b in zip(coord, point))
            if dist < best_dist:
                best_idx, best_dist = idx, dist
        selected.add(best_idx)
    return sorted(selected)


def uniform_random_rows(length: int, n: int, rng: Xoshiro256StarStar) -> list[int]:
    indices = list(range(length))
    rng.shuffle(indices)
    return sorted(indices[:n])


def latin_hypercube_rows(
    table: Table, columns: list[str], n: int, rng: Xoshiro256StarStar
) -> list[int]:
    """One selected row per value stratum per domain column, where the data allows.

    Sample points are drawn with the standard stratified construction (one
    random permutation per column plus a jitter inside each stratum); each
    point is snapped to the nearest unused row among rows lying inside the
    required strata, falling back to the nearest unused row overall when the
    intersection is empty.
    """
    coords = _coordinate_rows(table, columns)
    if not coords:
        return []
    d = len(columns)
    bounds = []
    for dim in range(d):
        values = [c[dim] for _, c in coords]
        bounds.append((min(values), max(values)))
    perms = []
    for _ in range(d):
        perm = list(range(n))
        rng.shuffle(perm)
        perms.append(perm)
    jitter = [[rng.float01() for _ in range(d)] for _ in range(n)]

    def stratum(dim: int, value: float) -> int:
        lo, hi = bounds[dim]
        if hi == lo:
            return 0
        k = int((value - lo) * n / (hi - lo))
        return min(k, n - 1)

    used: set[int] = set()
    selected: list[int] = []
    for j in range(n):
        want = [perms[dim][j] for dim in range(d)]
        point = []
        for dim in range(d):
            lo, hi = bounds[dim]
            width = (hi - lo) / n if hi > lo else 0.0
            point.append(lo + (want[dim] + jitter[j][dim]) * width)
        candidates = [
            (idx, coord)
            for idx, coord in coords
            if idx not in used and all(stratum(dim, coord[dim]) == want[dim] for dim in range(d))
        ]
        if not candidates:
            candidates = [(idx, coord) for idx, coord in coords if idx not in used]
        best_idx, best_dist = -1, math.inf
        for idx, coord in candidates:
            dist = sum((a - b) ** 2 for a, b in zip(coord, point))
            if dist < best_dist:
                best_idx, best_dist = idx, dist
        used.add(best_idx)
        selected.append(best_idx)
    return sorted(selected)


def _coordinate_rows(table: Table, columns: list[str]) -> list[tuple[int, tuple]]:
    indices = [table.schema.index_of(c) for c in columns]
    out = []
    for r, row in enumerate(table.rows):
        coord = tuple(row[i] for i in indices)
        if any(v is None for v in coord):
            continue  # rows without full coordinates are never sampled
        out.append((r, tuple(float(v) for v in coord)))
    return out


class Sample(TransformImpl):
    descriptor = TransformDescriptor(
        transform_id="sample",
        input_arity=1,
        output_arity=1,
        seeded=True,
        params=(
            ParamSpec("strategy", "str", check=lambda v: None if v in _STRATEGIES else f"must be one of {_STRATEGIES}"),
            ParamSpec("n", "int", check=_positive),
            ParamSpec("domain_columns", "str_list", check=_non_empty),
        ),
    )

    def plan_index(self, inputs, params, seed, mint):
        strategy, n = params["strategy"], params["n"]
        entries = []
        for e in inputs[0].index:
            _check_numeric(e.schema, params["domain_columns"], e.object_id)
            if strategy in ("uniform_random", "latin_hypercube"):
                if e.row_count is not None and n > e.row_count:
                    raise ParamError("n", f"{n} exceeds row count {e.row_count} of object {e.object_id!r}")
                rows = n
            else:
                rows = None  # grid selection deduplicates, so the count is data-dependent
            entries.append(
                ObjectIndexEntry(
                    object_id=e.object_id,
                    labels=dict(e.labels),
                    source_link=SourceLink(inputs[0].dataset_id, e.object_id),
                    row_count=rows,
                    schema=e.schema,
                )
            )
        return [entries]

    def compute_object(self, entry, inputs, fetch, params, seed):
        source = fetch(entry.source_link.dataset_id, entry.source_link.object_id)
        strategy, n = params["strategy"], params["n"]
        columns = params["domain_columns"]
        if strategy == "uniform_grid":
            picked = uniform_grid_rows(source, columns, n)
        else:
            if n > source.row_count:
                raise ParamError("n", f"{n} exceeds row count {source.row_count}")
            rng = Xoshiro256StarStar(derive_object_seed(seed, entry.object_id))
            if strategy == "uniform_random":
                picked = uniform_random_rows(source.row_count, n, rng)
            else:
                picked = latin_hypercube_rows(source, columns, n, rng)
        rows = tuple(source.rows[i] for i in picked)
        return Table(source.schema, rows)


def register_builtins(registry: Registry) -> None:
    for impl in (
        Merge(),
        Integrate(),
        SelectColumns(),
        SelectLabels(),
        Normalize(),
        Window(),
        ExtractFeatures(),
        Partition(),
        Sample(),
    ):
        registry.register(impl)
