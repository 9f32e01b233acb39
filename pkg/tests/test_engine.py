"""Engine behavior: plan resolution, cache keys, materialization, lazy objects,
eviction, and cache transparency."""

import threading

import pytest

from vdata.catalog import Catalog
from vdata.csvio import serialize_table
from vdata.engine import Cache, Engine, decode_entry, encode_entry
from vdata.errors import CacheCorrupt, TransformFailed
from vdata.model import Column, ColumnType, Schema, Table
from vdata.ssvd import parse_spec
from vdata.storage import Storage
from vdata.synth import series_table
from vdata.transforms import default_registry

from conftest import build_fig2_pipeline, spec_text


@pytest.fixture
def rig(tmp_path, farm_root):
    catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
    engine = Engine(catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30))
    return catalog, engine


def series_dataset(catalog, tmp_path, rows=10, name="series"):
    data = tmp_path / name
    data.mkdir()
    (data / "s0.csv").write_bytes(serialize_table(series_table(rows)))
    return catalog.register_explicit(f"file://{data}", name=name)


class TestResolve:
    def test_fig2_plan_shape(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        plan = engine.resolve(pipeline["tst"])
        kinds = [n.node_kind for n in plan.nodes]
        assert kinds.count("source") == 3
        assert [n.transform_id for n in plan.nodes if n.node_kind == "transform"] == [
            "merge",
            "select_columns",
            "partition",
        ]
        assert len(plan.nodes) == 6

    def test_explicit_single_node(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        plan = engine.resolve(did)
        assert len(plan.nodes) == 1
        assert plan.nodes[0].node_kind == "source"

    def test_diamond_dedup(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        left = catalog.create_virtual_from_spec(
            parse_spec(spec_text("left", [did], "select_columns", "{columns: [t, value]}"))
        )
        right = catalog.create_virtual_from_spec(
            parse_spec(spec_text("right", [did], "select_columns", "{columns: [t]}"))
        )
        joined = catalog.create_virtual_from_spec(
            parse_spec(spec_text("joined", [left, right], "integrate", "{key: t}"))
        )
        plan = engine.resolve(joined)
        assert len(plan.nodes) == 4  # the shared root appears once
        assert len([n for n in plan.nodes if n.node_kind == "source"]) == 1

    def test_chain_node_count_is_roots_plus_transforms(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        current = did
        for k in range(4):
            current = catalog.create_virtual_from_spec(
                parse_spec(spec_text(f"step{k}", [current], "select_columns", "{columns: [t, value]}"))
            )
        plan = engine.resolve(current)
        assert len(plan.nodes) == 1 + 4

    def test_resolve_stable(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        assert engine.resolve(pipeline["tst"]) == engine.resolve(pipeline["tst"])


class TestCacheKeys:
    def test_same_spec_same_key(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        assert engine.cache_key(pipeline["merged"]) == engine.cache_key(pipeline["merged"])

    def test_seed_changes_key(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        a = catalog.create_virtual_from_spec(
            parse_spec(
                spec_text("sa", [did], "sample",
                          "{strategy: uniform_random, n: 3, domain_columns: [value]}", seed=1)
            )
        )
        b = catalog.create_virtual_from_spec(
            parse_spec(
                spec_text("sb", [did], "sample",
                          "{strategy: uniform_random, n: 3, domain_columns: [value]}", seed=2)
            )
        )
        assert engine.cache_key(a) != engine.cache_key(b)

    def test_name_does_not_change_key(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        a = catalog.create_virtual_from_spec(
            parse_spec(spec_text("first-name", [did], "select_columns", "{columns: [t]}"))
        )
        b = catalog.create_virtual_from_spec(
            parse_spec(spec_text("second-name", [did], "select_columns", "{columns: [t]}"))
        )
        assert engine.cache_key(a) == engine.cache_key(b)

    def test_source_bytes_change_key(self, rig, tmp_path):
        catalog, engine = rig
        one = tmp_path / "d1"
        two = tmp_path / "d2"
        for d, text in ((one, "t\n1\n"), (two, "t\n2\n")):
            d.mkdir()
            (d / "s0.csv").write_text(text)
        id1 = catalog.register_explicit(f"file://{one}", name="d1")
        id2 = catalog.register_explicit(f"file://{two}", name="d2")
        k1 = engine.resolve(id1).nodes[0].cache_key
        k2 = engine.resolve(id2).nodes[0].cache_key
        assert k1 != k2


class TestMaterialize:
    def test_first_run_counters(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        handle = engine.materialize(pipeline["tst"])
        assert handle.stats.nodes_total == 6
        assert handle.stats.cache_hits == 0
        assert handle.stats.transforms_executed == 3
        assert handle.stats.bytes_written > 0

    def test_second_run_all_hits(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        engine.materialize(pipeline["tst"])
        again = engine.materialize(pipeline["tst"])
        assert again.stats.transforms_executed == 0
        assert again.stats.cache_hits == 3

    def test_force_recompute_byte_equal(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        first = engine.materialize(pipeline["tst"])
        before = [serialize_table(t) for t in first.tables()]
        forced = engine.materialize(pipeline["tst"], force_recompute=True)
        assert forced.stats.transforms_executed == 3
        after = [serialize_table(t) for t in forced.tables()]
        assert before == after

    def test_sibling_slots_warm_from_one_run(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        engine.materialize(pipeline["tst"])
        vld = engine.materialize(pipeline["vld"])
        assert vld.stats.transforms_executed == 0
        assert vld.stats.cache_hits == 3

    def test_partition_objects_identical_to_parent(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        handle = engine.materialize(pipeline["tst"])
        for oid in handle.object_ids()[:3]:
            assert handle.get(oid) == engine.open_object(pipeline["selected"], oid)


class TestOpenObject:
    def test_window_segment_is_source_slice(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        wid = catalog.create_virtual_from_spec(
            parse_spec(spec_text("segs", [did], "window", "{w: 4, stride: 2}"))
        )
        record = catalog.get(wid)
        entry = next(e for e in record.index if e.source_link.params["offset"] == 4)
        segment = engine.open_object(wid, entry.object_id)
        source = engine.open_object(did, "s0")
        assert segment.rows == source.rows[4:8]

    def test_merge_object_is_projection(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        record = catalog.get(pipeline["merged"])
        entry = record.index.entries()[0]
        got = engine.open_object(pipeline["merged"], entry.object_id)
        source = engine.open_object(entry.source_link.dataset_id, entry.source_link.object_id)
        assert got.rows == source.project(got.schema.names).rows

    def test_equals_full_materialization(self, rig, farm_root):
        catalog, engine = rig
        pipeline = build_fig2_pipeline(catalog, farm_root)
        handle = engine.materialize(pipeline["vld"])
        for oid in handle.object_ids():
            assert engine.open_object(pipeline["vld"], oid) == handle.get(oid)

    def test_global_normalize_falls_back_to_node_run(self, rig, tmp_path):
        catalog, engine = rig
        did = series_dataset(catalog, tmp_path)
        nid = catalog.create_virtual_from_spec(
            parse_spec(
                spec_text(
                    "norm", [did], "normalize",
                    "{method: minmax, columns: [value], stats_scope: global}",
                )
            )
        )
        table = engine.open_object(nid, "s0")
        values = table.column_values("value")
        assert min(values) == 0.0 and max(values) == 1.0


class TestCacheBudget:
    def test_budget_zero_is_transparent(self, tmp_path, farm_root):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        pipeline = build_fig2_pipeline(catalog, farm_root)
        cached = Engine(catalog, cache=Cache(tmp_path / "c1", budget_bytes=1 << 30))
        bare = Engine(catalog, cache=Cache(tmp_path / "c2", budget_bytes=0))
        a = [serialize_table(t) for t in cached.materialize(pipeline["tst"]).tables()]
        b = [serialize_table(t) for t in bare.materialize(pipeline["tst"]).tables()]
        assert a == b
        again = bare.materialize(pipeline["tst"])
        assert again.stats.cache_hits == 0
        assert again.stats.transforms_executed == 3
        assert bare.cache_stats()["entries"] == 0

    def test_eviction_keeps_bytes_under_budget(self, tmp_path):
        cache = Cache(tmp_path / "cache", budget_bytes=2000)
        for i in range(10):
            cache.put(f"{i:064x}", b"x" * 500)
        stats = cache.stats()
        assert stats["evictions"] > 0
        assert stats["bytes"] <= 2000

    def test_hit_counters(self, tmp_path):
        cache = Cache(tmp_path / "cache", budget_bytes=10_000)
        key = "a" * 64
        cache.put(key, b"payload")
        for _ in range(5):
            assert cache.contains(key)
        assert cache.stats()["hits"] == 5
        assert not cache.contains("b" * 64)
        assert cache.stats()["misses"] == 1

    def test_cache_survives_restart(self, tmp_path, farm_root):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        pipeline = build_fig2_pipeline(catalog, farm_root)
        engine = Engine(catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30))
        engine.materialize(pipeline["tst"])
        warm = Engine(catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30))
        run = warm.materialize(pipeline["tst"])
        assert run.stats.transforms_executed == 0
        assert run.stats.cache_hits == 3

    def test_pinned_entries_survive_eviction(self, tmp_path):
        cache = Cache(tmp_path / "cache", budget_bytes=1000)
        pinned_key = "c" * 64
        cache.put(pinned_key, b"y" * 800)
        cache.pin(pinned_key)
        cache.put("d" * 64, b"z" * 900)
        assert cache.read(pinned_key) == b"y" * 800
        cache.unpin(pinned_key)
        cache.evict()
        assert cache.stats()["bytes"] <= 1000

    def test_source_change_surfaces_during_materialize(self, tmp_path):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        data = tmp_path / "d"
        data.mkdir()
        path = data / "s0.csv"
        path.write_text("t,v\n1,2.0\n")
        did = catalog.register_explicit(f"file://{data}", name="d")
        vid = catalog.create_virtual_from_spec(
            parse_spec(spec_text("sel", [did], "select_columns", "{columns: [t]}"))
        )
        path.write_text("t,v\n1,2.0\n2,3.0\n")  # mutate the source behind the catalog
        engine = Engine(catalog, cache=Cache())
        from vdata.errors import SourceChanged

        with pytest.raises(SourceChanged):
            engine.materialize(vid)
        with pytest.raises(SourceChanged):
            engine.open_object(vid, "s0")


class TestEntryFraming:
    def test_roundtrip(self):
        t1 = Table(Schema((Column("a", ColumnType.INT64),)), ((1,), (2,)))
        t2 = Table(Schema((Column("b", ColumnType.STRING),)), (("x",),))
        data = encode_entry([t1, t2])
        back = decode_entry(data, 2)
        assert back == [t1, t2]

    def test_corrupt_magic(self):
        with pytest.raises(CacheCorrupt):
            decode_entry(b"nope" + b"\x00" * 10)

    def test_count_mismatch(self):
        t1 = Table(Schema((Column("a", ColumnType.INT64),)), ((1,),))
        with pytest.raises(CacheCorrupt):
            decode_entry(encode_entry([t1]), 2)


class TestAudit:
    def test_audited_hits_verify_clean(self, tmp_path, farm_root):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        pipeline = build_fig2_pipeline(catalog, farm_root)
        engine = Engine(
            catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30), audit_hit_fraction=1.0
        )
        engine.materialize(pipeline["tst"])
        again = engine.materialize(pipeline["tst"])
        assert again.stats.audits == 3

    def test_audit_detects_tampering(self, tmp_path, farm_root):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        pipeline = build_fig2_pipeline(catalog, farm_root)
        cache = Cache(tmp_path / "cache", budget_bytes=1 << 30)
        engine = Engine(catalog, cache=cache, audit_hit_fraction=1.0)
        handle = engine.materialize(pipeline["merged"])
        key = engine.resolve(pipeline["merged"]).node(pipeline["merged"]).cache_key
        path = tmp_path / "cache" / key[:2] / f"{key}.bin"
        data = bytearray(path.read_bytes())
        data[-1] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CacheCorrupt):
            engine.materialize(pipeline["merged"])


class TestConcurrency:
    def test_single_flight_same_dataset(self, tmp_path, farm_root):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        pipeline = build_fig2_pipeline(catalog, farm_root)
        engine = Engine(catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30))
        results = []
        errors = []

        def worker():
            try:
                handle = engine.materialize(pipeline["tst"])
                results.append([serialize_table(t) for t in handle.tables()])
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert all(r == results[0] for r in results)

    def test_failed_node_writes_no_cache_entry(self, tmp_path):
        catalog = Catalog(Storage(), default_registry(), data_dir=tmp_path / "cat")
        for name in ("left", "right"):
            data = tmp_path / name
            data.mkdir()
            (data / "s0.csv").write_text("t,v\n1,2.0\n2,3.0\n")
        lid = catalog.register_explicit(f"file://{tmp_path}/left", name="left")
        rid = catalog.register_explicit(f"file://{tmp_path}/right", name="right")
        jid = catalog.create_virtual_from_spec(
            parse_spec(spec_text("joined", [lid, rid], "integrate", "{key: t}"))
        )
        # join row counts are unknown at planning time, so the over-draw
        # only surfaces during computation
        sid = catalog.create_virtual_from_spec(
            parse_spec(
                spec_text("s", [jid], "sample",
                          "{strategy: uniform_random, n: 99, domain_columns: [left.v]}", seed=1)
            )
        )
        engine = Engine(catalog, cache=Cache(tmp_path / "cache", budget_bytes=1 << 30))
        failed_key = engine.resolve(sid).node(sid).cache_key
        with pytest.raises(TransformFailed):
            engine.materialize(sid)
        assert not engine.cache.contains(failed_key)
        assert engine.cache_stats()["entries"] == 1  # only the upstream join landed
