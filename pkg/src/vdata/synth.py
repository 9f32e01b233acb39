"""Synthetic fixture builders used by tests, benchmarks, and demo scripts.

Three SCADA-style farm datasets with overlapping sensor schemas (80/90/100
columns sharing exactly 59), per-event CSV objects with normal/anomaly labels,
and a long single-series dataset for windowing experiments. Everything is
deterministic given the seed.
"""

from __future__ import annotations

import math
from pathlib import Path

from .csvio import serialize_table
from .model import Column, ColumnType, Schema, Table
from .rng import Xoshiro256StarStar, fnv1a64

SHARED_SENSORS = 58  # plus the shared "t" column -> 59 shared columns

_FARMS = {
    # farm: (extra_columns, n_objects, n_anomalies)
    "a": (21, 22, 8),
    "b": (31, 38, 14),
    "c": (41, 35, 13),
}


def farm_schema(farm: str) -> Schema:
    extra, _, _ = _FARMS[farm]
    cols = [Column("t", ColumnType.INT64)]
    cols += [Column(f"sensor{i:02d}", ColumnType.FLOAT64) for i in range(SHARED_SENSORS)]
    cols += [Column(f"{farm}_x{i:02d}", ColumnType.FLOAT64) for i in range(extra)]
    return Schema(tuple(cols))


def farm_object_ids(farm: str) -> list[str]:
    _, count, _ = _FARMS[farm]
    return [f"{farm}_event_{i:03d}" for i in range(count)]


def farm_labels(farm: str) -> dict[str, dict[str, str]]:
    """status label per event; anomalies are the trailing ids."""
    _, count, anomalies = _FARMS[farm]
    ids = farm_object_ids(farm)
    return {
        oid: {"status": "anomaly" if i >= count - anomalies else "normal"}
        for i, oid in enumerate(ids)
    }


def farm_table(farm: str, object_id: str, rows: int = 6) -> Table:
    schema = farm_schema(farm)
    rng = Xoshiro256StarStar(fnv1a64(f"{farm}/{object_id}".encode()))
    out = []
    t0 = 1_700_000_000
    for r in range(rows):
        row = [t0 + r * 600]
        for _ in range(len(schema.columns) - 1):
            row.append(round(rng.float01() * 100.0, 6))
        out.append(tuple(row))
    return Table(schema, tuple(out))


def write_farm(dir_path: Path, farm: str, rows: int = 6) -> Path:
    """Write one farm as a CSV directory plus a sibling labels file."""
    data_dir = Path(dir_path) / f"farm_{farm}"
    data_dir.mkdir(parents=True, exist_ok=True)
    for oid in farm_object_ids(farm):
        (data_dir / f"{oid}.csv").write_bytes(serialize_table(farm_table(farm, oid, rows)))
    labels = farm_labels(farm)
    lines = ["object_id,status"]
    lines += [f"{oid},{labels[oid]['status']}" for oid in farm_object_ids(farm)]
    (Path(dir_path) / f"farm_{farm}_labels.csv").write_text("\n".join(lines) + "\n")
    return data_dir


def series_table(n_rows: int, seed: int = 11) -> Table:
    """Long two-column series (t ascending, value smooth + noise)."""
    rng = Xoshiro256StarStar(seed)
    schema = Schema((Column("t", ColumnType.INT64), Column("value", ColumnType.FLOAT64)))
    rows = tuple(
        (i, math.sin(i / 37.0) * 10.0 + rng.float01())
        for i in range(n_rows)
    )
    return Table(schema, rows)


def write_series(dir_path: Path, n_rows: int, seed: int = 11) -> Path:
    data_dir = Path(dir_path) / "series"
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "series_000.csv").write_bytes(serialize_table(series_table(n_rows, seed)))
    return data_dir
