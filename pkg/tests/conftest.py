"""Shared fixtures: synthetic farms on disk and a standard pipeline builder."""

import pytest

from vdata import synth
from vdata.catalog import Catalog
from vdata.ssvd import parse_spec
from vdata.storage import Storage
from vdata.transforms import default_registry


@pytest.fixture(scope="session")
def farm_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("farms")
    for farm in ("a", "b", "c"):
        synth.write_farm(root, farm, rows=5)
    return root


@pytest.fixture
def fresh_catalog(tmp_path):
    storage = Storage()
    return Catalog(storage, default_registry(), data_dir=tmp_path / "catalog")


def register_farms(catalog: Catalog, farm_root) -> dict:
    ids = {}
    for farm in ("a", "b", "c"):
        ids[farm] = catalog.register_explicit(
            f"file://{farm_root}/farm_{farm}",
            name=f"windfarm-{farm}",
            labels_file=farm_root / f"farm_{farm}_labels.csv",
        )
    return ids


def spec_text(name, inputs, transform_id, params_yaml="{}", seed=None, outputs=None, output_index=None):
    lines = [
        "spec_version: ssvd/1",
        f"name: {name}",
        "inputs: [" + ", ".join(f"{{dataset: '{i}'}}" for i in inputs) + "]",
        f"transform: {{id: {transform_id}, params: {params_yaml}"
        + (f", seed: {seed}" if seed is not None else "")
        + "}",
    ]
    if outputs is not None:
        lines.append("outputs: [" + ", ".join(outputs) + "]")
    if output_index is not None:
        lines.append(f"output_index: {output_index}")
    return "\n".join(lines) + "\n"


def build_fig2_pipeline(catalog: Catalog, farm_root) -> dict:
    """Three farms -> merge -> select two columns -> 70/15/15 split."""
    ids = register_farms(catalog, farm_root)
    merged = catalog.create_virtual_from_spec(
        parse_spec(spec_text("merged-farms", ids.values(), "merge"))
    )
    selected = catalog.create_virtual_from_spec(
        parse_spec(
            spec_text("picked-sensors", [merged], "select_columns", "{columns: [t, sensor01]}")
        )
    )
    slots = {}
    for index, slot in enumerate(("trn", "vld", "tst")):
        slots[slot] = catalog.create_virtual_from_spec(
            parse_spec(
                spec_text(
                    f"split-{slot}",
                    [selected],
                    "partition",
                    "{a: 70, b: 15, c: 15}",
                    seed=42,
                    outputs=("trn", "vld", "tst"),
                    output_index=index,
                )
            )
        )
    return {"farms": ids, "merged": merged, "selected": selected, **slots}
