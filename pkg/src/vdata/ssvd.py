"""Virtual-dataset specification documents: parse, validate, canonical form.

A spec is a small YAML document that names its input datasets, one registered
transformation with parameters, and which output slot this dataset is:

    spec_version: ssvd/1
    name: turbine-test-split
    inputs: [ {dataset: <id-or-uri>}, ... ]
    transform: { id: partition, params: {a: 70, b: 15, c: 15}, seed: 42 }
    outputs: [trn, vld, tst]
    output_index: 2
    metadata: { owner: team-ml }

Parsing and validation are separate phases: a spec can be archived and read
back even when its sources or transform are gone. Canonical serialization is
deterministic (sorted keys, declared list order, shortest round-trip numbers)
so equal specs always produce equal bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml

from .errors import (
    ArityMismatch,
    BadVersion,
    MissingField,
    ParamError,
    SpecSyntaxError,
    UnknownDataset,
    UnknownField,
    UnknownTransform,
)
from .model import is_valid_id

SPEC_VERSION = "ssvd/1"

_TOP_KEYS = {
    "spec_version",
    "name",
    "description",
    "inputs",
    "transform",
    "outputs",
    "output_index",
    "metadata",
}

_SCALARS = (str, int, float, bool)


@dataclass(frozen=True)
class DatasetRef:
    """Link to a predecessor dataset, by catalog id or by storage URI."""

    target: str

    @property
    def is_id(self) -> bool:
        return is_valid_id(self.target)


@dataclass(frozen=True)
class TransformRef:
    """Link to a registered transformation plus its parameters."""

    transform_id: str
    params: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass(frozen=True)
class VirtualDatasetSpec:
    spec_version: str
    name: str
    inputs: tuple[DatasetRef, ...]
    transform: TransformRef
    outputs: tuple[str, ...] = ("out",)
    output_index: int = 0
    description: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def sibling(self, output_index: int) -> "VirtualDatasetSpec":
        """Same computation, different output slot."""
        return VirtualDatasetSpec(
            spec_version=self.spec_version,
            name=self.name,
            inputs=self.inputs,
            transform=self.transform,
            outputs=self.outputs,
            output_index=output_index,
            description=self.description,
            metadata=self.metadata,
        )


@dataclass(frozen=True)
class ValidatedSpec:
    """A spec checked against a registry and catalog snapshot."""

    spec: VirtualDatasetSpec
    input_ids: tuple[str, ...]
    catalog_generation: int


def _require_str(value, path: str) -> str:
    if not isinstance(value, str) or isinstance(value, bool):
        raise SpecSyntaxError(f"{path} must be a string", path=path)
    return value


def _check_param_value(key: str, value) -> None:
    if isinstance(value, list):
        for i, item in enumerate(value):
            if not isinstance(item, _SCALARS) or item is None:
                raise SpecSyntaxError(
                    f"transform.params.{key}[{i}] must be a scalar", path=f"transform.params.{key}"
                )
        return
    if value is None or not isinstance(value, _SCALARS):
        raise SpecSyntaxError(
            f"transform.params.{key} must be a scalar or list of scalars",
            path=f"transform.params.{key}",
        )


def parse_spec(text: str) -> VirtualDatasetSpec:
    """Parse a YAML spec document. Unknown top-level keys are rejected."""
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark else 0
        col = mark.column + 1 if mark else 0
        raise SpecSyntaxError(f"invalid YAML: {exc.problem}", line=line, col=col) from exc
    except yaml.YAMLError as exc:
        raise SpecSyntaxError(f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecSyntaxError("spec document must be a mapping")

    for key in doc:
        if key not in _TOP_KEYS:
            raise UnknownField(f"unknown field {key!r}", path=str(key))
    if "spec_version" not in doc:
        raise MissingField("missing field 'spec_version'", path="spec_version")
    version = _require_str(doc["spec_version"], "spec_version")
    m = re.match(r"^ssvd/(\d+)(?:\.\d+)?$", version)
    if not m or m.group(1) != "1":
        raise BadVersion(f"unsupported spec version {version!r}", got=version)
    for key in ("name", "inputs", "transform"):
        if key not in doc:
            raise MissingField(f"missing field {key!r}", path=key)

    name = _require_str(doc["name"], "name")
    if not name:
        raise SpecSyntaxError("name must be non-empty", path="name")
    description = _require_str(doc.get("description", ""), "description")

    raw_inputs = doc["inputs"]
    if not isinstance(raw_inputs, list) or not raw_inputs:
        raise SpecSyntaxError("inputs must be a non-empty list", path="inputs")
    inputs = []
    for i, item in enumerate(raw_inputs):
        if not isinstance(item, dict):
            raise SpecSyntaxError(f"inputs[{i}] must be a mapping", path=f"inputs[{i}]")
        for k in item:
            if k != "dataset":
                raise UnknownField(f"unknown field inputs[{i}].{k}", path=f"inputs[{i}].{k}")
        if "dataset" not in item:
            raise MissingField(f"missing field inputs[{i}].dataset", path=f"inputs[{i}].dataset")
        inputs.append(DatasetRef(_require_str(item["dataset"], f"inputs[{i}].dataset")))

    raw_tr = doc["transform"]
    if not isinstance(raw_tr, dict):
        raise SpecSyntaxError("transform must be a mapping", path="transform")
    for k in raw_tr:
        if k not in ("id", "params", "seed"):
            raise UnknownField(f"unknown field transform.{k}", path=f"transform.{k}")
    if "id" not in raw_tr:
        raise MissingField("missing field transform.id", path="transform.id")
    transform_id = _require_str(raw_tr["id"], "transform.id")
    raw_params = raw_tr.get("params", {})
    if raw_params is None:
        raw_params = {}
    if not isinstance(raw_params, dict):
        raise SpecSyntaxError("transform.params must be a mapping", path="transform.params")
    params = {}
    for k, v in raw_params.items():
        key = _require_str(k, "transform.params key")
        _check_param_value(key, v)
        params[key] = v
    seed = raw_tr.get("seed")
    if seed is not None:
        if isinstance(seed, bool) or not isinstance(seed, int) or not (0 <= seed < 1 << 64):
            raise SpecSyntaxError("transform.seed must be an integer in [0, 2^64)", path="transform.seed")

    raw_outputs = doc.get("outputs", ["out"])
    if not isinstance(raw_outputs, list) or not raw_outputs:
        raise SpecSyntaxError("outputs must be a non-empty list", path="outputs")
    outputs = tuple(_require_str(o, f"outputs[{i}]") for i, o in enumerate(raw_outputs))
    if len(set(outputs)) != len(outputs):
        raise SpecSyntaxError("output slot names must be unique", path="outputs")

    output_index = doc.get("output_index", 0)
    if isinstance(output_index, bool) or not isinstance(output_index, int):
        raise SpecSyntaxError("output_index must be an integer", path="output_index")
    if not 0 <= output_index < len(outputs):
        raise SpecSyntaxError(
            f"output_index {output_index} out of range for {len(outputs)} outputs",
            path="output_index",
        )

    metadata = doc.get("metadata", {})
    if metadata is None:
        metadata = {}
    if not isinstance(metadata, dict):
        raise SpecSyntaxError("metadata must be a mapping", path="metadata")

    return VirtualDatasetSpec(
        spec_version=version,
        name=name,
        inputs=tuple(inputs),
        transform=TransformRef(transform_id, params, seed),
        outputs=outputs,
        output_index=output_index,
        description=description,
        metadata=metadata,
    )


def spec_to_dict(spec: VirtualDatasetSpec) -> dict:
    tr: dict = {"id": spec.transform.transform_id, "params": dict(spec.transform.params)}
    if spec.transform.seed is not None:
        tr["seed"] = spec.transform.seed
    doc: dict = {
        "spec_version": spec.spec_version,
        "name": spec.name,
        "inputs": [{"dataset": ref.target} for ref in spec.inputs],
        "transform": tr,
        "outputs": list(spec.outputs),
        "output_index": spec.output_index,
    }
    if spec.description:
        doc["description"] = spec.description
    if spec.metadata:
        doc["metadata"] = spec.metadata
    return doc


def canonical_serialize(spec: VirtualDatasetSpec) -> str:
    """Deterministic text form: sorted keys, declared list order preserved."""
    return yaml.safe_dump(
        spec_to_dict(spec),
        sort_keys=True,
        default_flow_style=False,
        allow_unicode=True,
        width=4096,
    )


def validate_spec(spec: VirtualDatasetSpec, registry, catalog) -> ValidatedSpec:
    """Check links and parameters against a transform registry and a catalog.

    Resolution is pure with respect to the catalog snapshot: the returned
    value captures the catalog generation so creation can detect staleness.
    """
    descriptor = registry.get(spec.transform.transform_id)
    if descriptor is None:
        raise UnknownTransform(
            f"transform {spec.transform.transform_id!r} is not registered",
            transform_id=spec.transform.transform_id,
        )

    input_ids = []
    for ref in spec.inputs:
        record = catalog.resolve_ref(ref.target)
        if record is None:
            raise UnknownDataset(f"dataset {ref.target!r} not found", ref=ref.target)
        input_ids.append(record.id)

    arity = descriptor.input_arity
    if arity is None:
        if spec.n_inputs < 2:
            raise ArityMismatch("at least 2", spec.n_inputs)
    elif spec.n_inputs != arity:
        raise ArityMismatch(arity, spec.n_inputs)
    if spec.n_outputs != descriptor.output_arity:
        raise ArityMismatch(descriptor.output_arity, spec.n_outputs, what="outputs")

    descriptor.validate_params(spec.transform.params)
    if spec.transform.seed is not None and not descriptor.seeded:
        raise ParamError("seed", f"transform {descriptor.transform_id!r} takes no seed")

    return ValidatedSpec(
        spec=spec,
        input_ids=tuple(input_ids),
        catalog_generation=catalog.generation,
    )
