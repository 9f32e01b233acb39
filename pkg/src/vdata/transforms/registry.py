"""Transform registry: descriptors, parameter schemas, implementation lookup."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import DuplicateTransform, ParamError
from ..model import ObjectIndex, ObjectIndexEntry, Table


@dataclass(frozen=True)
class ParamSpec:
    key: str
    kind: str  # int | number | str | bool | str_list | int_list
    required: bool = True
    constraint: str = ""
    check: Callable | None = None  # value -> reason string or None

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "type": self.kind,
            "required": self.required,
            "constraint": self.constraint,
        }


def _kind_ok(kind: str, value) -> bool:
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "str_list":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if kind == "int_list":
        return isinstance(value, list) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        )
    raise AssertionError(f"unhandled param kind {kind}")


@dataclass(frozen=True)
class TransformDescriptor:
    """Registry entry for one transformation function.

    input_arity None means variadic (at least 2 inputs). Object-level
    transforms map each output object from a bounded set of source objects,
    which lets the engine materialize single objects without running the
    whole dataset.
    """

    transform_id: str
    input_arity: int | None
    output_arity: int
    params: tuple[ParamSpec, ...] = ()
    deterministic: bool = True
    seeded: bool = False
    granularity: str = "object-level"  # or dataset-level
    cross_check: Callable | None = None  # params dict -> None, raises ParamError

    def validate_params(self, params: dict) -> None:
        known = {p.key for p in self.params}
        for key in params:
            if key not in known:
                raise ParamError(key, "unknown parameter")
        for p in self.params:
            if p.key not in params:
                if p.required:
                    raise ParamError(p.key, "required parameter missing")
                continue
            value = params[p.key]
            if not _kind_ok(p.kind, value):
                raise ParamError(p.key, f"expected {p.kind}")
            if p.check is not None:
                reason = p.check(value)
                if reason:
                    raise ParamError(p.key, reason)
        if self.cross_check is not None:
            self.cross_check(params)

    def to_dict(self) -> dict:
        return {
            "id": self.transform_id,
            "input_arity": self.input_arity if self.input_arity is not None else "variadic",
            "output_arity": self.output_arity,
            "params": [p.to_dict() for p in self.params],
            "deterministic": self.deterministic,
            "seeded": self.seeded,
            "granularity": self.granularity,
        }


@dataclass(frozen=True)
class InputView:
    """What a transform may read about one input dataset without payloads."""

    dataset_id: str
    name: str
    index: ObjectIndex


class TransformImpl:
    """Base for transform implementations.

    plan_index derives every output slot's object index (ids, labels,
    provenance links, row counts, schemas) from the inputs' indexes alone;
    payloads are never touched. compute_object produces one output object's
    payload; fetch(dataset_id, object_id) supplies source payloads.
    """

    descriptor: TransformDescriptor

    def plan_index(
        self, inputs: list[InputView], params: dict, seed: int, mint: Callable[[], str]
    ) -> list[list[ObjectIndexEntry]]:
        raise NotImplementedError

    def object_local(self, params: dict) -> bool:
        """True when each output object depends only on its linked sources."""
        return self.descriptor.granularity == "object-level"

    def compute_object(
        self,
        entry: ObjectIndexEntry,
        inputs: list[InputView],
        fetch: Callable[[str, str], Table],
        params: dict,
        seed: int,
    ) -> Table:
        raise NotImplementedError

    def compute_slot(
        self,
        entries: list[ObjectIndexEntry],
        inputs: list[InputView],
        fetch: Callable[[str, str], Table],
        params: dict,
        seed: int,
    ) -> list[Table]:
        """All payloads for one output slot; default is the per-object loop."""
        return [self.compute_object(e, inputs, fetch, params, seed) for e in entries]


@dataclass
class Registry:
    """Transform lookup by id: built-ins plus registered plugins."""

    _impls: dict = field(default_factory=dict)

    def register(self, impl: TransformImpl) -> None:
        tid = impl.descriptor.transform_id
        if tid in self._impls:
            raise DuplicateTransform(f"transform {tid!r} already registered", transform_id=tid)
        self._impls[tid] = impl

    def get(self, transform_id: str) -> TransformDescriptor | None:
        impl = self._impls.get(transform_id)
        return impl.descriptor if impl else None

    def impl(self, transform_id: str) -> TransformImpl:
        try:
            return self._impls[transform_id]
        except KeyError:
            raise ParamError("transform", f"unknown transform {transform_id!r}") from None

    def list_transforms(self) -> list[TransformDescriptor]:
        return [self._impls[tid].descriptor for tid in sorted(self._impls)]

    def __contains__(self, transform_id: str) -> bool:
        return transform_id in self._impls
