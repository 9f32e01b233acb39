"""Transformation repository: built-ins, plugins, and eager application."""

from __future__ import annotations

import secrets

from ..model import DataObject, ObjectIndex, ObjectIndexEntry
from .builtin import (
    partition_assignment,
    partition_sizes,
    register_builtins,
    window_count,
    window_object_id,
)
from .external import ExternalTransform, load_plugin_file, load_plugins
from .registry import InputView, ParamSpec, Registry, TransformDescriptor, TransformImpl

__all__ = [
    "ExternalTransform",
    "InputView",
    "ParamSpec",
    "Registry",
    "TransformDescriptor",
    "TransformImpl",
    "apply_eager",
    "default_registry",
    "load_plugin_file",
    "load_plugins",
    "partition_assignment",
    "partition_sizes",
    "register_builtins",
    "window_count",
    "window_object_id",
]


def default_registry() -> Registry:
    registry = Registry()
    register_builtins(registry)
    return registry


def views_from_objects(
    inputs: list[list[DataObject]], names: list[str] | None = None
) -> list[InputView]:
    views = []
    for i, objects in enumerate(inputs):
        entries = [
            ObjectIndexEntry(
                object_id=o.object_id,
                labels=dict(o.labels),
                source_link=o.source_link,
                row_count=o.payload.row_count if o.payload is not None else None,
                schema=o.payload.schema if o.payload is not None else None,
            )
            for o in objects
        ]
        views.append(
            InputView(
                dataset_id=f"eager{i}",
                name=names[i] if names else f"eager{i}",
                index=ObjectIndex(entries),
            )
        )
    return views


def apply_eager(
    impl: TransformImpl,
    inputs: list[list[DataObject]],
    params: dict,
    seed: int = 0,
    names: list[str] | None = None,
) -> list[list[DataObject]]:
    """Apply a transform directly to in-memory objects, no catalog involved.

    This is the plain function-application path: same kernels, but payloads
    flow straight from inputs to outputs instead of being resolved on demand.
    """
    views = views_from_objects(inputs, names)
    payloads = {
        (view.dataset_id, o.object_id): o.payload
        for view, objects in zip(views, inputs)
        for o in objects
    }

    def fetch(dataset_id: str, object_id: str):
        return payloads[(dataset_id, object_id)]

    slots = impl.plan_index(views, params, seed, mint=lambda: secrets.token_hex(16))
    out = []
    for entries in slots:
        tables = impl.compute_slot(entries, views, fetch, params, seed)
        out.append(
            [
                DataObject(e.object_id, payload=t, labels=dict(e.labels), source_link=e.source_link)
                for e, t in zip(entries, tables)
            ]
        )
    return out
