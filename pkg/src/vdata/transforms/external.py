"""External-process transforms.

User code plugs in as an executable that is spawned once per object group.
Wire protocol, bit-exact: input tables arrive on standard input as CSV blocks
separated by a line ``---``; parameters and the seed are passed as ``key=value``
command-line arguments (sorted by key, list values comma-joined); output tables
are read from standard output in the same CSV-block format, one block per
output slot. A non-zero exit status fails the transform.

Plugins are registered from ``transforms.d/<id>.yaml``:

    id: my_transform
    exec: ./my_transform.py        # relative to the registration file
    input_arity: 1
    output_arity: 1
    seeded: false
    params: { gain: number }       # optional
"""

from __future__ import annotations

import os
import subprocess
from pathlib import Path

import yaml

from ..csvio import parse_table, serialize_table
from ..errors import (
    PluginCrashed,
    PluginTimeout,
    ProtocolViolation,
    SpecSyntaxError,
    UnpairedObject,
    VdataError,
)
from ..model import ObjectIndexEntry, SourceLink, Table
from .registry import ParamSpec, Registry, TransformDescriptor, TransformImpl

ENV_ALLOWLIST = ("PATH", "LANG", "LC_ALL")
DEFAULT_TIMEOUT_SECONDS = 300.0

_SEPARATOR = "---"


def encode_blocks(tables: list[Table]) -> bytes:
    parts = [serialize_table(t) for t in tables]
    for part in parts:
        if part.startswith(b"---\n") or b"\n---\n" in part:
            raise ProtocolViolation("payload contains the block separator line")
    return (_SEPARATOR.encode() + b"\n").join(parts)


def decode_blocks(data: bytes, expected: int) -> list[Table]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolViolation(f"plugin output is not UTF-8: {exc}") from exc
    blocks: list[list[str]] = [[]]
    for line in text.split("\n"):
        if line == _SEPARATOR:
            blocks.append([])
        else:
            blocks[-1].append(line)
    if len(blocks) != expected:
        raise ProtocolViolation(f"expected {expected} output block(s), got {len(blocks)}")
    tables = []
    for i, lines in enumerate(blocks):
        body = "\n".join(lines)
        if not body.endswith("\n"):
            body += "\n"
        try:
            tables.append(parse_table(body))
        except VdataError as exc:
            raise ProtocolViolation(f"output block {i}: {exc}") from exc
    return tables


def _argv_params(params: dict, seed: int | None) -> list[str]:
    args = []
    for key in sorted(params):
        value = params[key]
        if isinstance(value, list):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        args.append(f"{key}={rendered}")
    if seed is not None:
        args.append(f"seed={seed}")
    return args


class ExternalTransform(TransformImpl):
    """One registered plugin executable."""

    def __init__(
        self,
        descriptor: TransformDescriptor,
        exec_path: Path,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
    ) -> None:
        self.descriptor = descriptor
        self.exec_path = Path(exec_path)
        self.timeout = timeout

    def plan_index(self, inputs, params, seed, mint):
        counts = {len(view.index) for view in inputs}
        if len(counts) != 1:
            raise UnpairedObject("inputs must have equal object counts for positional pairing")
        first = inputs[0]
        slots = []
        for slot in range(self.descriptor.output_arity):
            entries = []
            for pos, e in enumerate(first.index):
                entries.append(
                    ObjectIndexEntry(
                        object_id=e.object_id if self.descriptor.output_arity == 1 else mint(),
                        labels=dict(e.labels),
                        source_link=SourceLink(
                            first.dataset_id, e.object_id, {"pos": pos, "slot": slot}
                        ),
                        row_count=None,
                        schema=None,  # produced by user code; unknown until materialized
                    )
                )
            slots.append(entries)
        return slots

    def _run(self, input_tables: list[Table], params: dict, seed: int) -> list[Table]:
        argv = [str(self.exec_path)] + _argv_params(
            params, seed if self.descriptor.seeded else None
        )
        env = {k: os.environ[k] for k in ENV_ALLOWLIST if k in os.environ}
        try:
            proc = subprocess.run(
                argv,
                input=encode_blocks(input_tables),
                capture_output=True,
                timeout=self.timeout,
                env=env,
            )
        except subprocess.TimeoutExpired as exc:
            raise PluginTimeout(
                f"plugin {self.descriptor.transform_id!r} exceeded {self.timeout}s", limit=self.timeout
            ) from exc
        except OSError as exc:
            raise PluginCrashed(-1, f"failed to spawn {self.exec_path}: {exc}") from exc
        if proc.returncode != 0:
            excerpt = proc.stderr.decode("utf-8", "replace")[:400]
            raise PluginCrashed(proc.returncode, excerpt)
        return decode_blocks(proc.stdout, self.descriptor.output_arity)

    def compute_object(self, entry, inputs, fetch, params, seed):
        pos = entry.source_link.params["pos"]
        slot = entry.source_link.params["slot"]
        sources = [
            fetch(view.dataset_id, view.index.entries()[pos].object_id) for view in inputs
        ]
        return self._run(sources, params, seed)[slot]


def load_plugin_file(path: Path) -> ExternalTransform:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise SpecSyntaxError(f"plugin file {path} must be a mapping")
    for key in ("id", "exec", "input_arity", "output_arity"):
        if key not in doc:
            raise SpecSyntaxError(f"plugin file {path} missing {key!r}")
    params = doc.get("params") or {}
    specs = tuple(ParamSpec(k, kind, required=False) for k, kind in sorted(params.items()))
    descriptor = TransformDescriptor(
        transform_id=str(doc["id"]),
        input_arity=int(doc["input_arity"]),
        output_arity=int(doc["output_arity"]),
        params=specs,
        deterministic=bool(doc.get("deterministic", True)),
        seeded=bool(doc.get("seeded", False)),
        granularity="object-level",
    )
    exec_path = Path(doc["exec"])
    if not exec_path.is_absolute():
        exec_path = Path(path).parent / exec_path
    timeout = float(doc.get("timeout_seconds", DEFAULT_TIMEOUT_SECONDS))
    return ExternalTransform(descriptor, exec_path, timeout)


def load_plugins(directory: Path, registry: Registry) -> int:
    """Register every transforms.d/<id>.yaml entry; returns the count loaded."""
    directory = Path(directory)
    if not directory.is_dir():
        return 0
    count = 0
    for path in sorted(directory.glob("*.yaml")):
        registry.register(load_plugin_file(path))
        count += 1
    return count
