"""HTTP surface: a versioned REST API over the catalog, engine, and registry.

Every module error maps to one machine code and one HTTP status via a fixed
table. Bodies are JSON; virtual-dataset creation also accepts a YAML spec
document directly (JSON being a YAML subset, one parser serves both). Every
accepted mutating request appends one line to the audit log.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

import yaml
from fastapi import FastAPI, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from . import errors as E
from .catalog import Catalog, DatasetRecord
from .csvio import serialize_table
from .engine import Cache, Engine
from .ssvd import parse_spec, spec_to_dict
from .storage import Storage
from .transforms import default_registry, load_plugins

_STATUS = {
    # malformed input
    "SYNTAX_ERROR": 400,
    "MISSING_FIELD": 400,
    "UNKNOWN_FIELD": 400,
    "BAD_VERSION": 400,
    "PARSE_ERROR": 400,
    "RAGGED_ROW": 400,
    "DUPLICATE_COLUMN": 400,
    "BAD_REQUEST": 400,
    # missing things
    "NOT_FOUND": 404,
    "UNKNOWN_DATASET": 404,
    # conflicts with current state
    "HAS_DEPENDENTS": 409,
    "VALIDATION_STALE": 409,
    "CYCLE_DETECTED": 409,
    "DUPLICATE_TRANSFORM": 409,
    "SOURCE_CHANGED": 409,
    "IDEMPOTENCY_MISMATCH": 409,
    # semantically invalid requests
    "UNKNOWN_TRANSFORM": 422,
    "PARAM_ERROR": 422,
    "ARITY_MISMATCH": 422,
    "NO_COMMON_COLUMNS": 422,
    "UNKNOWN_COLUMN": 422,
    "UNKNOWN_LABEL_KEY": 422,
    "MISSING_KEY": 422,
    "UNPAIRED_OBJECT": 422,
    "NON_NUMERIC_COLUMN": 422,
    "EMPTY_DATASET": 422,
    "UNREADABLE_SOURCE": 422,
    # auth
    "UNAUTHORIZED": 401,
    # execution failures
    "TRANSFORM_FAILED": 500,
    "CACHE_CORRUPT": 500,
    "PLUGIN_CRASHED": 500,
    "PROTOCOL_VIOLATION": 500,
    "TIMEOUT": 500,
    "BROKEN_LINEAGE": 500,
    "INTERNAL": 500,
}


class IdempotencyMismatch(E.VdataError):
    code = "IDEMPOTENCY_MISMATCH"


def error_response(exc: E.VdataError) -> JSONResponse:
    status = _STATUS.get(exc.code, 500)
    return JSONResponse(
        status_code=status,
        content={"code": exc.code, "message": exc.message, "details": _plain(exc.details)},
    )


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_plain(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


@dataclass
class ServiceConfig:
    data_dir: Path
    addr: str = "127.0.0.1:8000"
    cache_budget_bytes: int = 1 << 30
    auth_enabled: bool = False
    token_file: Path | None = None
    id_seed: int | None = None

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None, **overrides):
        """Config file, then environment, then explicit flags."""
        import os

        env = env if env is not None else dict(os.environ)
        doc: dict = {}
        if path is not None and Path(path).is_file():
            doc = yaml.safe_load(Path(path).read_text()) or {}
        auth = doc.get("auth", {}) or {}
        values = {
            "data_dir": doc.get("data_dir", "./vd-data"),
            "addr": doc.get("addr", "127.0.0.1:8000"),
            "cache_budget_bytes": doc.get("cache_budget_bytes", 1 << 30),
            "auth_enabled": bool(auth.get("enabled", False)),
            "token_file": auth.get("token_file"),
        }
        if "VD_ADDR" in env:
            values["addr"] = env["VD_ADDR"]
        if "VD_DATA_DIR" in env:
            values["data_dir"] = env["VD_DATA_DIR"]
        if "VD_CACHE_BUDGET" in env:
            values["cache_budget_bytes"] = int(env["VD_CACHE_BUDGET"])
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
        values["data_dir"] = Path(values["data_dir"])
        if values.get("token_file"):
            values["token_file"] = Path(values["token_file"])
        return cls(**values)


class Service:
    """Shared state behind the handlers; all mutation goes through the catalog
    and engine, which own their locking."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.storage = Storage()
        self.registry = default_registry()
        load_plugins(config.data_dir / "transforms.d", self.registry)
        self.catalog = Catalog(
            self.storage,
            self.registry,
            data_dir=config.data_dir / "catalog",
            id_seed=config.id_seed,
        )
        self.engine = Engine(
            self.catalog,
            cache=Cache(config.data_dir / "cache", budget_bytes=config.cache_budget_bytes),
        )
        self.tokens = self._load_tokens()
        self.requests_total = 0
        self.audit_lines = 0
        self._idempotency: dict[str, tuple[str, str]] = {}
        self._audit_lock = threading.Lock()

    def _load_tokens(self) -> dict[str, str]:
        if not self.config.auth_enabled or not self.config.token_file:
            return {}
        tokens = {}
        for line in Path(self.config.token_file).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            token, _, role = line.partition(" ")
            tokens[token] = role.strip() or "reader"
        return tokens

    def principal(self, request: Request, write: bool = False) -> str:
        if not self.config.auth_enabled:
            return "anonymous"
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        role = self.tokens.get(token)
        if role is None:
            raise E.Unauthorized("missing or unknown bearer token")
        if write and role != "writer":
            raise E.Unauthorized(f"role {role!r} may not modify the catalog")
        return f"token:{sha256(token.encode()).hexdigest()[:8]}:{role}"

    def audit(self, principal: str, verb: str, target: str) -> None:
        line = json.dumps(
            {"time": time.time(), "principal": principal, "verb": verb, "target": target},
            sort_keys=True,
        )
        with self._audit_lock:
            with open(self.config.data_dir / "audit.log", "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self.audit_lines += 1

    def idempotent_replay(self, key: str, digest: str) -> str | None:
        stored = self._idempotency.get(key)
        if stored is None:
            return None
        old_digest, dataset_id = stored
        if old_digest != digest:
            raise IdempotencyMismatch("idempotency key reused with a different spec")
        return dataset_id

    def remember_idempotency(self, key: str, digest: str, dataset_id: str) -> None:
        self._idempotency[key] = (digest, dataset_id)


def record_to_json(record: DatasetRecord, with_spec: bool = True) -> dict:
    doc = {
        "id": record.id,
        "kind": record.kind,
        "name": record.name,
        "created_at": record.created_at,
        "creator": record.creator,
        "status": record.status,
        "metadata": _plain(record.metadata),
        "object_count": record.object_count,
    }
    if record.kind == "explicit":
        doc["uri"] = record.uri
        doc["format"] = record.format
    elif with_spec:
        doc["spec"] = _plain(spec_to_dict(record.spec))
        doc["input_ids"] = list(record.input_ids)
        doc["transform"] = record.transform_id
    return doc


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="vdata", version="0.1.0")
    svc = Service(config)
    app.state.svc = svc

    @app.exception_handler(E.VdataError)
    async def vdata_error_handler(request: Request, exc: E.VdataError):
        return error_response(exc)

    @app.middleware("http")
    async def count_requests(request: Request, call_next):
        svc.requests_total += 1
        return await call_next(request)

    def body_error(reason: str) -> E.VdataError:
        err = E.VdataError(reason)
        err.code = "BAD_REQUEST"
        return err

    # -- datasets ----------------------------------------------------------

    @app.post("/v1/datasets/explicit", status_code=201)
    async def register_explicit(request: Request):
        principal = svc.principal(request, write=True)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise body_error(f"invalid JSON body: {exc}") from exc
        if "uri" not in body:
            raise body_error("field 'uri' is required")
        dataset_id = await run_in_threadpool(
            svc.catalog.register_explicit,
            uri=body["uri"],
            format=body.get("format", "csv-dir"),
            name=body.get("name", ""),
            labels_file=body.get("labels_file"),
            metadata=body.get("metadata"),
            creator=principal,
        )
        svc.audit(principal, "register", dataset_id)
        return {"id": dataset_id}

    @app.post("/v1/datasets/virtual", status_code=201)
    async def create_virtual(request: Request, response: Response):
        principal = svc.principal(request, write=True)
        text = (await request.body()).decode("utf-8")
        spec = parse_spec(text)
        from .ssvd import canonical_serialize

        digest = sha256(canonical_serialize(spec).encode()).hexdigest()
        idem_key = request.headers.get("idempotency-key")
        if idem_key:
            replay = svc.idempotent_replay(idem_key, digest)
            if replay is not None:
                response.status_code = 200
                return {"id": replay}
        dataset_id = await run_in_threadpool(
            svc.catalog.create_virtual_from_spec, spec, creator=principal
        )
        if idem_key:
            svc.remember_idempotency(idem_key, digest, dataset_id)
        svc.audit(principal, "create", dataset_id)
        return {"id": dataset_id}

    @app.get("/v1/datasets")
    async def search(request: Request):
        svc.principal(request)
        params = request.query_params
        label = None
        if "label" in params:
            key, sep, value = params["label"].partition("=")
            if not sep:
                raise body_error("label filter must look like key=value")
            label = (key, value)
        records = svc.catalog.search(
            name=params.get("name"),
            label=label,
            kind=params.get("kind"),
            transform_id=params.get("transform"),
            creator=params.get("creator"),
        )
        return {"datasets": [record_to_json(r, with_spec=False) for r in records]}

    @app.get("/v1/datasets/{dataset_id}")
    async def get_dataset(dataset_id: str, request: Request):
        svc.principal(request)
        return record_to_json(svc.catalog.get(dataset_id))

    @app.get("/v1/datasets/{dataset_id}/lineage")
    async def lineage(dataset_id: str, request: Request):
        svc.principal(request)
        params = request.query_params
        direction = params.get("direction", "backward")
        if direction not in ("backward", "forward"):
            raise body_error("direction must be backward or forward")
        depth = params.get("depth")
        graph = svc.catalog.lineage(
            dataset_id, direction, int(depth) if depth is not None else None
        )
        return graph.to_dict()

    @app.delete("/v1/datasets/{dataset_id}")
    async def remove(dataset_id: str, request: Request):
        principal = svc.principal(request, write=True)
        mode = request.query_params.get("mode", "restrict")
        if mode not in ("restrict", "cascade"):
            raise body_error("mode must be restrict or cascade")
        removed = svc.catalog.remove(dataset_id, mode=mode)
        svc.audit(principal, "remove", dataset_id)
        return {"removed": removed}

    # -- objects -----------------------------------------------------------

    @app.get("/v1/datasets/{dataset_id}/objects")
    async def object_index(dataset_id: str, request: Request):
        svc.principal(request)
        record = svc.catalog.get(dataset_id)
        objects = []
        for entry in record.index:
            item: dict = {"id": entry.object_id}
            if entry.labels:
                item["labels"] = entry.labels
            if entry.row_count is not None:
                item["rows"] = entry.row_count
            if entry.source_link is not None:
                item["link"] = entry.source_link.to_dict()
            objects.append(item)
        return {"count": len(objects), "objects": objects}

    @app.get("/v1/datasets/{dataset_id}/objects/{object_id}")
    async def read_object(dataset_id: str, object_id: str, request: Request):
        svc.principal(request)
        table = await run_in_threadpool(svc.engine.open_object, dataset_id, object_id)
        payload = serialize_table(table)

        def chunks(step: int = 1 << 16):
            for i in range(0, len(payload), step):
                yield payload[i : i + step]

        return StreamingResponse(chunks(), media_type="text/csv; charset=utf-8")

    @app.post("/v1/datasets/{dataset_id}/materialize")
    async def materialize(dataset_id: str, request: Request):
        principal = svc.principal(request, write=True)
        force = False
        body = await request.body()
        if body:
            try:
                force = bool(json.loads(body).get("force_recompute", False))
            except (json.JSONDecodeError, AttributeError) as exc:
                raise body_error(f"invalid JSON body: {exc}") from exc
        handle = await run_in_threadpool(svc.engine.materialize, dataset_id, force_recompute=force)
        svc.audit(principal, "materialize", dataset_id)
        return handle.stats.to_dict()

    # -- transforms / cache / metrics ---------------------------------------

    @app.get("/v1/transforms")
    async def transforms(request: Request):
        svc.principal(request)
        return {"transforms": [d.to_dict() for d in svc.registry.list_transforms()]}

    @app.get("/v1/cache/stats")
    async def cache_stats(request: Request):
        svc.principal(request)
        return svc.engine.cache_stats()

    @app.get("/v1/metrics")
    async def metrics():
        stats = svc.engine.cache_stats()
        active = len(svc.catalog.search())
        lines = [
            f"vd_requests_total {svc.requests_total}",
            f"vd_audit_lines_total {svc.audit_lines}",
            f"vd_datasets_active {active}",
            f"vd_catalog_generation {svc.catalog.generation}",
            f"vd_cache_entries {stats['entries']}",
            f"vd_cache_bytes {stats['bytes']}",
            f"vd_cache_hits {stats['hits']}",
            f"vd_cache_misses {stats['misses']}",
            f"vd_cache_evictions {stats['evictions']}",
        ]
        return PlainTextResponse("\n".join(lines) + "\n")

    return app
