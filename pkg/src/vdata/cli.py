"""`vd` command line: thin HTTP wrappers plus the server entry point.

Exit codes: 0 success, 1 service error (the error code and message are
printed to stderr), 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx
import yaml


class ApiCallError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class Api:
    def __init__(self, addr: str, token: str | None):
        base = addr if addr.startswith("http") else f"http://{addr}"
        headers = {"authorization": f"Bearer {token}"} if token else {}
        self.client = httpx.Client(base_url=base, headers=headers, timeout=60.0)

    def call(self, method: str, path: str, **kwargs):
        try:
            response = self.client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise ApiCallError("CONNECTION", str(exc)) from exc
        if response.status_code >= 400:
            try:
                doc = response.json()
                raise ApiCallError(doc.get("code", "ERROR"), doc.get("message", response.text))
            except (ValueError, KeyError):
                raise ApiCallError(f"HTTP_{response.status_code}", response.text) from None
        return response


pass_api = click.make_pass_decorator(Api)


@click.group()
@click.option("--addr", default=None, help="service address (env VD_ADDR)")
@click.option("--token", default=None, help="bearer token (env VD_TOKEN)")
@click.pass_context
def main(ctx, addr, token):
    """Manage virtual datasets over the service API."""
    addr = addr or os.environ.get("VD_ADDR", "127.0.0.1:8000")
    token = token or os.environ.get("VD_TOKEN")
    ctx.obj = Api(addr, token)


def _run(fn):
    try:
        fn()
    except ApiCallError as exc:
        click.echo(f"error {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("uri")
@click.option("--name", default="")
@click.option("--format", "format_", default="csv-dir")
@click.option("--labels-file", default=None)
@click.option("--meta", multiple=True, help="metadata entries key=value")
@pass_api
def register(api, uri, name, format_, labels_file, meta):
    """Register an explicit dataset from a storage URI."""

    def go():
        metadata = dict(item.partition("=")[::2] for item in meta)
        body = {"uri": uri, "name": name, "format": format_, "metadata": metadata}
        if labels_file:
            body["labels_file"] = labels_file
        doc = api.call("POST", "/v1/datasets/explicit", json=body).json()
        click.echo(doc["id"])

    _run(go)


@main.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@pass_api
def create(api, spec_file):
    """Create a virtual dataset from a YAML spec file."""

    def go():
        text = Path(spec_file).read_text()
        doc = api.call(
            "POST", "/v1/datasets/virtual", content=text, headers={"content-type": "application/yaml"}
        ).json()
        click.echo(doc["id"])

    _run(go)


@main.command()
@click.option("--name", default=None)
@click.option("--kind", default=None, type=click.Choice(["explicit", "virtual"]))
@click.option("--transform", default=None)
@click.option("--label", default=None, help="key=value")
@click.option("--creator", default=None)
@pass_api
def ls(api, name, kind, transform, label, creator):
    """List datasets matching the given filters."""

    def go():
        params = {
            k: v
            for k, v in (
                ("name", name),
                ("kind", kind),
                ("transform", transform),
                ("label", label),
                ("creator", creator),
            )
            if v is not None
        }
        doc = api.call("GET", "/v1/datasets", params=params).json()
        for record in doc["datasets"]:
            click.echo(
                f"{record['id']}  {record['kind']:8}  {record['object_count']:6}  {record['name']}"
            )

    _run(go)


@main.command()
@click.argument("dataset_id")
@pass_api
def show(api, dataset_id):
    """Print one dataset record as YAML."""
    _run(
        lambda: click.echo(
            yaml.safe_dump(api.call("GET", f"/v1/datasets/{dataset_id}").json(), sort_keys=True),
            nl=False,
        )
    )


@main.command()
@click.argument("dataset_id")
@click.option("--direction", default="backward", type=click.Choice(["backward", "forward"]))
@click.option("--depth", default=None, type=int)
@pass_api
def lineage(api, dataset_id, direction, depth):
    """Show the lineage graph around a dataset."""

    def go():
        params = {"direction": direction}
        if depth is not None:
            params["depth"] = depth
        doc = api.call("GET", f"/v1/datasets/{dataset_id}/lineage", params=params).json()
        for node in doc["nodes"]:
            click.echo(f"node {node}")
        for edge in doc["edges"]:
            click.echo(f"edge {edge['from']} -> {edge['to']} via {edge['via']}[{edge['input_position']}]")

    _run(go)


@main.command()
@click.argument("dataset_id")
@click.option("--mode", default="restrict", type=click.Choice(["restrict", "cascade"]))
@pass_api
def rm(api, dataset_id, mode):
    """Remove a dataset (restrict refuses when dependents exist)."""

    def go():
        doc = api.call("DELETE", f"/v1/datasets/{dataset_id}", params={"mode": mode}).json()
        for removed in doc["removed"]:
            click.echo(removed)

    _run(go)


@main.command()
@click.argument("dataset_id")
@click.option("--force", is_flag=True, help="recompute even on cache hits")
@pass_api
def materialize(api, dataset_id, force):
    """Materialize a dataset and print run statistics."""

    def go():
        doc = api.call(
            "POST",
            f"/v1/datasets/{dataset_id}/materialize",
            json={"force_recompute": force},
        ).json()
        for key, value in doc.items():
            click.echo(f"{key}: {value}")

    _run(go)


@main.command()
@click.argument("dataset_id")
@click.argument("object_id")
@pass_api
def cat(api, dataset_id, object_id):
    """Write one object's CSV payload to stdout."""

    def go():
        response = api.call("GET", f"/v1/datasets/{dataset_id}/objects/{object_id}")
        sys.stdout.write(response.text)

    _run(go)


@main.command()
@pass_api
def transforms(api):
    """List registered transformations."""

    def go():
        doc = api.call("GET", "/v1/transforms").json()
        for item in doc["transforms"]:
            arity = item["input_arity"]
            click.echo(f"{item['id']:18} in={arity} out={item['output_arity']} seeded={item['seeded']}")

    _run(go)


@main.command()
@click.option("--addr", default=None, help="bind address host:port")
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--cache-budget", default=None, type=int, help="cache budget in bytes")
@click.option("--token-file", default=None, type=click.Path())
@click.option("--config", "config_path", default="vd.yaml", type=click.Path())
def serve(addr, data_dir, cache_budget, token_file, config_path):
    """Run the service (config file, then env, then flags)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(
        config_path,
        addr=addr,
        data_dir=data_dir,
        cache_budget_bytes=cache_budget,
        token_file=token_file,
        auth_enabled=True if token_file else None,
    )
    app = create_app(config)
    host, _, port = config.addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")


if __name__ == "__main__":
    main()
