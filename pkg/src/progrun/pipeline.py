"""Declarative pipeline configs and the stock demo graphs.

A config (TOML or JSON) lists modules (type, optional id, params) and
connections ("producer.slot" -> "consumer.slot").  The demo builders
construct the two standard graphs: the heatmap pipeline (loader, min, max,
2D histogram, heatmap, optionally extended with a query variable + select
stage) and the k-means pipeline.
"""

import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import PipelineConfigError, ProgrunError
from .extrema import Max, Min
from .histogram import Histogram2D
from .inputs import RangeQuery, Variable
from .io import CSVLoader
from .kmeans import MBKMeans
from .scheduler import Scheduler
from .selection import Select, SelectDelta
from .vis import Heatmap, ScatterSample, Scatterplot


def _positional(ctor, *keys):
    def build(scheduler, name, params):
        try:
            args = [params.pop(k) for k in keys]
        except KeyError as exc:
            raise PipelineConfigError(f"missing required param {exc.args[0]!r}") from None
        return ctor(*args, scheduler=scheduler, name=name, **params)

    return build


def _plain(ctor):
    def build(scheduler, name, params):
        return ctor(scheduler=scheduler, name=name, **params)

    return build


MODULE_TYPES = {
    "csv_loader": _positional(CSVLoader, "pattern"),
    "min": _plain(Min),
    "max": _plain(Max),
    "histogram2d": _positional(Histogram2D, "x_column", "y_column"),
    "heatmap": _plain(Heatmap),
    "select": _plain(Select),
    "select_delta": _plain(SelectDelta),
    "variable": _plain(Variable),
    "range_query": _plain(RangeQuery),
    "mbk_means": _positional(MBKMeans, "k"),
    "scatter_sample": _positional(ScatterSample, "x_column", "y_column"),
    "scatter_plot": _positional(Scatterplot, "x_column", "y_column"),
}


def load_config(path) -> dict:
    """Read a TOML or JSON pipeline description."""
    p = Path(path)
    if not p.exists():
        raise PipelineConfigError(f"config file not found: {p}")
    raw = p.read_bytes()
    if p.suffix.lower() == ".json":
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise PipelineConfigError(f"invalid JSON: {exc}") from None
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise PipelineConfigError(f"invalid TOML: {exc}") from None


def _split_endpoint(text, connection):
    parts = str(text).rsplit(".", 1)
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise PipelineConfigError(
            f"bad connection {connection}: endpoint {text!r} is not 'module.slot'"
        )
    return parts


def build_config(config: dict, scheduler=None) -> dict:
    """Instantiate and wire a config; returns {module_id: module}."""
    scheduler = scheduler or Scheduler()
    default_quantum = config.get("quantum")
    built = {}
    for spec in config.get("modules", []):
        mtype = spec.get("type")
        if mtype not in MODULE_TYPES:
            raise PipelineConfigError(f"unknown module type {mtype!r}")
        params = dict(spec.get("params", {}))
        if default_quantum is not None and "quantum" not in params:
            params["quantum"] = float(default_quantum)
        name = spec.get("id")
        try:
            module = MODULE_TYPES[mtype](scheduler, name, params)
        except PipelineConfigError as exc:
            raise PipelineConfigError(f"module {name or mtype}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise PipelineConfigError(f"module {name or mtype}: {exc}") from None
        built[module.name] = module
    for conn in config.get("connections", []):
        desc = f"{conn.get('from')!r} -> {conn.get('to')!r}"
        src_id, out_slot = _split_endpoint(conn.get("from"), desc)
        dst_id, in_slot = _split_endpoint(conn.get("to"), desc)
        if src_id not in built:
            raise PipelineConfigError(f"bad connection {desc}: no module {src_id!r}")
        if dst_id not in built:
            raise PipelineConfigError(f"bad connection {desc}: no module {dst_id!r}")
        try:
            scheduler.connect(built[src_id], out_slot, built[dst_id], in_slot)
        except ProgrunError as exc:
            raise PipelineConfigError(f"bad connection {desc}: {exc}") from None
    return built


def build_heatmap_pipeline(
    scheduler,
    pattern,
    x_column,
    y_column,
    xbins=512,
    ybins=512,
    quantum=None,
    with_query=False,
):
    """The five-module heatmap graph: loader feeds min, max and a 2D
    histogram (bounded by min/max), rendered by a heatmap.

    With ``with_query=True`` a query variable + select stage is inserted
    between the loader and the rest, so range queries posted to the variable
    filter the whole view.
    """
    q = {} if quantum is None else {"quantum": quantum}
    mods = {}
    mods["csv"] = CSVLoader(pattern, scheduler=scheduler, **q)
    source = mods["csv"]
    if with_query:
        mods["variable"] = Variable(scheduler=scheduler, **q)
        mods["select"] = Select(scheduler=scheduler, **q)
        scheduler.connect(mods["csv"], "df", mods["select"], "df")
        scheduler.connect(mods["variable"], "df", mods["select"], "query")
        source = mods["select"]
    mods["min"] = Min(scheduler=scheduler, **q)
    mods["max"] = Max(scheduler=scheduler, **q)
    mods["histogram2d"] = Histogram2D(
        x_column, y_column, scheduler=scheduler, xbins=xbins, ybins=ybins, **q
    )
    mods["heatmap"] = Heatmap(scheduler=scheduler, **q)
    scheduler.connect(source, "df", mods["min"], "df")
    scheduler.connect(source, "df", mods["max"], "df")
    scheduler.connect(source, "df", mods["histogram2d"], "df")
    scheduler.connect(mods["min"], "df", mods["histogram2d"], "min")
    scheduler.connect(mods["max"], "df", mods["histogram2d"], "max")
    scheduler.connect(mods["histogram2d"], "df", mods["heatmap"], "array")
    return mods


def build_kmeans_pipeline(
    scheduler,
    pattern,
    k,
    columns=None,
    seed=0,
    batch_size=100,
    quantum=None,
    sample_size=500,
):
    """Loader feeding a steerable mini-batch k-means, plus a point sampler."""
    q = {} if quantum is None else {"quantum": quantum}
    mods = {}
    mods["csv"] = CSVLoader(pattern, scheduler=scheduler, **q)
    mods["mbk_means"] = MBKMeans(
        k, scheduler=scheduler, columns=columns, seed=seed, batch_size=batch_size, **q
    )
    scheduler.connect(mods["csv"], "df", mods["mbk_means"], "df")
    if columns and len(columns) >= 2:
        mods["scatter_sample"] = ScatterSample(
            columns[0], columns[1], scheduler=scheduler, size=sample_size, seed=seed, **q
        )
        scheduler.connect(mods["csv"], "df", mods["scatter_sample"], "df")
    return mods
