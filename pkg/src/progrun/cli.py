"""Command-line entry point.

    progrun run <pipeline.toml|json> [--port P] [--quantum Q] [--headless]
    progrun demo heatmap <csv-glob> --x COL --y COL [--bins N] [...]
    progrun demo kmeans <csv-glob> --k K [--columns x,y] [...]

``--headless`` runs the scheduler to termination without a server and writes
final artifacts (heatmap PNGs, centroid CSVs, a summary JSON) into ``--out``.
Otherwise the pipeline is served over HTTP/WebSocket until interrupted.
"""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .errors import PipelineConfigError, ProgrunError
from .kmeans import MBKMeans
from .pipeline import build_config, build_heatmap_pipeline, build_kmeans_pipeline, load_config
from .scheduler import Scheduler
from .server import DEFAULT_PORT, serve
from .vis import Heatmap

logger = logging.getLogger(__name__)


def _add_common(parser):
    parser.add_argument("--port", type=int, default=None, help="HTTP port (default $PROGRUN_PORT or 8080)")
    parser.add_argument("--quantum", type=float, default=None, help="default per-module quantum, seconds")
    parser.add_argument("--headless", action="store_true", help="run to termination and write outputs")
    parser.add_argument("--out", default="out", help="output directory for --headless artifacts")


def build_parser():
    parser = argparse.ArgumentParser(prog="progrun", description="progressive dataflow runtime")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="build and run a pipeline config")
    run_p.add_argument("config", help="pipeline file (.toml or .json)")
    _add_common(run_p)

    demo_p = sub.add_parser("demo", help="run a stock demo pipeline")
    demo_sub = demo_p.add_subparsers(dest="demo", required=True)

    heat_p = demo_sub.add_parser("heatmap", help="progressive heatmap over CSV files")
    heat_p.add_argument("pattern", help="CSV file or glob (bz2/gz supported)")
    heat_p.add_argument("--x", required=True, help="x column name")
    heat_p.add_argument("--y", required=True, help="y column name")
    heat_p.add_argument("--bins", type=int, default=512, help="bins per axis")
    _add_common(heat_p)

    km_p = demo_sub.add_parser("kmeans", help="steerable mini-batch k-means over CSV files")
    km_p.add_argument("pattern", help="CSV file or glob")
    km_p.add_argument("--k", type=int, required=True, help="number of clusters")
    km_p.add_argument("--columns", default=None, help="comma-separated numeric columns")
    km_p.add_argument("--seed", type=int, default=0)
    km_p.add_argument("--batch-size", type=int, default=100)
    _add_common(km_p)
    return parser


def _build(args, scheduler):
    if args.command == "run":
        config = load_config(args.config)
        if args.quantum is not None:
            config = dict(config)
            config.setdefault("quantum", args.quantum)
        return build_config(config, scheduler)
    if args.demo == "heatmap":
        return build_heatmap_pipeline(
            scheduler,
            args.pattern,
            args.x,
            args.y,
            xbins=args.bins,
            ybins=args.bins,
            quantum=args.quantum,
            with_query=True,
        )
    if args.demo == "kmeans":
        columns = args.columns.split(",") if args.columns else None
        return build_kmeans_pipeline(
            scheduler,
            args.pattern,
            args.k,
            columns=columns,
            seed=args.seed,
            batch_size=args.batch_size,
            quantum=args.quantum,
        )
    raise PipelineConfigError(f"unknown demo {args.demo!r}")


def write_outputs(modules, out_dir) -> list:
    """Final artifacts for a finished headless run; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for module in modules.values():
        if isinstance(module, Heatmap) and module.frame is not None:
            path = out / f"{module.name}.png"
            path.write_bytes(module.frame.to_png())
            written.append(path)
        if isinstance(module, MBKMeans) and module.centroids is not None:
            path = out / f"{module.name}_centroids.csv"
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(module.columns)
                writer.writerows(module.centroids.tolist())
            written.append(path)
    summary = {
        name: {"state": m.state.value, "runs": len(m.trace)}
        for name, m in modules.items()
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2))
    written.append(summary_path)
    return written


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    scheduler = Scheduler()
    try:
        modules = _build(args, scheduler)
    except (PipelineConfigError, ProgrunError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.headless:
        scheduler.run_until_quiescent()
        written = write_outputs(modules, args.out)
        for path in written:
            print(path)
        return 0

    port = args.port if args.port is not None else DEFAULT_PORT
    handle = serve(scheduler, port=port)
    scheduler.start()
    print(f"serving on {handle.url} (Ctrl-C to stop)", flush=True)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        scheduler.stop()
        handle.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
