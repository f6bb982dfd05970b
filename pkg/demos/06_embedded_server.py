"""Serve a live pipeline over HTTP/WebSocket and poke it like the UI does.

Starts the steerable heatmap pipeline on an ephemeral port, exercises the
endpoints (module list, graph, data slices, PNG), posts a range query, and
prints the publication events a browser client would receive.
"""

import json
import threading
import time
from pathlib import Path

import httpx
import numpy as np
from starlette.testclient import TestClient

from progrun.pipeline import build_heatmap_pipeline
from progrun.scheduler import Scheduler
from progrun.server import create_app, serve

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
csv_path = out_dir / "server_demo.csv"
with open(csv_path, "w") as f:
    f.write("x,y\n")
    np.savetxt(f, rng.normal(size=(50_000, 2)), fmt="%.5f", delimiter=",")

sched = Scheduler()
mods = build_heatmap_pipeline(
    sched, str(csv_path), "x", "y", xbins=128, ybins=128, quantum=0.2, with_query=True
)

handle = serve(sched, port=0)
sched.start()
print(f"serving on {handle.url}")

try:
    time.sleep(1.0)  # let some data flow

    modules = httpx.get(f"{handle.url}/modules").json()
    print(f"\nGET /modules -> {len(modules)} modules:")
    for m in modules:
        print(f"  {m['id']:20s} state={m['state']}")

    graph = httpx.get(f"{handle.url}/graph").json()
    print(f"\nGET /graph -> {len(graph['nodes'])} nodes, {len(graph['edges'])} edges")

    slice_ = httpx.get(
        f"{handle.url}/module/{mods['csv'].name}/data/df",
        params={"offset": 0, "limit": 3},
    ).json()
    print(f"\nGET /module/{mods['csv'].name}/data/df?limit=3 ->")
    print(f"  row_ids={slice_['row_ids']} of {slice_['total_rows']} rows")

    png = httpx.get(f"{handle.url}/heatmap/{mods['heatmap'].name}.png")
    png_path = out_dir / "served_heatmap.png"
    png_path.write_bytes(png.content)
    print(f"\nGET /heatmap/... -> {len(png.content)} bytes -> {png_path}")

    query = {"query": "-1 < x < 1 and -1 < y < 1"}
    resp = httpx.post(
        f"{handle.url}/module/{mods['variable'].name}/input", json=query
    )
    print(f"\nPOST {json.dumps(query)} -> {resp.status_code}")
    time.sleep(1.0)
    print(f"select now passes {len(mods['select'].get_data('df'))} rows")
finally:
    sched.stop()
    handle.stop()

# websocket events, shown through the in-process test client
print("\nwebsocket replay (fresh run, throttled publication events):")
sched2 = Scheduler()
mods2 = build_heatmap_pipeline(sched2, str(csv_path), "x", "y", xbins=64, ybins=64, quantum=0.05)
events = []
with TestClient(create_app(sched2)) as client:
    with client.websocket_connect("/ws") as ws:

        def reader():
            try:
                while True:
                    events.append(ws.receive_json())
            except Exception:
                pass

        threading.Thread(target=reader, daemon=True).start()
        sched2.run_until_quiescent(max_seconds=60)
        time.sleep(0.4)  # let the throttle flush its tail
for event in events[:10]:
    print(f"  {event}")
print(f"  ... {len(events)} events total "
      f"(client refetches each module's data on its event)")
print("done")
