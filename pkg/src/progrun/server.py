"""Embedded HTTP/WebSocket server exposing a running scheduler.

Endpoints (all JSON unless noted):

    GET  /modules                     module summaries
    GET  /module/{id}                 full module state
    GET  /module/{id}/data/{slot}     paginated table slice (?offset=&limit=)
    GET  /graph                       dependency graph nodes + edges
    GET  /heatmap/{id}.png            current heatmap frame as PNG
    POST /module/{id}/input           body forwarded to from_input
    POST /scheduler/start | /scheduler/stop | /scheduler/step
    GET  /scheduler                   scheduler state
    WS   /ws                          {"module_id", "run_number"} per
                                      publication, throttled per module

The server never runs module code itself: reads go through published
snapshots, writes through the scheduler's input path.
"""

import asyncio
import logging
import os
import threading
import time
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI, HTTPException, Request, Response, WebSocket, WebSocketDisconnect

from .errors import InvalidMessageError, NotInputModuleError, ProgrunError
from .table import DataTable

logger = logging.getLogger(__name__)

DEFAULT_PORT = int(os.environ.get("PROGRUN_PORT", "8080"))
WS_MIN_INTERVAL = 0.1  # seconds; at most 10 events/s per module per client


class _Broadcaster:
    """Fans publication events out to websocket clients with per-module
    throttling; intermediate events coalesce to the latest run number."""

    def __init__(self):
        self._clients: set = set()
        self._loop = None
        self._lock = threading.Lock()
        self._last_sent: dict = {}  # (client, module) -> (time, run)
        self._pending: dict = {}  # (client, module) -> run

    def attach_loop(self, loop):
        self._loop = loop

    def add_client(self, queue):
        with self._lock:
            self._clients.add(queue)

    def remove_client(self, queue):
        with self._lock:
            self._clients.discard(queue)
            for key in [k for k in self._last_sent if k[0] is queue]:
                del self._last_sent[key]
            for key in [k for k in self._pending if k[0] is queue]:
                del self._pending[key]

    def publish(self, module_id: str, run_number: int):
        """Called from the scheduler thread on every publication."""
        loop = self._loop
        if loop is None or loop.is_closed():
            return
        loop.call_soon_threadsafe(self._dispatch, module_id, run_number)

    def _dispatch(self, module_id, run_number):
        now = time.monotonic()
        with self._lock:
            clients = list(self._clients)
        for queue in clients:
            key = (queue, module_id)
            sent = self._last_sent.get(key)
            if sent is not None and now - sent[0] < WS_MIN_INTERVAL:
                self._pending[key] = max(self._pending.get(key, 0), run_number)
                continue
            self._send(queue, key, module_id, run_number, now)

    def _send(self, queue, key, module_id, run_number, now):
        last = self._last_sent.get(key)
        if last is not None and run_number <= last[1]:
            return  # never emit out of order
        self._last_sent[key] = (now, run_number)
        queue.put_nowait({"module_id": module_id, "run_number": run_number})

    async def flush_pending(self):
        """Periodic task delivering coalesced events once throttling allows."""
        while True:
            await asyncio.sleep(WS_MIN_INTERVAL / 2)
            now = time.monotonic()
            with self._lock:
                items = list(self._pending.items())
            for key, run_number in items:
                sent = self._last_sent.get(key)
                if sent is None or now - sent[0] >= WS_MIN_INTERVAL:
                    with self._lock:
                        self._pending.pop(key, None)
                    self._send(key[0], key, key[1], run_number, now)


def create_app(scheduler) -> FastAPI:
    broadcaster = _Broadcaster()
    scheduler.add_listener(broadcaster.publish)

    @asynccontextmanager
    async def lifespan(app_):
        broadcaster.attach_loop(asyncio.get_running_loop())
        flusher = asyncio.create_task(broadcaster.flush_pending())
        try:
            yield
        finally:
            flusher.cancel()
            scheduler.remove_listener(broadcaster.publish)

    app = FastAPI(title="progrun", lifespan=lifespan)
    app.state.broadcaster = broadcaster
    app.state.scheduler = scheduler

    def _module_or_404(module_id):
        module = scheduler.get_module(module_id)
        if module is None:
            raise HTTPException(status_code=404, detail=f"no module {module_id!r}")
        return module

    @app.get("/modules")
    def modules():
        return scheduler.list_modules()

    @app.get("/module/{module_id}")
    def module_detail(module_id: str):
        return _module_or_404(module_id).to_json(short=False)

    @app.get("/module/{module_id}/data/{slot}")
    def module_data(module_id: str, slot: str, offset: int = 0, limit: int = 1000):
        module = _module_or_404(module_id)
        try:
            data = module.get_data(slot)
        except ProgrunError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        if not isinstance(data, DataTable):
            raise HTTPException(
                status_code=404, detail=f"slot {slot!r} holds no table"
            )
        return data.to_json_slice(offset=offset, limit=limit)

    @app.get("/graph")
    def graph():
        return scheduler.to_graph_json()

    @app.get("/heatmap/{module_id}.png")
    def heatmap_png(module_id: str):
        module = _module_or_404(module_id)
        frame = getattr(module, "frame", None)
        if frame is None:
            raise HTTPException(status_code=404, detail="no frame rendered yet")
        return Response(content=frame.to_png(), media_type="image/png")

    @app.post("/module/{module_id}/input")
    async def module_input(module_id: str, request: Request):
        module = _module_or_404(module_id)
        try:
            msg = await request.json()
        except Exception:  # noqa: BLE001
            raise HTTPException(status_code=400, detail="body must be JSON") from None
        try:
            module.from_input(msg)
        except NotInputModuleError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except InvalidMessageError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {"status": "ok", "module_id": module_id}

    @app.get("/scheduler")
    def scheduler_state():
        return scheduler.to_json()

    @app.post("/scheduler/start")
    def scheduler_start():
        scheduler.start()
        return {"status": "ok", "running": scheduler.is_running()}

    @app.post("/scheduler/stop")
    def scheduler_stop():
        scheduler.stop()
        return {"status": "ok", "running": scheduler.is_running()}

    @app.post("/scheduler/step")
    def scheduler_step():
        if scheduler.is_running():
            raise HTTPException(status_code=409, detail="scheduler thread is running")
        activated = scheduler.step_once()
        return {"status": "ok", "activated": activated}

    @app.websocket("/ws")
    async def websocket_events(ws: WebSocket):
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()
        broadcaster.add_client(queue)
        try:
            while True:
                event = await queue.get()
                await ws.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            broadcaster.remove_client(queue)

    return app


class ServerHandle:
    """A uvicorn server running on a daemon thread."""

    def __init__(self, server, thread, host, port):
        self._server = server
        self._thread = thread
        self.host = host
        self.port = port

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def stop(self, timeout: float = 5.0) -> None:
        self._server.should_exit = True
        self._thread.join(timeout)


def serve(scheduler, port: int = None, host: str = "127.0.0.1") -> ServerHandle:
    """Run the app for this scheduler in a background thread."""
    port = DEFAULT_PORT if port is None else port
    app = create_app(scheduler)
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, name="progrun-server", daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started and time.time() < deadline:
        if not thread.is_alive():
            raise ProgrunError("server failed to start")
        time.sleep(0.01)
    if not server.started:
        raise ProgrunError("server did not start in time")
    # the port may have been 0 (ephemeral); read the real one back
    try:
        sock = server.servers[0].sockets[0]
        port = sock.getsockname()[1]
    except (IndexError, AttributeError):
        pass
    return ServerHandle(server, thread, host, port)
