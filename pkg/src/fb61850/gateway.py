"""HTTP/WebSocket gateway for the operator console.

Runs next to a paced simulation: GET /state returns the feeder snapshot
plus node data, the POST endpoints queue operator commands through the
scheduler's inbound queue, and /events streams trace records as JSON
frames in emission order.  The gateway never mutates the system directly.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import powersim
from .harness import SimulationRun, record_to_line


class GatewayState:
    def __init__(self, sim: SimulationRun):
        self.sim = sim
        self.running = False
        self._lock = threading.Lock()
        self._snapshot: dict = {}
        self._listeners: list[queue.SimpleQueue] = []
        self._seq = 0
        sim.system.scheduler.add_trace_listener(self._on_trace)

    # called on the scheduler thread
    def _on_trace(self, rec) -> None:
        line = record_to_line(rec)
        with self._lock:
            self._seq += 1
            framed = json.dumps({"seq": self._seq, "record": json.loads(line)},
                                separators=(",", ":"))
            for q in self._listeners:
                q.put(framed)

    def refresh_snapshot(self) -> None:
        snap = self.sim.snapshot()
        with self._lock:
            self._snapshot = snap

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._snapshot)

    def attach(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._lock:
            self._listeners.append(q)
        return q

    def detach(self, q: queue.SimpleQueue) -> None:
        with self._lock:
            if q in self._listeners:
                self._listeners.remove(q)


def build_app(state: GatewayState) -> FastAPI:
    app = FastAPI(title="feeder operator gateway")
    # the operator console is served statically from anywhere
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    def guard() -> Optional[JSONResponse]:
        if not state.running:
            return JSONResponse({"error": "simulation not running"}, status_code=503)
        return None

    @app.get("/state")
    def get_state():
        if (resp := guard()) is not None:
            return resp
        return state.snapshot()

    @app.post("/load")
    async def post_load(body: dict):
        if (resp := guard()) is not None:
            return resp
        amps = body.get("amps")
        if not isinstance(amps, (int, float)) or isinstance(amps, bool) or amps < 0:
            return JSONResponse({"error": "amps must be a non-negative number"}, status_code=400)
        powersim.queue_command(state.sim.system, "set_load", float(amps))
        return {"ok": True, "amps": float(amps)}

    @app.post("/disconnector")
    async def post_disconnector(body: dict):
        if (resp := guard()) is not None:
            return resp
        position = body.get("position")
        if position not in ("open", "closed"):
            return JSONResponse({"error": "position must be 'open' or 'closed'"}, status_code=400)
        powersim.queue_command(state.sim.system,
                               "open_disc" if position == "open" else "close_disc")
        return {"ok": True, "position": position}

    @app.post("/fault")
    async def post_fault(body: dict):
        if (resp := guard()) is not None:
            return resp
        if body.get("clear") is True:
            powersim.queue_command(state.sim.system, "clear_fault")
            return {"ok": True, "cleared": True}
        amps = body.get("amps")
        if not isinstance(amps, (int, float)) or isinstance(amps, bool) or amps < 0:
            return JSONResponse({"error": "amps must be a non-negative number, or clear=true"},
                                status_code=400)
        powersim.queue_command(state.sim.system, "set_fault", float(amps))
        return {"ok": True, "amps": float(amps)}

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        q = state.attach()
        try:
            while True:
                try:
                    frame = await asyncio.to_thread(q.get, True, 0.25)
                except queue.Empty:
                    if not state.running:
                        break
                    continue
                await ws.send_text(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            state.detach(q)

    return app


class PacedGateway:
    """Paced scheduler loop plus a uvicorn server, both on worker threads."""

    def __init__(self, sim: SimulationRun, host: str = "127.0.0.1", port: int = 8061):
        self.sim = sim
        self.state = GatewayState(sim)
        self.app = build_app(self.state)
        self.host = host
        self.port = port
        self._sim_thread: Optional[threading.Thread] = None
        self._server = None

    def _run_sim(self) -> None:
        import time

        sim = self.sim
        sim.start()
        self.state.refresh_snapshot()
        factor = sim.config.pace_factor
        start_wall = time.monotonic()
        t_ms = 0
        while t_ms < sim.config.horizon_ms:
            t_ms = min(t_ms + 10, sim.config.horizon_ms)
            target = start_wall + (t_ms * factor) / 1000.0
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            sim.step_to(t_ms)
            self.state.refresh_snapshot()
        self.state.running = False

    def serve(self) -> None:
        """Blocks until the horizon is reached or interrupted."""
        import uvicorn

        self.state.running = True
        self._sim_thread = threading.Thread(target=self._run_sim, name="paced-sim", daemon=True)
        self._sim_thread.start()
        config = uvicorn.Config(self.app, host=self.host, port=self.port, log_level="warning")
        self._server = uvicorn.Server(config)

        def watch() -> None:
            self._sim_thread.join()
            if self._server is not None:
                self._server.should_exit = True

        threading.Thread(target=watch, daemon=True).start()
        self._server.run()
        self.state.running = False
