"""Scenario runner: loads fixtures, executes fast (pure virtual time) or
paced (virtual milliseconds mapped to wall milliseconds times a factor),
writes a JSON-lines trace and derives the run summary from the trace file
alone, so ``trace-summarize`` on a saved file reproduces the live numbers.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import powersim
from .powersim import REF_BLK, REF_POS, REF_REC_OP, REF_TR, Scenario, build_scenario
from .runtime import SystemModel, TraceRecord
from .values import NS_PER_MS

DEFAULT_GATEWAY_PORT = 8061
_BATCH_MS = 10


@dataclass
class RunConfig:
    system_path: Optional[Path] = None
    scl_path: Optional[Path] = None
    script_path: Optional[Path] = None
    mode: str = "fast"  # fast | paced
    pace_factor: float = 1.0  # wall ms per virtual ms
    horizon_ms: int = 10_000
    transport: str = "inproc"  # inproc | udp
    start_servers: bool = False
    ephemeral_ports: bool = False
    gateway_port: int = DEFAULT_GATEWAY_PORT
    trace_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.horizon_ms <= 0:
            raise ValueError("horizon must be positive")
        if self.pace_factor <= 0:
            raise ValueError("pace factor must be positive")
        if self.mode not in ("fast", "paced"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.transport not in ("inproc", "udp"):
            raise ValueError(f"unknown transport {self.transport!r}")


@dataclass
class RunSummary:
    trips: int = 0
    recloses: int = 0
    final_breaker_pos: str = "on"
    locked_out: bool = False
    goose_published: int = 0
    goose_delivered: int = 0
    sync_cycles: int = 0
    horizon_ms: int = 0
    trace_records: int = 0

    def to_json(self) -> dict:
        return {
            "trips": self.trips,
            "recloses": self.recloses,
            "final_breaker_pos": self.final_breaker_pos,
            "locked_out": self.locked_out,
            "goose_published": self.goose_published,
            "goose_delivered": self.goose_delivered,
            "sync_cycles": self.sync_cycles,
            "horizon_ms": self.horizon_ms,
            "trace_records": self.trace_records,
        }


def record_to_line(rec: TraceRecord) -> str:
    return json.dumps(rec.to_json(), separators=(",", ":"))


class SimulationRun:
    """One scenario run that external code can step and poll.

    Fast mode steps the scheduler in batches; the TCP servers and gateway
    read buffers between batches, never during one.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        script = powersim.load_fault_script(config.script_path) if config.script_path else []
        self.scenario: Scenario = build_scenario(
            system_doc=config.system_path or powersim.scenario_system_path(),
            scl_text=(Path(config.scl_path).read_text(encoding="utf-8")
                      if config.scl_path else None),
            script=script,
            start_servers=config.start_servers,
            ephemeral_ports=config.ephemeral_ports,
        )
        self.system: SystemModel = self.scenario.system
        self._udp = None
        if config.transport == "udp":
            from .goose_udp import UdpGooseTransport

            self._udp = UdpGooseTransport(self.system)
            self._udp.start()
        self._started = False
        self._now_ms = 0

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        snap = powersim.feeder_snapshot(self.system)
        self.system.scheduler.add_trace(TraceRecord(0, "snapshot", "", "", "", "start", snap))
        self.system.start_all(0)
        # initialization batch: INITs register subscriptions, fire t=0 script
        # entries, take the first samples
        self.system.step_ms(0)

    def step_to(self, t_ms: int) -> None:
        """Advance virtual time, draining operator commands at batch edges."""
        self.start()
        while self._now_ms < t_ms:
            self.system.drain_inbound()
            nxt = min(self._now_ms + _BATCH_MS, t_ms)
            self.system.step_ms(nxt)
            self._now_ms = nxt
        self.system.drain_inbound()

    def finish(self) -> None:
        self.step_to(self.config.horizon_ms)
        if self._udp is not None:
            self._udp.stop()
        for server in self.scenario.servers.values():
            server.stop()

    @property
    def trace(self) -> list[TraceRecord]:
        return self.system.scheduler.trace

    def write_trace(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for rec in self.trace:
                fh.write(record_to_line(rec))
                fh.write("\n")
        return path

    def snapshot(self) -> dict:
        return powersim.feeder_snapshot(self.system)


def run(config: RunConfig) -> tuple[RunSummary, Optional[Path]]:
    """Execute a configured run to its horizon; fast mode is deterministic:
    the same config and script give a byte-identical trace file."""
    sim = SimulationRun(config)
    if config.mode == "paced":
        _pace(sim)
    else:
        sim.finish()
    trace_path = None
    if config.trace_path is not None:
        trace_path = sim.write_trace(Path(config.trace_path))
        summary = summarize_trace_file(trace_path)
    else:
        summary = summarize_records((rec.to_json() for rec in sim.trace))
    if config.mode != "paced":
        for server in sim.scenario.servers.values():
            server.stop()
    return summary, trace_path


def _pace(sim: SimulationRun) -> None:
    sim.start()
    factor = sim.config.pace_factor
    start_wall = time.monotonic()
    t_ms = 0
    while t_ms < sim.config.horizon_ms:
        t_ms = min(t_ms + _BATCH_MS, sim.config.horizon_ms)
        target_wall = start_wall + (t_ms * factor) / 1000.0
        delay = target_wall - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        sim.step_to(t_ms)
    sim.finish()


# ---------------------------------------------------------------------------
# summaries from traces


def summarize_records(records) -> RunSummary:
    s = RunSummary()
    pos = "on"
    locked = False
    for obj in records:
        s.trace_records += 1
        kind = obj.get("kind")
        payload = obj.get("payload") or {}
        if kind == "snapshot":
            pos = payload.get("breaker_pos", pos)
            locked = bool(payload.get("locked_out", locked))
        elif kind == "change":
            ref = payload.get("ref", "")
            new = (payload.get("new") or {}).get("value")
            if ref == REF_TR and new is True:
                s.trips += 1
            elif ref == REF_REC_OP and new is True:
                s.recloses += 1
            elif ref == REF_POS:
                pos = new
            elif ref == REF_BLK:
                locked = bool(new)
        elif kind == "goose_pub":
            s.goose_published += 1
        elif kind == "goose_dlv":
            s.goose_delivered += 1
        elif kind == "note" and obj.get("event") == "sync":
            s.sync_cycles += 1
        s.horizon_ms = max(s.horizon_ms, obj.get("t", 0) // NS_PER_MS)
    s.final_breaker_pos = pos
    s.locked_out = locked
    return s


def summarize_trace_file(path: Path) -> RunSummary:
    def rows():
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    return summarize_records(rows())
