"""Per-device read/write service over a length-prefixed JSON TCP protocol.

The server never reaches into the live model: it answers from a buffer
that ``sync_cycle`` refreshes from the model's change records, so reads
are non-blocking and consistent with a known virtual time.  Writes are not
applied directly either; an accepted write is forwarded to the owning
node's main function block through the scheduler's inbound queue, and the
acknowledgment means "accepted", not "applied".

Frame: u32 big-endian length, then a UTF-8 JSON body.  Requests:

    {"op": "hello", "version": 1}
    {"op": "get", "ref": "BRKLD0/XCBR1.Pos.stVal"}
    {"op": "set", "ref": ..., "value": {"type": ..., "value": ...}}
    {"op": "dir", "scope": ""}          # "" device, "LD", or "LD/LN"

Responses carry "ok"; failures add "err" (REF_UNKNOWN, REF_READONLY,
TYPE_MISMATCH, BAD_REQUEST) and a "message".
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

from .lnmodel import ChangeRecord, ModelStore, parse_reference
from .runtime import Device, EventDelivery, SystemModel, TraceRecord
from .values import DataValue, Nanos, Quality, value_from_json, value_to_json

DEFAULT_PORT = 10261
PROTOCOL_VERSION = 1
_MAX_FRAME = 1 << 20


class ProtocolError(ValueError):
    pass


@dataclass
class BufferEntry:
    value: DataValue
    q: Quality
    t: Nanos
    sync_seq: int


class ServerBuffer:
    """Snapshot of the SCL-declared attributes, keyed by value-attribute
    reference, refreshed from change records in emission order."""

    def __init__(self, model: ModelStore, declared: Iterable[str] | None = None):
        self._lock = threading.Lock()
        self.entries: dict[str, BufferEntry] = {}
        refs = list(declared) if declared is not None else [
            r.render() for r in model.walk_references()
        ]
        for ref in refs:
            value, q, t = model.resolve(ref)
            self.entries[ref] = BufferEntry(value, q, t, 0)
        self.sync_cycles = 0
        self.skipped_records = 0

    def sync_cycle(self, records: Iterable[ChangeRecord]) -> int:
        """Fold change records into the buffer; idempotent on replay since
        sync_seq comes from the record sequence numbers."""
        applied = 0
        with self._lock:
            for rec in records:
                entry = self.entries.get(rec.ref)
                if entry is None:
                    self.skipped_records += 1  # model exceeds SCL exposure
                    continue
                entry.value = rec.new
                entry.q = rec.q
                entry.t = rec.t
                entry.sync_seq = rec.seq
                applied += 1
            self.sync_cycles += 1
        return applied

    def read(self, ref: str) -> Optional[BufferEntry]:
        with self._lock:
            entry = self.entries.get(ref)
            return BufferEntry(entry.value, entry.q, entry.t, entry.sync_seq) if entry else None

    def snapshot(self) -> dict[str, BufferEntry]:
        with self._lock:
            return {k: BufferEntry(e.value, e.q, e.t, e.sync_seq) for k, e in self.entries.items()}


class AcsiServer:
    """TCP endpoint for one device."""

    def __init__(
        self,
        system: SystemModel,
        device: Device,
        declared: Iterable[str] | None = None,
        writable: Iterable[str] = (),
        port: int = DEFAULT_PORT,
        host: str = "127.0.0.1",
    ):
        if device.model is None:
            raise ProtocolError(f"{device.name}: no model attached")
        self.system = system
        self.device = device
        self.buffer = ServerBuffer(device.model, declared)
        self.writable = set(writable)
        self._host = host
        self._port = port
        self._tcp: Optional[socketserver.ThreadingTCPServer] = None
        self._thread: Optional[threading.Thread] = None
        device.server = self

    # -- lifecycle

    def start(self) -> int:
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self) -> None:
                outer._serve_session(self.request)

        class TCP(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._tcp = TCP((self._host, self._port), Handler)
        self._port = self._tcp.server_address[1]
        self._thread = threading.Thread(
            target=self._tcp.serve_forever, name=f"acsi-{self.device.name}", daemon=True
        )
        self._thread.start()
        return self._port

    def stop(self) -> None:
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
            self._tcp = None

    @property
    def port(self) -> int:
        return self._port

    # -- request handling (session threads)

    def _serve_session(self, sock: socket.socket) -> None:
        try:
            while True:
                body = _read_frame(sock)
                if body is None:
                    return
                try:
                    request = json.loads(body)
                    reply = self._handle(request)
                except (ProtocolError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    reply = {"ok": False, "err": "BAD_REQUEST", "message": str(e)}
                _write_frame(sock, json.dumps(reply).encode())
        except (ConnectionError, OSError):
            return

    def _handle(self, request: dict) -> dict:
        op = request.get("op")
        if op == "hello":
            return {"ok": True, "version": PROTOCOL_VERSION, "device": self.device.name}
        if op == "get":
            return self.get_data_values(request["ref"])
        if op == "set":
            return self.set_data_values(request["ref"], request["value"])
        if op == "dir":
            return self.get_directory(request.get("scope", ""))
        return {"ok": False, "err": "BAD_REQUEST", "message": f"unknown op {op!r}"}

    def get_data_values(self, ref: str) -> dict:
        entry = self.buffer.read(ref)
        if entry is None:
            return {"ok": False, "err": "REF_UNKNOWN", "message": f"{ref} is not exposed"}
        return {
            "ok": True,
            "ref": ref,
            "value": value_to_json(entry.value),
            "q": entry.q.to_json(),
            "t": entry.t,
            "sync_seq": entry.sync_seq,
        }

    def set_data_values(self, ref: str, value_obj: dict) -> dict:
        entry = self.buffer.read(ref)
        if entry is None:
            return {"ok": False, "err": "REF_UNKNOWN", "message": f"{ref} is not exposed"}
        if ref not in self.writable:
            return {"ok": False, "err": "REF_READONLY", "message": f"{ref} is read-only"}
        try:
            value = value_from_json(value_obj)
        except ValueError as e:
            return {"ok": False, "err": "BAD_REQUEST", "message": str(e)}
        if not entry.value.same_type(value):
            return {
                "ok": False,
                "err": "TYPE_MISMATCH",
                "message": f"{ref} holds {entry.value.kind}, not {value.kind}",
            }
        route = self.device.control_routes.get(ref)
        if route is None:
            return {"ok": False, "err": "REF_READONLY", "message": f"{ref} has no control route"}
        resource, fb, event, port = route
        device_name = self.device.name

        def inject(system: SystemModel) -> None:
            sched = system.scheduler
            sched.schedule(
                EventDelivery(
                    device_name, resource, fb, event,
                    set_data=((port, value),),
                    trace_payload={"via": "server_write", "ref": ref,
                                   "value": value_to_json(value)},
                ),
                sched.now,
            )

        self.system.inbound.put(inject)
        return {"ok": True, "accepted": True, "ref": ref}

    def get_directory(self, scope: str) -> dict:
        model = self.device.model
        if scope in ("", "device"):
            return {"ok": True, "scope": scope, "names": sorted(model.lds)}
        parts = scope.split("/")
        ld = model.lds.get(parts[0])
        if ld is None:
            return {"ok": False, "err": "REF_UNKNOWN", "message": f"unknown scope {scope!r}"}
        if len(parts) == 1:
            return {"ok": True, "scope": scope, "names": sorted(ld.logical_nodes)}
        if len(parts) == 2:
            ln = ld.logical_nodes.get(parts[1])
            if ln is None:
                return {"ok": False, "err": "REF_UNKNOWN", "message": f"unknown scope {scope!r}"}
            return {"ok": True, "scope": scope, "names": sorted(ln.data_objects)}
        return {"ok": False, "err": "BAD_REQUEST", "message": f"scope too deep: {scope!r}"}


def _read_frame(sock: socket.socket) -> Optional[bytes]:
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > _MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _read_exact(sock, length) if length else b""
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    return body


def _read_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise ProtocolError("connection closed mid-frame")
            return None
        buf += chunk
    return buf


def _write_frame(sock: socket.socket, body: bytes) -> None:
    sock.sendall(struct.pack(">I", len(body)) + body)


class AcsiClient:
    """Minimal third-party-style client for the TCP protocol."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)

    def request(self, payload: dict) -> dict:
        _write_frame(self._sock, json.dumps(payload).encode())
        body = _read_frame(self._sock)
        if body is None:
            raise ConnectionError("server closed the connection")
        return json.loads(body)

    def hello(self) -> dict:
        return self.request({"op": "hello", "version": PROTOCOL_VERSION})

    def get(self, ref: str) -> dict:
        return self.request({"op": "get", "ref": ref})

    def set(self, ref: str, value: DataValue) -> dict:
        return self.request({"op": "set", "ref": ref, "value": value_to_json(value)})

    def dir(self, scope: str = "") -> dict:
        return self.request({"op": "dir", "scope": scope})

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "AcsiClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
