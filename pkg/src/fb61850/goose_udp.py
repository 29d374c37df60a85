"""Best-effort UDP multicast transport for bus messages.

Datagrams are the wire codec's byte strings.  Inbound datagrams are
decoded on the receiver thread and queued to the scheduler, which stamps
them with its current virtual time at the next batch boundary; delivery
timing therefore depends on the host network and this transport carries
no determinism guarantee (the in-process bus does).
"""

from __future__ import annotations

import socket
import struct
import threading

from .goose_codec import CodecError, decode, encode
from .runtime import SystemModel

DEFAULT_GROUP = "239.192.61.0"
DEFAULT_PORT = 32850


class UdpGooseTransport:
    def __init__(self, system: SystemModel, group: str = DEFAULT_GROUP,
                 port: int = DEFAULT_PORT, loopback: bool = True):
        self.system = system
        self.group = group
        self.port = port
        self.loopback = loopback
        self._rx: socket.socket | None = None
        self._tx: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.decode_errors = 0
        self.received = 0

    def start(self) -> None:
        rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        rx.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        rx.bind(("", self.port))
        mreq = struct.pack("4s4s", socket.inet_aton(self.group), socket.inet_aton("0.0.0.0"))
        rx.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        rx.settimeout(0.2)
        tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 1)
        tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1 if self.loopback else 0)
        self._rx, self._tx = rx, tx
        self._stop.clear()
        self._thread = threading.Thread(target=self._recv_loop, name="goose-udp", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        for sock in (self._rx, self._tx):
            if sock is not None:
                sock.close()
        self._rx = self._tx = None

    def send(self, msg) -> None:
        if self._tx is None:
            raise RuntimeError("transport not started")
        self._tx.sendto(encode(msg), (self.group, self.port))

    def _recv_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, _ = self._rx.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                msg = decode(data)
            except CodecError:
                self.decode_errors += 1
                continue
            self.received += 1

            def inject(system: SystemModel, msg=msg) -> None:
                if system.goose_bus is not None:
                    system.goose_bus.deliver_remote(msg, system.scheduler.now)

            self.system.inbound.put(inject)
