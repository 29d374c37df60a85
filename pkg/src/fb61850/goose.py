"""Event distribution bus: control blocks, state/sequence numbering,
retransmission schedules and subscriber delivery.

A control block owns a dataset of object references.  On a state change
the publisher snapshots the dataset from the local model and sends a
message with an incremented state number and sequence number zero, then
walks its retransmission schedule, re-sending copies with bumped sequence
numbers at growing intervals until the steady-state interval is reached
(or a new change restarts the walk).  Subscribers are matched on
(app_id, go_id); each subscriber sees a given (app_id, st_num, sq_num) at
most once even if the transport duplicates or reorders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .goose_codec import GooseMessage
from .lnmodel import ModelStore
from .runtime import EventDelivery, SystemModel, TraceRecord
from .values import DataValue, Nanos, NS_PER_MS

DEFAULT_RETRANS_MS = (4, 8, 16, 32, 64, 128, 256, 512, 1000)


class GooseError(ValueError):
    pass


@dataclass(frozen=True)
class DataSetDef:
    name: str
    members: tuple[str, ...]  # object references, LD/LN.DO.attr

    def __post_init__(self) -> None:
        if not self.members:
            raise GooseError(f"dataset {self.name!r} is empty")


@dataclass(frozen=True)
class GooseControlBlock:
    go_id: str
    app_id: int
    dataset: str
    conf_rev: int = 1
    retrans_schedule_ms: tuple[int, ...] = DEFAULT_RETRANS_MS

    def __post_init__(self) -> None:
        if not self.retrans_schedule_ms:
            raise GooseError(f"{self.go_id}: empty retransmission schedule")
        if any(b < a for a, b in zip(self.retrans_schedule_ms, self.retrans_schedule_ms[1:])):
            raise GooseError(f"{self.go_id}: retransmission schedule must be non-decreasing")
        if not 0 <= self.app_id <= 0xFFFF:
            raise GooseError(f"{self.go_id}: app_id out of range")


class GoosePublisher:
    """Per-control-block counters and schedule walk.

    st_num starts at 0; nothing is sent before the first change.  The walk
    consumes schedule intervals one by one and clamps at the last (steady
    state) interval; time_allowed_to_live is twice the upcoming interval.
    """

    def __init__(self, gcb: GooseControlBlock, dataset: DataSetDef, model: ModelStore):
        self.gcb = gcb
        self.dataset = dataset
        self.model = model
        self.st_num = 0
        self.sq_num = 0
        self.change_t: Nanos = 0
        self.epoch = 0  # bumped on every state change; stale retransmit ticks no-op
        self._next_tx: Optional[Nanos] = None
        self._sched_idx = 0

    def _snapshot(self) -> tuple[DataValue, ...]:
        return tuple(self.model.resolve(ref)[0] for ref in self.dataset.members)

    def _interval_ms(self, idx: int) -> int:
        sched = self.gcb.retrans_schedule_ms
        return sched[min(idx, len(sched) - 1)]

    def _build(self, at: Nanos) -> GooseMessage:
        ttl_ms = 2 * self._interval_ms(self._sched_idx)
        return GooseMessage(
            app_id=self.gcb.app_id,
            go_id=self.gcb.go_id,
            st_num=self.st_num,
            sq_num=self.sq_num,
            time_allowed_to_live_ms=ttl_ms,
            t=self.change_t,
            all_data=self._snapshot(),
        )

    def publish_change(self, at: Nanos) -> GooseMessage:
        """State change: bump st_num, reset sq_num, restart the schedule."""
        self.st_num += 1
        self.sq_num = 0
        self.change_t = at
        self.epoch += 1
        self._sched_idx = 0
        self._next_tx = at + self._interval_ms(0) * NS_PER_MS
        return self._build(at)

    @property
    def next_tx_time(self) -> Optional[Nanos]:
        return self._next_tx if self.st_num > 0 else None

    def retransmit_tick(self, at: Nanos) -> Optional[GooseMessage]:
        """Emit a retransmission copy if the current interval has elapsed."""
        if self.st_num == 0 or self._next_tx is None or at < self._next_tx:
            return None
        self.sq_num += 1
        self._sched_idx += 1
        self._next_tx = at + self._interval_ms(self._sched_idx) * NS_PER_MS
        return self._build(at)


@dataclass
class Subscription:
    app_id: int
    go_id: Optional[str]  # None matches any go_id under the app_id
    device: str
    resource: str
    fb: str
    event: str
    ports: tuple[str, ...]
    last_seen: tuple[int, int] | None = None  # (st_num, sq_num) high-water mark

    def matches(self, msg: GooseMessage) -> bool:
        if msg.app_id != self.app_id:
            return False
        return self.go_id is None or msg.go_id == self.go_id


class InProcGooseBus:
    """Deterministic in-process transport: deliveries are scheduler events
    at publication time plus a configurable latency (default 0)."""

    def __init__(self, system: SystemModel, latency_ns: Nanos = 0):
        self.system = system
        self.latency_ns = latency_ns
        self.publishers: dict[int, GoosePublisher] = {}  # app_id -> publisher
        self.subscriptions: list[Subscription] = []
        self.published = 0
        system.goose_bus = self

    # -- publisher side

    def register_publisher(self, pub: GoosePublisher) -> GoosePublisher:
        if pub.gcb.app_id in self.publishers:
            raise GooseError(f"app_id {pub.gcb.app_id:#06x} already taken on this bus")
        self.publishers[pub.gcb.app_id] = pub
        return pub

    def send(self, msg: GooseMessage, at: Nanos, origin: str = "") -> None:
        self.published += 1
        sched = self.system.scheduler
        sched.add_trace(
            TraceRecord(
                at, "goose_pub", origin, "", "", msg.go_id,
                {
                    "app_id": msg.app_id,
                    "st_num": msg.st_num,
                    "sq_num": msg.sq_num,
                    "ttl_ms": msg.time_allowed_to_live_ms,
                    "change_t": msg.t,
                },
            )
        )
        for sub in self.subscriptions:
            if sub.matches(msg):
                self._deliver(sub, msg, at + self.latency_ns)

    def deliver_remote(self, msg: GooseMessage, at: Nanos) -> None:
        """Entry point for messages arriving from an external transport."""
        for sub in self.subscriptions:
            if sub.matches(msg):
                self._deliver(sub, msg, at)

    def _deliver(self, sub: Subscription, msg: GooseMessage, at: Nanos) -> None:
        key = (msg.st_num, msg.sq_num)
        if sub.last_seen is not None and key <= sub.last_seen:
            return  # duplicate or stale under the high-water mark
        sub.last_seen = key
        self.system.scheduler.schedule(
            EventDelivery(
                sub.device, sub.resource, sub.fb, sub.event,
                set_data=tuple(zip(sub.ports, msg.all_data)),
                trace_kind="goose_dlv",
                trace_payload={"app_id": msg.app_id, "st_num": msg.st_num, "sq_num": msg.sq_num},
            ),
            at,
        )

    # -- subscriber side

    def subscribe(
        self,
        app_id: int,
        device: str,
        resource: str,
        fb: str,
        event: str,
        ports: Sequence[str],
        go_id: str | None = None,
    ) -> Subscription:
        """Register a delivery target; arity and value types are checked
        against the publishing control block when it is locally known."""
        pub = self.publishers.get(app_id)
        if pub is not None:
            members = pub.dataset.members
            if len(members) != len(ports):
                raise GooseError(
                    f"subscription to {app_id:#06x}: {len(ports)} target ports "
                    f"for a {len(members)}-member dataset"
                )
            inst = self.system.devices[device].resources[resource].instances[fb]
            for port, ref in zip(ports, members):
                have = inst.get_value(port)
                want = pub.model.resolve(ref)[0]
                if not have.same_type(want):
                    raise GooseError(
                        f"subscription to {app_id:#06x}: port {port!r} is "
                        f"{have.kind}/{have.enum_type}, member {ref} is {want.kind}/{want.enum_type}"
                    )
        sub = Subscription(app_id, go_id, device, resource, fb, event, tuple(ports))
        self.subscriptions.append(sub)
        return sub
