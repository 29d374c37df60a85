"""Deterministic virtual-time execution engine.

All function blocks of a system run single-threaded on one scheduler.
Virtual time is integer nanoseconds; queued deliveries are ordered by
(timestamp, enqueue sequence), so events with equal timestamps fire in
enqueue order and two runs of the same system with the same input script
produce identical traces.  External threads (TCP sessions, the HTTP
gateway, UDP receivers) never touch the system directly: they append to
``SystemModel.inbound`` and the scheduler folds those entries in at batch
boundaries, stamped with the current virtual time.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .blocks import (
    BasicFBType,
    FBInstance,
    ServiceInterfaceFBType,
    UnknownPortError,
    ecc_fire,
)
from .values import DataValue, Nanos, NS_PER_MS


class DispatchError(RuntimeError):
    pass


@dataclass
class TraceRecord:
    t: Nanos
    kind: str  # event | goose_dlv | change | goose_pub | sync | note | snapshot
    device: str
    resource: str
    fb: str
    event: str
    payload: dict | None = None

    def to_json(self) -> dict:
        out = {
            "t": self.t,
            "kind": self.kind,
            "device": self.device,
            "resource": self.resource,
            "fb": self.fb,
            "event": self.event,
        }
        if self.payload is not None:
            out["payload"] = self.payload
        return out


@dataclass
class EventDelivery:
    """One queued event: deliver ``event`` to ``fb`` in ``resource`` of
    ``device``, optionally setting data input ports first."""

    device: str
    resource: str
    fb: str
    event: str
    set_data: tuple[tuple[str, DataValue], ...] = ()
    meta: dict | None = None
    trace_kind: str = "event"
    trace_payload: dict | None = None
    cancelled: bool = False


class Resource:
    """Independently startable FB network inside a device."""

    def __init__(self, name: str, device: "Device"):
        self.name = name
        self.device = device
        self.instances: dict[str, FBInstance] = {}
        # (src_fb, src_event) -> [(dst_fb, dst_event), ...]
        self.event_links: dict[tuple[str, str], list[tuple[str, str]]] = {}
        # (dst_fb, dst_port) -> (src_fb, src_port); single source per input
        self.data_sources: dict[tuple[str, str], tuple[str, str]] = {}
        # composite boundary aliases: "comp.EVT" -> [(inner_fb, event), ...]
        self.event_aliases: dict[str, list[tuple[str, str]]] = {}
        self.running = False

    def add_instance(self, inst: FBInstance) -> FBInstance:
        if inst.name in self.instances:
            raise DispatchError(f"{self.device.name}/{self.name}: duplicate FB {inst.name!r}")
        self.instances[inst.name] = inst
        return inst

    def resolve_event_targets(self, fb: str, event: str) -> list[tuple[str, str]]:
        alias = self.event_aliases.get(f"{fb}.{event}")
        if alias is not None:
            return alias
        return [(fb, event)]


class Device:
    def __init__(self, name: str, address: dict | None = None):
        self.name = name
        self.address = dict(address or {})
        self.resources: dict[str, Resource] = {}
        self.model = None  # ModelStore, attached by scenario wiring
        self.server = None  # AcsiServer, attached by scenario wiring
        # writable object reference -> (resource, fb, input event, data port)
        self.control_routes: dict[str, tuple[str, str, str, str]] = {}

    def add_resource(self, name: str) -> Resource:
        if name in self.resources:
            raise DispatchError(f"{self.name}: duplicate resource {name!r}")
        res = Resource(name, self)
        self.resources[name] = res
        return res


class MessageHub:
    """In-process publish/subscribe channels for SIFB-to-SIFB messaging
    (equipment links and intra-device node chatter; not the GOOSE bus)."""

    def __init__(self, scheduler: "Scheduler", latency_ns: Nanos = 0):
        self._sched = scheduler
        self.latency_ns = latency_ns
        self._subs: dict[str, list[tuple[str, str, str, str, tuple[str, ...]]]] = {}

    def subscribe(
        self,
        channel: str,
        device: str,
        resource: str,
        fb: str,
        event: str,
        ports: Sequence[str] = (),
    ) -> None:
        self._subs.setdefault(channel, []).append((device, resource, fb, event, tuple(ports)))

    def publish(self, channel: str, values: Sequence[DataValue], at: Nanos) -> int:
        count = 0
        for device, resource, fb, event, ports in self._subs.get(channel, ()):
            if len(ports) != len(values):
                raise DispatchError(
                    f"hub {channel}: {len(values)} values for {len(ports)} ports at {fb}"
                )
            self._sched.schedule(
                EventDelivery(device, resource, fb, event, tuple(zip(ports, values))),
                at + self.latency_ns,
            )
            count += 1
        return count


class ServiceContext:
    """Capabilities handed to SIFB handlers while they process one event."""

    def __init__(self, system: "SystemModel", resource: Resource, instance: FBInstance,
                 meta: dict | None):
        self.system = system
        self.scheduler = system.scheduler
        self.device = resource.device
        self.resource = resource
        self.instance = instance
        self.meta = meta or {}

    @property
    def now(self) -> Nanos:
        return self.scheduler.now

    @property
    def model(self):
        return self.device.model

    @property
    def bus(self):
        return self.system.goose_bus

    @property
    def hub(self) -> MessageHub:
        return self.system.hub

    def emit(self, event: str) -> None:
        if event not in self.instance.fbtype.output_event_names():
            raise UnknownPortError(f"{self.instance.name}: no output event {event!r}")
        self.scheduler.propagate_output(self.resource, self.instance, event)

    def publish(self, channel: str, *values: DataValue) -> None:
        self.system.hub.publish(channel, values, self.now)

    def schedule_self(self, event: str, delay_ns: Nanos, meta: dict | None = None) -> EventDelivery:
        d = EventDelivery(
            self.device.name, self.resource.name, self.instance.name, event, meta=meta
        )
        return self.scheduler.schedule(d, self.now + delay_ns)

    def cancel(self, delivery: EventDelivery) -> None:
        delivery.cancelled = True

    def update(self, ref: str, value: DataValue):
        return self.device.model.update_attribute(ref, value, self.now)

    def register_control(self, ref: str, event: str, port: str) -> None:
        self.device.control_routes[ref] = (self.resource.name, self.instance.name, event, port)

    def note(self, label: str, payload: dict | None = None) -> None:
        self.scheduler.add_trace(
            TraceRecord(
                self.now, "note", self.device.name, self.resource.name,
                self.instance.name, label, payload,
            )
        )


class Scheduler:
    def __init__(self, system: "SystemModel"):
        self.system = system
        self.now: Nanos = 0
        self._heap: list[tuple[Nanos, int, EventDelivery]] = []
        self._seq = itertools.count()
        self.trace: list[TraceRecord] = []
        self._trace_listeners: list[Callable[[TraceRecord], None]] = []

    # -- queue

    def schedule(self, delivery: EventDelivery, at: Nanos) -> EventDelivery:
        if at < self.now:
            raise DispatchError(f"cannot schedule into the past ({at} < {self.now})")
        heapq.heappush(self._heap, (at, next(self._seq), delivery))
        return delivery

    def cancel_resource(self, device: str, resource: str) -> int:
        """Mark queued deliveries of one resource cancelled; others untouched."""
        n = 0
        for _, _, d in self._heap:
            if d.device == device and d.resource == resource and not d.cancelled:
                d.cancelled = True
                n += 1
        return n

    # -- trace

    def add_trace(self, rec: TraceRecord) -> None:
        self.trace.append(rec)
        for fn in self._trace_listeners:
            fn(rec)

    def add_trace_listener(self, fn: Callable[[TraceRecord], None]) -> None:
        self._trace_listeners.append(fn)

    # -- execution

    def step(self, until: Nanos) -> list[TraceRecord]:
        """Process every queued delivery with timestamp <= until, in
        (timestamp, enqueue order); returns the records added by this call."""
        if until < self.now:
            raise DispatchError(f"step target {until} precedes current time {self.now}")
        mark = len(self.trace)
        while self._heap and self._heap[0][0] <= until:
            at, _, delivery = heapq.heappop(self._heap)
            if delivery.cancelled:
                continue
            self.now = at
            self._process(delivery)
        self.now = until
        return self.trace[mark:]

    def peek_time(self) -> Optional[Nanos]:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def _process(self, d: EventDelivery) -> None:
        device = self.system.devices.get(d.device)
        resource = device.resources.get(d.resource) if device else None
        if resource is None or not resource.running:
            return  # late delivery to a stopped/unknown resource is dropped
        inst = resource.instances.get(d.fb)
        if inst is None:
            return
        fbtype = inst.fbtype
        if d.event not in fbtype.input_event_names():
            return
        # refresh WITH-associated inputs from data connections, then apply
        # any values carried by the delivery itself (bus/hub payload wins)
        for port in fbtype.event_input(d.event).with_data:
            src = resource.data_sources.get((inst.name, port))
            if src is not None:
                inst.set(port, resource.instances[src[0]].get_value(src[1]))
        for port, value in d.set_data:
            inst.set(port, value)
        self.add_trace(
            TraceRecord(
                self.now, d.trace_kind, d.device, d.resource, d.fb, d.event, d.trace_payload
            )
        )
        if isinstance(fbtype, BasicFBType):
            for out_event in ecc_fire(inst, d.event):
                self.propagate_output(resource, inst, out_event)
        elif isinstance(fbtype, ServiceInterfaceFBType):
            ctx = ServiceContext(self.system, resource, inst, d.meta)
            fbtype.handler(inst, d.event, ctx)

    def propagate_output(self, resource: Resource, inst: FBInstance, event: str) -> None:
        for dst_fb, dst_event in resource.event_links.get((inst.name, event), ()):
            self.schedule(
                EventDelivery(resource.device.name, resource.name, dst_fb, dst_event),
                self.now,
            )


class _InboundQueue:
    """Thread-safe handoff from external contexts into the scheduler."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: list = []

    def put(self, item) -> None:
        with self._lock:
            self._items.append(item)

    def drain(self) -> list:
        with self._lock:
            items, self._items = self._items, []
        return items

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class SystemModel:
    """Devices plus the buses that link them, sharing one scheduler."""

    def __init__(self):
        self.devices: dict[str, Device] = {}
        self.scheduler = Scheduler(self)
        self.hub = MessageHub(self.scheduler)
        self.goose_bus = None  # attached by goose.InProcGooseBus(system)
        self.inbound = _InboundQueue()

    # -- construction

    def add_device(self, name: str, address: dict | None = None) -> Device:
        if name in self.devices:
            raise DispatchError(f"duplicate device name {name!r}")
        dev = Device(name, address)
        self.devices[name] = dev
        return dev

    def resource(self, device: str, resource: str) -> Resource:
        return self.devices[device].resources[resource]

    # -- lifecycle

    def start_all(self, at: Nanos = 0) -> None:
        for dev in self.devices.values():
            for res in dev.resources.values():
                self.start_resource(res, at)

    def start_resource(self, res: Resource, at: Nanos = 0) -> None:
        res.running = True
        for inst in res.instances.values():
            if "INIT" in inst.fbtype.input_event_names():
                self.scheduler.schedule(
                    EventDelivery(res.device.name, res.name, inst.name, "INIT"), at
                )

    def stop_resource(self, res: Resource) -> int:
        res.running = False
        return self.scheduler.cancel_resource(res.device.name, res.name)

    # -- operation

    def dispatch_event(
        self,
        resource: Resource,
        fb_instance: str,
        event: str,
        at: Nanos,
        set_data: Iterable[tuple[str, DataValue]] = (),
    ) -> list[EventDelivery]:
        if not resource.running:
            raise DispatchError(f"{resource.device.name}/{resource.name}: resource not running")
        out = []
        for fb, ev in resource.resolve_event_targets(fb_instance, event):
            inst = resource.instances.get(fb)
            if inst is None:
                raise DispatchError(f"{resource.name}: unknown FB instance {fb_instance!r}")
            if ev not in inst.fbtype.input_event_names():
                raise DispatchError(f"{resource.name}/{fb}: unknown input event {event!r}")
            out.append(
                self.scheduler.schedule(
                    EventDelivery(resource.device.name, resource.name, fb, ev,
                                  set_data=tuple(set_data)),
                    at,
                )
            )
        return out

    def step(self, until_ns: Nanos) -> list[TraceRecord]:
        return self.scheduler.step(until_ns)

    def step_ms(self, until_ms: int) -> list[TraceRecord]:
        return self.scheduler.step(until_ms * NS_PER_MS)

    def drain_inbound(self) -> int:
        """Fold externally queued commands in at the current virtual time."""
        n = 0
        for item in self.inbound.drain():
            item(self)
            n += 1
        return n
