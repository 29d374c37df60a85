"""Simulated feeder and the protection chain that trips it.

Equipment side (device ``DISPLAY``): a bus-bar source, a manual
disconnector, a circuit breaker with mechanical open/close delays, a
current transformer sampling the feeder every 10 ms of virtual time, and
a consumer whose load (and scripted fault overlay) set the current.  The
feeder current is ``max(load, fault)`` while the disconnector is closed
and the breaker on, else zero.  Each element is a composite or service
block wired over data connections and in-process pub/sub channels.

Protection side (four IED devices): TCTR mirrors the measured current
into its node data and publishes changes on the bus; PTOC raises Str when
a sample exceeds pickup and, if the excess holds for the operate delay,
raises Op; PTRC conditions Op into a trip message; XCBR drives the
breaker and republishes its position; RREC recloses after a dead time,
up to three shots, then locks out and sets BlkRec.  The block-reclose
flag is the one server-writable control.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .blocks import (
    CompositeFBType,
    Connection,
    DataPortDef,
    EventPort,
    ServiceInterfaceFBType,
    register_fb_type,
)
from .goose import GoosePublisher, InProcGooseBus
from .loader import load_system
from .runtime import EventDelivery, SystemModel, TraceRecord
from .scl import InstantiatedIed, instantiate_from_scl, parse_scl
from .server import AcsiServer
from .values import NS_PER_MS, boolean, enum, float64, int32, text

# scenario defaults
PICKUP_A = 400.0
OPERATE_DELAY_MS = 50
OPEN_MS = 40
CLOSE_MS = 40
DEAD_TIME_MS = 500
RECLAIM_TIME_MS = 2000
MAX_SHOTS = 3
CT_PERIOD_MS = 10
SYNC_PERIOD_MS = 10

# pub/sub channels
CH_LOAD = "proc.load"
CH_DISC_CMD = "proc.disc.cmd"
CH_BRK_CMD = "proc.brk.cmd"
CH_BRK_POS = "proc.brk.pos"
CH_AMP = "proc.amp"
CH_OP = "prot.op"

# object references
REF_AMP = "CTLD0/TCTR1.Amp.mag"
REF_STR = "PROTLD0/PTOC1.Str.general"
REF_OP = "PROTLD0/PTOC1.Op.general"
REF_TR = "PROTLD0/PTRC1.Tr.general"
REF_POS = "BRKLD0/XCBR1.Pos.stVal"
REF_REC_OP = "RECLD0/RREC1.Op.general"
REF_BLK = "RECLD0/RREC1.BlkRec.stVal"

APP_AMP = 0x1001
APP_TRIP = 0x1002
APP_POS = 0x1003
APP_REC = 0x1004

_FIXTURES = Path(__file__).parent / "fixtures"

SCRIPT_ACTIONS = ("set_load", "set_fault", "clear_fault", "open_disc", "close_disc")


# ---------------------------------------------------------------------------
# equipment blocks


def _ms(inst, key: str, default: int) -> int:
    return int(inst.config.get(key, default)) * NS_PER_MS


def _source_noop(inst, event, ctx) -> None:
    pass


EQ_SOURCE = ServiceInterfaceFBType(
    "EQ_SOURCE",
    data_outputs=[DataPortDef("ENERGIZED", boolean(True))],
    handler=_source_noop,
    service_contract="bus bar: upstream supply, always energized",
)


def _disc_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.hub.subscribe(inst.config.get("cmd_channel", CH_DISC_CMD),
                          ctx.device.name, ctx.resource.name, inst.name, "CMD", ("CMD_V",))
        return
    if event == "CMD":
        closed = inst.get("CMD_V") == "closed"
        if closed != inst.get("CLOSED"):
            inst.set("CLOSED", closed)
            ctx.emit("CHANGED")


EQ_DISC = ServiceInterfaceFBType(
    "EQ_DISC",
    event_inputs=[EventPort("INIT"), EventPort("CMD", ("CMD_V",))],
    event_outputs=[EventPort("CHANGED", ("CLOSED",))],
    data_inputs=[DataPortDef("CMD_V", text("closed"))],
    data_outputs=[DataPortDef("CLOSED", boolean(True))],
    handler=_disc_handler,
    service_contract="manual disconnector: instant, never tripped by protection",
)


def _brk_mech_handler(inst, event, ctx) -> None:
    st = inst.state
    if event == "INIT":
        st.setdefault("epoch", 0)
        return
    if event == "CMD":
        cmd = inst.get("CMD_V")
        pos = inst.get("POS")
        target = "off" if cmd == "open" else "on"
        if pos == target:
            return
        if pos == "intermediate":
            # a trip aborts a closing stroke; an opening stroke is never aborted
            if target == "off" and st.get("target") == "on":
                st["target"] = "off"
                st["epoch"] += 1
                ctx.schedule_self("DONE", _ms(inst, "open_ms", OPEN_MS),
                                  meta={"epoch": st["epoch"]})
            return
        st["target"] = target
        st["epoch"] += 1
        delay = _ms(inst, "open_ms", OPEN_MS) if target == "off" else _ms(inst, "close_ms", CLOSE_MS)
        inst.set("POS", "intermediate")
        ctx.emit("POSCH")
        ctx.schedule_self("DONE", delay, meta={"epoch": st["epoch"]})
        return
    if event == "DONE":
        if ctx.meta.get("epoch") != st.get("epoch"):
            return  # aborted stroke
        inst.set("POS", st["target"])
        ctx.emit("POSCH")


BRK_MECH = ServiceInterfaceFBType(
    "BRK_MECH",
    event_inputs=[EventPort("INIT"), EventPort("CMD", ("CMD_V",)), EventPort("DONE")],
    event_outputs=[EventPort("POSCH", ("POS",))],
    data_inputs=[DataPortDef("CMD_V", text("close"))],
    data_outputs=[DataPortDef("POS", text("on"))],
    handler=_brk_mech_handler,
    service_contract="breaker mechanics: open/close strokes with transit delays",
)


def _sub_text_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.hub.subscribe(inst.config["channel"],
                          ctx.device.name, ctx.resource.name, inst.name, "RX", ("V0",))
        return
    if event == "RX":
        inst.set("V0O", inst.get("V0"))
        ctx.emit("IND")


SUB_TEXT = ServiceInterfaceFBType(
    "SUB_TEXT",
    event_inputs=[EventPort("INIT"), EventPort("RX", ("V0",))],
    event_outputs=[EventPort("IND", ("V0O",))],
    data_inputs=[DataPortDef("V0", text(""))],
    data_outputs=[DataPortDef("V0O", text(""))],
    handler=_sub_text_handler,
    service_contract="channel subscriber, one text value",
)


def _pub_text_handler(inst, event, ctx) -> None:
    if event == "REQ":
        ctx.publish(inst.config["channel"], inst.get_value("V0"))


PUB_TEXT = ServiceInterfaceFBType(
    "PUB_TEXT",
    event_inputs=[EventPort("REQ", ("V0",))],
    data_inputs=[DataPortDef("V0", text(""))],
    handler=_pub_text_handler,
    service_contract="channel publisher, one text value",
)


EQ_BREAKER = CompositeFBType(
    "EQ_BREAKER",
    event_outputs=[EventPort("POSCH")],
    data_outputs=[DataPortDef("POS", text("on"))],
    fbs={"sub": "SUB_TEXT", "mech": "BRK_MECH", "pub": "PUB_TEXT"},
    connections=[
        Connection("event", "sub.IND", "mech.CMD"),
        Connection("data", "sub.V0O", "mech.CMD_V"),
        Connection("event", "mech.POSCH", "pub.REQ"),
        Connection("data", "mech.POS", "pub.V0"),
        Connection("event", "mech.POSCH", "POSCH"),
        Connection("data", "mech.POS", "POS"),
    ],
    parameters={"sub": {"channel": CH_BRK_CMD}, "pub": {"channel": CH_BRK_POS}},
)


def _ct_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.schedule_self("TICK", 0)
        return
    if event == "TICK":
        amps = feeder_current(
            inst.get("ENERGIZED"), inst.get("DISC_CLOSED"), inst.get("BRK_POS"),
            inst.get("LOAD_A"), inst.get("FAULT_A"),
        )
        ctx.publish(inst.config.get("channel", CH_AMP), float64(amps))
        ctx.schedule_self("TICK", _ms(inst, "period_ms", CT_PERIOD_MS))


def feeder_current(energized: bool, disc_closed: bool, brk_pos: str,
                   load_a: float, fault_a: float) -> float:
    """Current through the feeder: the larger of load and fault overlay
    while the path is closed end to end, else zero."""
    if energized and disc_closed and brk_pos == "on":
        return max(load_a, fault_a)
    return 0.0


EQ_CT = ServiceInterfaceFBType(
    "EQ_CT",
    event_inputs=[
        EventPort("INIT"),
        EventPort("TICK", ("ENERGIZED", "DISC_CLOSED", "BRK_POS", "LOAD_A", "FAULT_A")),
    ],
    data_inputs=[
        DataPortDef("ENERGIZED", boolean(True)),
        DataPortDef("DISC_CLOSED", boolean(True)),
        DataPortDef("BRK_POS", text("on")),
        DataPortDef("LOAD_A", float64(0.0)),
        DataPortDef("FAULT_A", float64(0.0)),
    ],
    handler=_ct_handler,
    service_contract="current transformer: periodic feeder samples onto a channel",
)


def _load_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.hub.subscribe(inst.config.get("channel", CH_LOAD),
                          ctx.device.name, ctx.resource.name, inst.name, "SET",
                          ("ACTION", "AMPS"))
        return
    if event == "SET":
        action = inst.get("ACTION")
        amps = inst.get("AMPS")
        if action in ("set_load", "set_fault") and amps < 0:
            ctx.note("rejected_negative", {"action": action, "amps": amps})
            return
        if action == "set_load":
            inst.set("LOAD_A", amps)
        elif action == "set_fault":
            inst.set("FAULT_A", amps)
        elif action == "clear_fault":
            inst.set("FAULT_A", 0.0)


EQ_LOAD = ServiceInterfaceFBType(
    "EQ_LOAD",
    event_inputs=[EventPort("INIT"), EventPort("SET", ("ACTION", "AMPS"))],
    data_inputs=[DataPortDef("ACTION", text("")), DataPortDef("AMPS", float64(0.0))],
    data_outputs=[DataPortDef("LOAD_A", float64(0.0)), DataPortDef("FAULT_A", float64(0.0))],
    handler=_load_handler,
    service_contract="consumer: load setpoint and scripted fault overlay",
)


def _script_handler(inst, event, ctx) -> None:
    if event == "INIT":
        for i, entry in enumerate(inst.config.get("entries", ())):
            ctx.schedule_self("STEP", entry["time_ms"] * NS_PER_MS, meta={"idx": i})
        return
    if event == "STEP":
        entry = inst.config["entries"][ctx.meta["idx"]]
        action = entry["action"]
        value = float(entry.get("value", 0.0))
        if action in ("set_load", "set_fault", "clear_fault"):
            ctx.publish(CH_LOAD, text(action), float64(value))
        elif action == "open_disc":
            ctx.publish(CH_DISC_CMD, text("open"))
        elif action == "close_disc":
            ctx.publish(CH_DISC_CMD, text("closed"))


SCRIPT_PLAYER = ServiceInterfaceFBType(
    "SCRIPT_PLAYER",
    event_inputs=[EventPort("INIT"), EventPort("STEP")],
    handler=_script_handler,
    service_contract="replays a timed action script onto the equipment channels",
)


# ---------------------------------------------------------------------------
# protection node main blocks


def _tctr_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.hub.subscribe(inst.config.get("channel", CH_AMP),
                          ctx.device.name, ctx.resource.name, inst.name, "SAMPLE", ("AMP_V",))
        return
    if event == "SAMPLE":
        ctx.update(inst.config.get("amp_ref", REF_AMP), float64(inst.get("AMP_V")))


MFB_TCTR = ServiceInterfaceFBType(
    "MFB_TCTR",
    event_inputs=[EventPort("INIT"), EventPort("SAMPLE", ("AMP_V",))],
    data_inputs=[DataPortDef("AMP_V", float64(0.0))],
    handler=_tctr_handler,
    service_contract="current transformer node: mirrors samples into Amp.mag",
)


def _ptoc_handler(inst, event, ctx) -> None:
    st = inst.state
    if event == "INIT":
        st["epoch"] = 0
        st["str"] = bool(ctx.model.resolve(inst.config.get("str_ref", REF_STR))[0].value)
        st["op"] = bool(ctx.model.resolve(inst.config.get("op_ref", REF_OP))[0].value)
        ctx.bus.subscribe(int(inst.config.get("amp_app_id", APP_AMP)),
                          ctx.device.name, ctx.resource.name, inst.name, "AMP", ("AMP_V",))
        return
    if event == "AMP":
        pickup = float(inst.config.get("pickup", PICKUP_A))
        over = inst.get("AMP_V") > pickup
        if over == st["str"]:
            return
        st["str"] = over
        ctx.update(inst.config.get("str_ref", REF_STR), boolean(over))
        st["epoch"] += 1
        if over:
            ctx.schedule_self("OP_DUE", _ms(inst, "delay_ms", OPERATE_DELAY_MS),
                              meta={"epoch": st["epoch"]})
        elif st["op"]:
            st["op"] = False
            ctx.update(inst.config.get("op_ref", REF_OP), boolean(False))
        return
    if event == "OP_DUE":
        if ctx.meta.get("epoch") != st["epoch"] or not st["str"] or st["op"]:
            return
        st["op"] = True
        ctx.update(inst.config.get("op_ref", REF_OP), boolean(True))
        ctx.publish(inst.config.get("op_channel", CH_OP), boolean(True))


MFB_PTOC = ServiceInterfaceFBType(
    "MFB_PTOC",
    event_inputs=[EventPort("INIT"), EventPort("AMP", ("AMP_V",)), EventPort("OP_DUE")],
    data_inputs=[DataPortDef("AMP_V", float64(0.0))],
    handler=_ptoc_handler,
    service_contract="definite-time overcurrent: Str on pickup excess, Op after the delay",
)


def _ptrc_handler(inst, event, ctx) -> None:
    st = inst.state
    if event == "INIT":
        st["tr"] = bool(ctx.model.resolve(inst.config.get("tr_ref", REF_TR))[0].value)
        ctx.hub.subscribe(inst.config.get("op_channel", CH_OP),
                          ctx.device.name, ctx.resource.name, inst.name, "OP_IND", ("OP_V",))
        ctx.bus.subscribe(int(inst.config.get("pos_app_id", APP_POS)),
                          ctx.device.name, ctx.resource.name, inst.name, "POS", ("POS_V",))
        return
    if event == "OP_IND":
        if inst.get("OP_V") and not st["tr"]:
            st["tr"] = True
            ctx.update(inst.config.get("tr_ref", REF_TR), boolean(True))
        return
    if event == "POS":
        if inst.get("POS_V") == "off" and st["tr"]:
            st["tr"] = False
            ctx.update(inst.config.get("tr_ref", REF_TR), boolean(False))


MFB_PTRC = ServiceInterfaceFBType(
    "MFB_PTRC",
    event_inputs=[EventPort("INIT"), EventPort("OP_IND", ("OP_V",)), EventPort("POS", ("POS_V",))],
    data_inputs=[DataPortDef("OP_V", boolean(False)), DataPortDef("POS_V", enum("dpc", "off"))],
    handler=_ptrc_handler,
    service_contract="trip conditioning: Op in, trip message out, reset when the breaker opens",
)


def _xcbr_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.bus.subscribe(int(inst.config.get("trip_app_id", APP_TRIP)),
                          ctx.device.name, ctx.resource.name, inst.name, "TRIP", ("TRIP_V",))
        ctx.bus.subscribe(int(inst.config.get("rec_app_id", APP_REC)),
                          ctx.device.name, ctx.resource.name, inst.name, "RECLOSE", ("REC_V",))
        ctx.hub.subscribe(inst.config.get("pos_channel", CH_BRK_POS),
                          ctx.device.name, ctx.resource.name, inst.name, "POS_IND", ("POS_T",))
        return
    if event == "TRIP":
        if inst.get("TRIP_V"):
            ctx.publish(inst.config.get("cmd_channel", CH_BRK_CMD), text("open"))
        return
    if event == "RECLOSE":
        if inst.get("REC_V"):
            ctx.publish(inst.config.get("cmd_channel", CH_BRK_CMD), text("close"))
        return
    if event == "POS_IND":
        ctx.update(inst.config.get("pos_ref", REF_POS), enum("dpc", inst.get("POS_T")))


MFB_XCBR = ServiceInterfaceFBType(
    "MFB_XCBR",
    event_inputs=[
        EventPort("INIT"),
        EventPort("TRIP", ("TRIP_V",)),
        EventPort("RECLOSE", ("REC_V",)),
        EventPort("POS_IND", ("POS_T",)),
    ],
    data_inputs=[
        DataPortDef("TRIP_V", boolean(False)),
        DataPortDef("REC_V", boolean(False)),
        DataPortDef("POS_T", text("on")),
    ],
    handler=_xcbr_handler,
    service_contract="breaker node: trip/reclose commands to the drive, position into Pos.stVal",
)


def _rrec_note_shots(inst, ctx) -> None:
    ctx.note("shots", {"count": inst.get("SHOTS"), "mode": inst.get("MODE")})


def _rrec_handler(inst, event, ctx) -> None:
    st = inst.state
    op_ref = inst.config.get("op_ref", REF_REC_OP)
    blk_ref = inst.config.get("blk_ref", REF_BLK)
    max_shots = int(inst.config.get("max_shots", MAX_SHOTS))
    if event == "INIT":
        st["epoch"] = 0
        st["op"] = bool(ctx.model.resolve(op_ref)[0].value)
        st["blocked"] = bool(ctx.model.resolve(blk_ref)[0].value)
        if st["blocked"]:
            inst.set("MODE", "locked_out")
        ctx.bus.subscribe(int(inst.config.get("pos_app_id", APP_POS)),
                          ctx.device.name, ctx.resource.name, inst.name, "POS", ("POS_V",))
        ctx.register_control(blk_ref, "BLK_SET", "BLK_V")
        return
    if event == "POS":
        if st["blocked"]:
            return
        pos = inst.get("POS_V")
        mode = inst.get("MODE")
        if pos == "off":
            if mode == "reclaiming" and inst.get("SHOTS") >= max_shots:
                inst.set("MODE", "locked_out")
                st["blocked"] = True
                st["epoch"] += 1
                ctx.update(blk_ref, boolean(True))
                _rrec_note_shots(inst, ctx)
            elif mode in ("idle", "reclaiming"):
                inst.set("MODE", "waiting_dead_time")
                st["epoch"] += 1
                ctx.schedule_self("DEAD_DUE", _ms(inst, "dead_ms", DEAD_TIME_MS),
                                  meta={"epoch": st["epoch"]})
        elif pos == "on":
            if st["op"]:
                st["op"] = False
                ctx.update(op_ref, boolean(False))
            if mode == "waiting_dead_time":
                inst.set("MODE", "reclaiming")
                st["epoch"] += 1
                ctx.schedule_self("RECLAIM_DUE", _ms(inst, "reclaim_ms", RECLAIM_TIME_MS),
                                  meta={"epoch": st["epoch"]})
        return
    if event == "DEAD_DUE":
        if ctx.meta.get("epoch") != st["epoch"] or inst.get("MODE") != "waiting_dead_time":
            return
        inst.set("SHOTS", inst.get("SHOTS") + 1)
        _rrec_note_shots(inst, ctx)
        st["op"] = True
        ctx.update(op_ref, boolean(True))
        return
    if event == "RECLAIM_DUE":
        if ctx.meta.get("epoch") != st["epoch"] or inst.get("MODE") != "reclaiming":
            return
        inst.set("SHOTS", 0)
        inst.set("MODE", "idle")
        _rrec_note_shots(inst, ctx)
        return
    if event == "BLK_SET":
        blocked = bool(inst.get("BLK_V"))
        ctx.update(blk_ref, boolean(blocked))
        st["blocked"] = blocked
        st["epoch"] += 1
        if blocked:
            inst.set("MODE", "locked_out")
        else:
            inst.set("MODE", "idle")
            inst.set("SHOTS", 0)
        _rrec_note_shots(inst, ctx)


MFB_RREC = ServiceInterfaceFBType(
    "MFB_RREC",
    event_inputs=[
        EventPort("INIT"),
        EventPort("POS", ("POS_V",)),
        EventPort("DEAD_DUE"),
        EventPort("RECLAIM_DUE"),
        EventPort("BLK_SET", ("BLK_V",)),
    ],
    data_inputs=[DataPortDef("POS_V", enum("dpc", "off")), DataPortDef("BLK_V", boolean(False))],
    internal_vars={"SHOTS": int32(0), "MODE": text("idle")},
    handler=_rrec_handler,
    service_contract="auto-recloser: dead time, reclaim window, three shots then lockout",
)


def _gcb_handler(inst, event, ctx) -> None:
    st = inst.state
    if event == "INIT":
        if st.get("bound"):
            return
        gcb, dataset = ctx.device.goose_configs[inst.config["gcb"]]
        pub = ctx.bus.publishers[gcb.app_id]
        st["bound"] = True
        st["pub"] = pub
        ctx.device.model.add_listener(
            _make_gcb_listener(pub, ctx.bus, ctx.scheduler,
                               ctx.device.name, ctx.resource.name, inst.name,
                               set(dataset.members))
        )
        return
    if event == "RTX":
        pub = st["pub"]
        if ctx.meta.get("epoch") != pub.epoch:
            return
        msg = pub.retransmit_tick(ctx.now)
        if msg is not None:
            ctx.bus.send(msg, ctx.now, origin=ctx.device.name)
        if pub.next_tx_time is not None:
            ctx.schedule_self("RTX", pub.next_tx_time - ctx.now, meta={"epoch": pub.epoch})


def _make_gcb_listener(pub, bus, sched, device, resource, fb, members):
    def on_change(rec) -> None:
        if rec.ref not in members:
            return
        msg = pub.publish_change(sched.now)
        bus.send(msg, sched.now, origin=device)
        sched.schedule(
            EventDelivery(device, resource, fb, "RTX", meta={"epoch": pub.epoch}),
            pub.next_tx_time,
        )

    return on_change


GOOSE_GCB = ServiceInterfaceFBType(
    "GOOSE_GCB",
    event_inputs=[EventPort("INIT"), EventPort("RTX")],
    handler=_gcb_handler,
    service_contract="control block: publish dataset changes, walk the retransmission schedule",
)


def _sync_handler(inst, event, ctx) -> None:
    if event == "INIT":
        ctx.schedule_self("TICK", 0)
        return
    if event == "TICK":
        server = ctx.device.server
        if server is not None and ctx.device.model is not None:
            records = ctx.device.model.drain_pending()
            applied = server.buffer.sync_cycle(records)
            ctx.note("sync", {"applied": applied})
        ctx.schedule_self("TICK", _ms(inst, "period_ms", SYNC_PERIOD_MS))


SRV_SYNC = ServiceInterfaceFBType(
    "SRV_SYNC",
    event_inputs=[EventPort("INIT"), EventPort("TICK")],
    handler=_sync_handler,
    service_contract="server resource: folds change records into the server buffer",
)

for _t in (EQ_SOURCE, EQ_DISC, BRK_MECH, SUB_TEXT, PUB_TEXT, EQ_BREAKER, EQ_CT, EQ_LOAD,
           SCRIPT_PLAYER, MFB_TCTR, MFB_PTOC, MFB_PTRC, MFB_XCBR, MFB_RREC, GOOSE_GCB, SRV_SYNC):
    register_fb_type(_t, replace=True)


# ---------------------------------------------------------------------------
# scenario assembly


@dataclass
class Scenario:
    system: SystemModel
    bus: InProcGooseBus
    instantiated: dict[str, InstantiatedIed]
    servers: dict[str, AcsiServer]


def _make_change_tracer(system: SystemModel, device_name: str):
    def on_change(rec) -> None:
        system.scheduler.add_trace(
            TraceRecord(rec.t, "change", device_name, "", "", "update", rec.to_json())
        )

    return on_change


def scenario_system_path() -> Path:
    return _FIXTURES / "scenario_system.json"


def scenario_scl_path() -> Path:
    return _FIXTURES / "scenario.scl.xml"


def script_path(name: str) -> Path:
    return _FIXTURES / "scripts" / f"{name}.json"


def load_fault_script(source) -> list[dict]:
    """Validate a fault script: a JSON list of {time_ms, action, value} rows."""
    if isinstance(source, (str, Path)):
        entries = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        entries = source
    if not isinstance(entries, list):
        raise ValueError("fault script must be a JSON list")
    out = []
    last = 0
    for i, raw in enumerate(entries):
        where = f"script[{i}]"
        if not isinstance(raw, dict) or "time_ms" not in raw or "action" not in raw:
            raise ValueError(f"{where}: rows need time_ms and action")
        action = raw["action"]
        if action not in SCRIPT_ACTIONS:
            raise ValueError(f"{where}: unknown action {action!r}")
        time_ms = int(raw["time_ms"])
        if time_ms < 0 or time_ms < last:
            raise ValueError(f"{where}: times must be non-negative and non-decreasing")
        last = time_ms
        value = float(raw.get("value", 0.0))
        if action in ("set_load", "set_fault") and value < 0:
            raise ValueError(f"{where}: {action} needs a non-negative value")
        out.append({"time_ms": time_ms, "action": action, "value": value})
    return out


def build_scenario(
    system_doc=None,
    scl_text: str | None = None,
    script: Sequence[dict] | None = None,
    start_servers: bool = False,
    ephemeral_ports: bool = False,
    writable: Sequence[str] = (REF_BLK,),
) -> Scenario:
    """Load fixtures, wire models, bus publishers and servers; ready to start.

    Ports come from each device's ``acsi_port`` address field unless
    ``ephemeral_ports`` asks the OS to pick (tests do, to avoid collisions).
    """
    if system_doc is None:
        system_doc = scenario_system_path()
    if scl_text is None:
        scl_text = scenario_scl_path().read_text(encoding="utf-8")
    system = load_system(system_doc)
    bus = InProcGooseBus(system)
    instantiated = instantiate_from_scl(parse_scl(scl_text))
    servers: dict[str, AcsiServer] = {}
    for ied_name, inst in instantiated.items():
        device = system.devices.get(ied_name)
        if device is None:
            continue
        device.model = inst.model
        device.model.add_listener(_make_change_tracer(system, ied_name))
        device.goose_configs = {
            name: (gcb, inst.datasets[gcb.dataset]) for name, gcb in inst.gcbs.items()
        }
        for gcb in inst.gcbs.values():
            bus.register_publisher(GoosePublisher(gcb, inst.datasets[gcb.dataset], inst.model))
        port = 0 if ephemeral_ports else device.address.get("acsi_port", 0)
        server = AcsiServer(
            system, device, port=port,
            writable=[w for w in writable if w.split("/")[0] in inst.model.lds],
        )
        servers[ied_name] = server
        if start_servers:
            server.start()
    if script is not None:
        player = system.devices["DISPLAY"].resources["SCRIPT"].instances["player"]
        player.config["entries"] = load_fault_script(script)
    return Scenario(system, bus, instantiated, servers)


def queue_command(system: SystemModel, action: str, value: float = 0.0) -> None:
    """Thread-safe operator command; folded in at the next batch boundary."""
    if action in ("set_load", "set_fault") and value < 0:
        raise ValueError(f"{action}: amperes must be non-negative")
    if action not in SCRIPT_ACTIONS:
        raise ValueError(f"unknown command {action!r}")

    def inject(system: SystemModel) -> None:
        now = system.scheduler.now
        if action in ("set_load", "set_fault", "clear_fault"):
            system.hub.publish(CH_LOAD, (text(action), float64(value)), now)
        elif action == "open_disc":
            system.hub.publish(CH_DISC_CMD, (text("open"),), now)
        else:
            system.hub.publish(CH_DISC_CMD, (text("closed"),), now)

    system.inbound.put(inject)


def set_load_current(system: SystemModel, amps: float, at=None) -> None:
    """Set the consumer load (scheduler-thread entry point)."""
    if amps < 0:
        raise ValueError("amperes must be non-negative")
    system.hub.publish(CH_LOAD, (text("set_load"), float64(amps)),
                       system.scheduler.now if at is None else at)


def feeder_snapshot(system: SystemModel) -> dict:
    """Operator-facing view of the feeder and the protection chain."""
    process = system.devices["DISPLAY"].resources["PROCESS"]
    disc_closed = process.instances["disc"].get("CLOSED")
    brk_pos = process.instances["brk.mech"].get("POS")
    load_a = process.instances["load"].get("LOAD_A")
    fault_a = process.instances["load"].get("FAULT_A")
    energized = process.instances["src"].get("ENERGIZED")
    rrec = system.devices["REC_IED"].resources["RREC1"].instances["mfb"]
    lns = {}
    for ied in ("CT_IED", "PROT_IED", "REC_IED", "BRK_IED"):
        model = system.devices[ied].model
        if model is None:
            continue
        for ref in model.walk_references():
            value, q, t = model.resolve(ref)
            lns[ref.render()] = {"value": value.value, "t": t}
    return {
        "time_ns": system.scheduler.now,
        "disconnector": "closed" if disc_closed else "open",
        "breaker_pos": brk_pos,
        "load_a": load_a,
        "fault_a": fault_a,
        "amp": feeder_current(energized, disc_closed, brk_pos, load_a, fault_a),
        "shots": rrec.get("SHOTS"),
        "recloser_mode": rrec.get("MODE"),
        "locked_out": bool(system.devices["REC_IED"].model.resolve(REF_BLK)[0].value),
        "lns": lns,
    }
