"""Shared test scaffolding: small FB types and trace post-processing."""

from __future__ import annotations

from fb61850.blocks import (
    Action,
    BasicFBType,
    DataPortDef,
    ECState,
    ECTransition,
    EventPort,
    ExecutionControlChart,
    ServiceInterfaceFBType,
)
from fb61850.powersim import REF_BLK, REF_POS
from fb61850.values import NS_PER_MS, boolean, int32


def make_counter_type(name: str = "T_COUNTER") -> BasicFBType:
    """START -EVT-> RUN; RUN -EVT-> RUN; entering RUN increments CNT and emits DONE."""
    return BasicFBType(
        name,
        event_inputs=[EventPort("EVT"), EventPort("NOP")],
        event_outputs=[EventPort("DONE")],
        internal_vars={"CNT": int32(0)},
        ecc=ExecutionControlChart(
            states=(ECState("START"), ECState("RUN", (Action("inc", "DONE"),))),
            initial="START",
            transitions=(
                ECTransition("START", "EVT", None, "RUN"),
                ECTransition("RUN", "EVT", None, "RUN"),
            ),
        ),
        algorithms={"inc": lambda fb: fb.set("CNT", fb.get("CNT") + 1)},
    )


def make_sink_type(name: str = "T_SINK") -> ServiceInterfaceFBType:
    """Records every (virtual ms, event) it receives in instance state."""

    def handler(inst, event, ctx) -> None:
        inst.state.setdefault("log", []).append((ctx.now // NS_PER_MS, event))
        if "RXB" in [p.name for p in inst.fbtype.data_inputs]:
            inst.state.setdefault("values", []).append(inst.get("RXB"))

    return ServiceInterfaceFBType(
        name,
        event_inputs=[EventPort("IN", ("RXB",)), EventPort("IN2")],
        data_inputs=[DataPortDef("RXB", boolean(False))],
        handler=handler,
    )


def implementation_timeline(trace, horizon_ms: int) -> list[tuple[str, int, bool]]:
    """(breaker position, shots, locked) per millisecond, folded from a trace."""
    recs = [r.to_json() if hasattr(r, "to_json") else r for r in trace]
    pos, shots, locked = "on", 0, False
    out: list[tuple[str, int, bool]] = []
    idx = 0
    for t in range(horizon_ms + 1):
        limit = t * NS_PER_MS
        while idx < len(recs) and recs[idx]["t"] <= limit:
            rec = recs[idx]
            idx += 1
            payload = rec.get("payload") or {}
            kind = rec["kind"]
            if kind == "snapshot":
                pos = payload.get("breaker_pos", pos)
                shots = payload.get("shots", shots)
                locked = bool(payload.get("locked_out", locked))
            elif kind == "change":
                ref = payload.get("ref")
                if ref == REF_POS:
                    pos = payload["new"]["value"]
                elif ref == REF_BLK:
                    locked = bool(payload["new"]["value"])
            elif kind == "note" and rec.get("event") == "shots":
                shots = payload["count"]
        out.append((pos, shots, locked))
    return out


def changes_of(trace, ref: str) -> list[tuple[int, object]]:
    """(ms, new value) for every change record of one reference."""
    out = []
    for rec in trace:
        obj = rec.to_json() if hasattr(rec, "to_json") else rec
        if obj["kind"] == "change" and (obj.get("payload") or {}).get("ref") == ref:
            out.append((obj["t"] // NS_PER_MS, obj["payload"]["new"]["value"]))
    return out
