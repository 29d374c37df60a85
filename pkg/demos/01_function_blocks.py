"""Basic function blocks and the virtual-time scheduler.

A basic block is an event/data interface plus an execution control chart:
transitions are evaluated in declaration order, the first match whose
guard holds is taken, and the target state's actions run (algorithm, then
an optional output event).  Here we build a saturating counter, wire two
instances in a chain inside one resource, and drive them with events.
"""

from fb61850 import (
    Action,
    BasicFBType,
    ECState,
    ECTransition,
    EventPort,
    ExecutionControlChart,
    FBInstance,
    ecc_fire,
    load_system,
    register_fb_type,
)
from fb61850.values import NS_PER_MS, int32

counter = BasicFBType(
    "DEMO_COUNTER",
    event_inputs=[EventPort("EVT")],
    event_outputs=[EventPort("DONE")],
    internal_vars={"CNT": int32(0)},
    ecc=ExecutionControlChart(
        states=(ECState("START"), ECState("RUN", (Action("inc", "DONE"),))),
        initial="START",
        transitions=(
            ECTransition("START", "EVT", None, "RUN"),
            ECTransition("RUN", "EVT", "CNT < 3", "RUN"),  # saturates at 3
        ),
    ),
    algorithms={"inc": lambda fb: fb.set("CNT", fb.get("CNT") + 1)},
)
register_fb_type(counter, replace=True)

# fire one instance directly
fb = FBInstance("demo", counter)
for i in range(5):
    out = ecc_fire(fb, "EVT")
    print(f"firing {i + 1}: state={fb.ec_state} CNT={fb.get('CNT')} emitted={out}")

# the same type inside a scheduled system: two counters chained DONE -> EVT
system = load_system(
    {
        "devices": [
            {
                "name": "DEMO",
                "resources": [
                    {
                        "name": "MAIN",
                        "fbs": [
                            {"type": "DEMO_COUNTER", "name": "first"},
                            {"type": "DEMO_COUNTER", "name": "second"},
                        ],
                        "connections": [
                            {"kind": "event", "src": "first.DONE", "dst": "second.EVT"}
                        ],
                    }
                ],
            }
        ]
    }
)
system.start_all()
res = system.resource("DEMO", "MAIN")
for ms in (1, 2, 5):
    system.dispatch_event(res, "first", "EVT", at=ms * NS_PER_MS)

trace = system.step_ms(10)
print("\nscheduler trace (time ms, fb, event):")
for rec in trace:
    print(f"  {rec.t // NS_PER_MS:>3} {rec.fb:<8} {rec.event}")
print("second counter reached:", res.instances["second"].get("CNT"))
