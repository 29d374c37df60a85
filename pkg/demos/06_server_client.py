"""Third-party style client: poll a device's TCP server while the
scenario runs, then block the recloser through the one writable control.

The server answers from a buffer the sync block refreshes every 10 ms of
virtual time, so a polled value is the control logic's state as of the
last sync — reads never touch the live model.
"""

from fb61850 import AcsiClient, powersim
from fb61850.powersim import REF_BLK, REF_POS, build_scenario
from fb61850.values import boolean

script = [
    {"time_ms": 0, "action": "set_load", "value": 100},
    {"time_ms": 500, "action": "set_fault", "value": 900},
]
scn = build_scenario(script=script, start_servers=True, ephemeral_ports=True)
system = scn.system
system.start_all()
system.step_ms(0)

brk_port = scn.servers["BRK_IED"].port
rec_port = scn.servers["REC_IED"].port
print(f"BRK_IED server on 127.0.0.1:{brk_port}, REC_IED on :{rec_port}")

with AcsiClient("127.0.0.1", brk_port) as brk, AcsiClient("127.0.0.1", rec_port) as rec:
    print("directory of BRK_IED:", brk.dir("")["names"], "->", brk.dir("BRKLD0")["names"])

    last = None
    for t_ms in range(0, 1500, 10):
        system.step_ms(t_ms)
        value = brk.get(REF_POS)["value"]["value"]
        if value != last:
            print(f"  poll at {t_ms:>4} ms: breaker {value}")
            last = value

    print("\nwrite the one writable control (block the recloser):")
    ack = rec.set(REF_BLK, boolean(True))
    print("  ack:", ack, "(accepted, applied at the next batch)")
    system.drain_inbound()
    system.step_ms(4000)
    print("  BlkRec now:", rec.get(REF_BLK)["value"]["value"])

snap = powersim.feeder_snapshot(system)
print(f"\nend state: breaker {snap['breaker_pos']}, shots {snap['shots']}, "
      f"mode {snap['recloser_mode']}")
for server in scn.servers.values():
    server.stop()
