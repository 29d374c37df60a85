"""Control-block numbering, the retransmission walk, and the wire codec.

A state change publishes st_num+1 / sq_num=0 and restarts the schedule;
each retransmission bumps sq_num and doubles as a heartbeat, with
time-allowed-to-live twice the upcoming interval.
"""

from fb61850 import DataSetDef, GooseControlBlock, GoosePublisher, LogicalDevice, ModelStore, build_ln
from fb61850.goose_codec import decode, encode
from fb61850.values import NS_PER_MS, enum

model = ModelStore()
ld = LogicalDevice("BRKLD0")
ld.add_ln(build_ln("XCBR", 1))
model.add_ld(ld)

gcb = GooseControlBlock("gcbPos", 0x1003, "PosDS", retrans_schedule_ms=(4, 8, 16, 1000))
pub = GoosePublisher(gcb, DataSetDef("PosDS", ("BRKLD0/XCBR1.Pos.stVal",)), model)

print("change at t=0:")
msg = pub.publish_change(at=0)
print(f"  st={msg.st_num} sq={msg.sq_num} ttl={msg.time_allowed_to_live_ms} ms "
      f"data={[v.value for v in msg.all_data]}")

print("retransmission walk (schedule 4, 8, 16, then steady 1000 ms):")
t = 0
for _ in range(6):
    t = pub.next_tx_time
    copy = pub.retransmit_tick(at=t)
    print(f"  t={t // NS_PER_MS:>5} ms st={copy.st_num} sq={copy.sq_num} "
          f"ttl={copy.time_allowed_to_live_ms} ms")

print("\na new change resets the walk:")
model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "on"), at=t)
msg = pub.publish_change(at=t)
print(f"  st={msg.st_num} sq={msg.sq_num} data={[v.value for v in msg.all_data]}")

raw = encode(msg)
print(f"\non the wire: {len(raw)} bytes, magic {raw[:4]!r}")
print(" ", raw.hex(" "))
assert decode(raw) == msg
print("  decode(encode(msg)) == msg")
