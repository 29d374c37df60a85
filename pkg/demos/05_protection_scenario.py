"""The full protection story: overcurrent trip, three reclose attempts,
lockout.  A scripted fault (900 A against a 400 A pickup) appears at
500 ms and never clears; watch the chain CT -> PTOC -> PTRC -> XCBR ->
RREC play out on the bus.
"""

from fb61850 import powersim
from fb61850.harness import RunConfig, run
from fb61850.powersim import REF_BLK, REF_OP, REF_POS, REF_REC_OP, REF_STR, REF_TR

script = [
    {"time_ms": 0, "action": "set_load", "value": 100},
    {"time_ms": 500, "action": "set_fault", "value": 900},
]

import json
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    script_file = Path(tmp) / "fault.json"
    script_file.write_text(json.dumps(script))
    trace_file = Path(tmp) / "trace.jsonl"
    summary, _ = run(RunConfig(script_path=script_file, horizon_ms=5000, trace_path=trace_file))

    names = {
        REF_STR: "PTOC Str", REF_OP: "PTOC Op", REF_TR: "PTRC Tr",
        REF_POS: "XCBR Pos", REF_REC_OP: "RREC Op", REF_BLK: "RREC BlkRec",
    }
    print("attribute changes (ms, node data, new value):")
    for line in trace_file.read_text().splitlines():
        rec = json.loads(line)
        if rec["kind"] == "change":
            ref = rec["payload"]["ref"]
            if ref in names:
                print(f"  {rec['t'] // 1_000_000:>5}  {names[ref]:<11} -> "
                      f"{rec['payload']['new']['value']!r}")
        elif rec["kind"] == "note" and rec["event"] == "shots":
            print(f"  {rec['t'] // 1_000_000:>5}  shot counter = "
                  f"{rec['payload']['count']} ({rec['payload']['mode']})")

    print("\nsummary:", json.dumps(summary.to_json(), indent=2))
