"""Feeder and protection behaviors, checked against hand-executed timelines
and the independent flat state-machine oracle."""

import pytest

from fb61850 import powersim
from fb61850.powersim import (
    REF_AMP,
    REF_BLK,
    REF_OP,
    REF_POS,
    REF_REC_OP,
    REF_STR,
    REF_TR,
    build_scenario,
    feeder_current,
    load_fault_script,
)
from fb61850.values import NS_PER_MS, boolean

from flat_oracle import run_oracle
from helpers import changes_of, implementation_timeline


def run_script(script, horizon_ms):
    scn = build_scenario(script=script)
    system = scn.system
    snap = powersim.feeder_snapshot(system)
    from fb61850.runtime import TraceRecord

    system.scheduler.add_trace(TraceRecord(0, "snapshot", "", "", "", "start", snap))
    system.start_all()
    system.step_ms(horizon_ms)
    return system


@pytest.mark.parametrize(
    "energized, disc, pos, load, fault, amps",
    [
        (True, True, "on", 800.0, 0.0, 800.0),
        (True, True, "on", 100.0, 900.0, 900.0),
        (True, True, "off", 800.0, 900.0, 0.0),
        (True, True, "intermediate", 800.0, 0.0, 0.0),
        (True, False, "on", 800.0, 0.0, 0.0),
        (False, True, "on", 800.0, 0.0, 0.0),
        (True, True, "on", 0.0, 0.0, 0.0),
    ],
)
def test_feeder_current_invariant(energized, disc, pos, load, fault, amps):
    assert feeder_current(energized, disc, pos, load, fault) == amps


def test_load_below_pickup_causes_no_protection_activity():
    system = run_script([{"time_ms": 0, "action": "set_load", "value": 100}], 1000)
    assert changes_of(system.scheduler.trace, REF_STR) == []
    assert changes_of(system.scheduler.trace, REF_TR) == []
    assert powersim.feeder_snapshot(system)["breaker_pos"] == "on"


def test_overcurrent_timeline_hand_executed():
    # load 800 at t=0 lands after the t=0 sample; the 10 ms sample sees it:
    # Str at 10, Op and trip at 60, stroke starts at 60 (contacts part, so
    # current collapses and the 70 ms sample clears Str and Op), open at 100
    system = run_script([{"time_ms": 0, "action": "set_load", "value": 800}], 200)
    trace = system.scheduler.trace
    assert changes_of(trace, REF_STR) == [(10, True), (70, False)]
    assert changes_of(trace, REF_OP) == [(60, True), (70, False)]
    assert changes_of(trace, REF_TR) == [(60, True), (100, False)]
    assert changes_of(trace, REF_POS) == [(60, "intermediate"), (100, "off")]


def test_overcurrent_clearing_before_delay_never_operates():
    script = [
        {"time_ms": 0, "action": "set_load", "value": 800},
        {"time_ms": 30, "action": "set_load", "value": 100},
    ]
    system = run_script(script, 500)
    trace = system.scheduler.trace
    # Str rises at the 10 ms sample and clears at 40 (load drop applied
    # after the 30 ms sample); the 60 ms operate deadline is disarmed
    assert changes_of(trace, REF_STR) == [(10, True), (40, False)]
    assert changes_of(trace, REF_OP) == []
    assert changes_of(trace, REF_TR) == []


def test_ptoc_sample_equal_to_pickup_does_not_start():
    system = run_script([{"time_ms": 0, "action": "set_load", "value": 400}], 300)
    assert changes_of(system.scheduler.trace, REF_STR) == []


def test_amp_measurement_mirrors_feeder():
    system = run_script([{"time_ms": 0, "action": "set_load", "value": 100}], 50)
    assert changes_of(system.scheduler.trace, REF_AMP) == [(10, 100.0)]


def test_disconnector_kills_current_at_next_sample():
    script = [
        {"time_ms": 0, "action": "set_load", "value": 100},
        {"time_ms": 95, "action": "open_disc"},
    ]
    system = run_script(script, 200)
    assert changes_of(system.scheduler.trace, REF_AMP) == [(10, 100.0), (100, 0.0)]
    assert powersim.feeder_snapshot(system)["disconnector"] == "open"


def test_trip_during_close_transit_aborts_to_opening():
    # persistent fault: the second trip (1190 ms) happens 50 ms after the
    # reclose stroke completed; force an earlier one by shortening the
    # operate delay via a custom system document is heavier than needed —
    # drive the breaker mechanics directly instead
    from fb61850.loader import load_system
    from fb61850.values import text

    doc = {
        "devices": [
            {"name": "D", "resources": [{"name": "R", "fbs": [
                {"type": "BRK_MECH", "name": "mech"}]}]}
        ]
    }
    system = load_system(doc)
    system.start_all()
    res = system.resource("D", "R")
    mech = res.instances["mech"]

    def cmd(word, at_ms):
        system.dispatch_event(res, "mech", "CMD", at_ms * NS_PER_MS,
                              set_data=(("CMD_V", text(word)),))

    cmd("open", 0)     # on -> intermediate, off at 40
    cmd("close", 100)  # off -> intermediate, on at 140
    cmd("open", 120)   # aborts the closing stroke: off at 160
    expected = [(0, "intermediate"), (39, "intermediate"), (40, "off"),
                (100, "intermediate"), (139, "intermediate"),  # close aborted at 120
                (159, "intermediate"), (160, "off"), (300, "off")]
    for at_ms, pos in expected:
        system.step_ms(at_ms)
        assert mech.get("POS") == pos, f"at {at_ms} ms"


def test_close_while_on_and_trip_while_off_are_ignored():
    from fb61850.loader import load_system
    from fb61850.values import text

    doc = {
        "devices": [
            {"name": "D", "resources": [{"name": "R", "fbs": [
                {"type": "BRK_MECH", "name": "mech"}]}]}
        ]
    }
    system = load_system(doc)
    system.start_all()
    res = system.resource("D", "R")
    system.dispatch_event(res, "mech", "CMD", 0, set_data=(("CMD_V", text("close")),))
    system.step_ms(50)
    assert res.instances["mech"].get("POS") == "on"  # no stroke started
    system.dispatch_event(res, "mech", "CMD", 60 * NS_PER_MS,
                          set_data=(("CMD_V", text("open")),))
    system.step_ms(200)
    system.dispatch_event(res, "mech", "CMD", 210 * NS_PER_MS,
                          set_data=(("CMD_V", text("open")),))
    system.step_ms(300)
    assert res.instances["mech"].get("POS") == "off"


PERSISTENT = [
    {"time_ms": 0, "action": "set_load", "value": 100},
    {"time_ms": 500, "action": "set_fault", "value": 900},
]
TRANSIENT = PERSISTENT + [{"time_ms": 700, "action": "clear_fault"}]


def test_persistent_fault_locks_out_after_three_shots():
    system = run_script(PERSISTENT, 4000)
    trace = system.scheduler.trace
    recloses = [t for t, v in changes_of(trace, REF_REC_OP) if v is True]
    assert len(recloses) == 3
    trips = [t for t, v in changes_of(trace, REF_TR) if v is True]
    assert len(trips) == 4  # initial trip plus one per failed reclose
    assert changes_of(trace, REF_BLK) == [(2490, True)]
    snap = powersim.feeder_snapshot(system)
    assert snap["breaker_pos"] == "off" and snap["locked_out"] is True
    assert snap["shots"] == 3 and snap["recloser_mode"] == "locked_out"


def test_transient_fault_recloses_and_resets():
    system = run_script(TRANSIENT, 4000)
    trace = system.scheduler.trace
    assert len([t for t, v in changes_of(trace, REF_TR) if v is True]) == 1
    assert len([t for t, v in changes_of(trace, REF_REC_OP) if v is True]) == 1
    assert changes_of(trace, REF_BLK) == []
    snap = powersim.feeder_snapshot(system)
    assert snap["breaker_pos"] == "on" and snap["locked_out"] is False
    assert snap["shots"] == 0 and snap["recloser_mode"] == "idle"
    shot_notes = [
        (r.t // NS_PER_MS, r.payload["count"])
        for r in trace
        if r.kind == "note" and r.event == "shots"
    ]
    # one shot at the reclose, reset to zero when the reclaim window expires
    assert shot_notes == [(1100, 1), (3140, 0)]


def test_blocked_recloser_never_issues_a_reclose():
    scn = build_scenario(script=PERSISTENT)
    system = scn.system
    system.start_all()
    res = system.devices["REC_IED"].resources["RREC1"]
    system.dispatch_event(res, "mfb", "BLK_SET", 0, set_data=(("BLK_V", boolean(True)),))
    system.step_ms(4000)
    trace = system.scheduler.trace
    assert [v for _, v in changes_of(trace, REF_REC_OP)] == []
    # trip still happened, breaker stays open, shots untouched
    assert changes_of(trace, REF_POS)[-1][1] == "off"
    assert system.devices["REC_IED"].resources["RREC1"].instances["mfb"].get("SHOTS") == 0


def test_trip_causality_every_opening_follows_a_trip_message():
    system = run_script(PERSISTENT, 4000)
    trace = system.scheduler.trace
    trip_times = [t for t, v in changes_of(trace, REF_TR) if v is True]
    offs = [t for t, v in changes_of(trace, REF_POS) if v == "off"]
    for off in offs:
        assert any(trip <= off for trip in trip_times)
        assert min(off - trip for trip in trip_times if trip <= off) <= 100


ORACLE_SCRIPTS = [
    PERSISTENT,
    TRANSIENT,
    [{"time_ms": 0, "action": "set_load", "value": 100}],
    [
        {"time_ms": 0, "action": "set_load", "value": 800},
        {"time_ms": 30, "action": "set_load", "value": 100},
    ],
    [
        {"time_ms": 0, "action": "set_load", "value": 100},
        {"time_ms": 200, "action": "set_fault", "value": 401.0},
        {"time_ms": 1500, "action": "clear_fault"},
        {"time_ms": 2500, "action": "set_fault", "value": 2500.0},
    ],
    [
        {"time_ms": 0, "action": "set_load", "value": 500},
        {"time_ms": 333, "action": "open_disc"},
        {"time_ms": 444, "action": "close_disc"},
    ],
    [
        {"time_ms": 0, "action": "set_load", "value": 100},
        {"time_ms": 100, "action": "set_fault", "value": 900},
        {"time_ms": 155, "action": "clear_fault"},
        {"time_ms": 900, "action": "set_fault", "value": 900},
        {"time_ms": 1000, "action": "open_disc"},
    ],
]


@pytest.mark.parametrize("script", ORACLE_SCRIPTS, ids=range(len(ORACLE_SCRIPTS)))
def test_fb_network_matches_flat_oracle_exactly(script):
    horizon = 5000
    system = run_script(script, horizon)
    impl = implementation_timeline(system.scheduler.trace, horizon)
    oracle = run_oracle(script, horizon)
    assert impl == oracle


def test_script_validation():
    with pytest.raises(ValueError, match="unknown action"):
        load_fault_script([{"time_ms": 0, "action": "explode"}])
    with pytest.raises(ValueError, match="non-negative"):
        load_fault_script([{"time_ms": 0, "action": "set_load", "value": -1}])
    with pytest.raises(ValueError, match="non-decreasing"):
        load_fault_script([
            {"time_ms": 5, "action": "set_load", "value": 1},
            {"time_ms": 4, "action": "set_load", "value": 1},
        ])


def test_negative_load_via_hub_is_rejected_by_consumer():
    scn = build_scenario(script=[])
    system = scn.system
    system.start_all()
    with pytest.raises(ValueError):
        powersim.set_load_current(system, -5.0)
