"""Server buffer synchronization and the TCP read/write protocol."""

import pytest

from fb61850.lnmodel import LogicalDevice, ModelStore, build_ln
from fb61850.powersim import REF_BLK, build_scenario
from fb61850.server import AcsiClient, ServerBuffer
from fb61850.values import boolean, enum, float64

from helpers import changes_of


def _model() -> ModelStore:
    model = ModelStore()
    ld = LogicalDevice("RECLD0")
    ld.add_ln(build_ln("RREC", 1))
    model.add_ld(ld)
    return model


def test_sync_cycle_applies_one_change():
    model = _model()
    buf = ServerBuffer(model)
    model.update_attribute("RECLD0/RREC1.Op.general", boolean(True), at=7)
    applied = buf.sync_cycle(model.drain_pending())
    assert applied == 1
    entry = buf.read("RECLD0/RREC1.Op.general")
    assert entry.value == boolean(True) and entry.t == 7 and entry.sync_seq == 1


def test_empty_batch_is_a_noop():
    buf = ServerBuffer(_model())
    before = buf.snapshot()
    assert buf.sync_cycle([]) == 0
    after = buf.snapshot()
    assert {k: (e.value, e.t, e.sync_seq) for k, e in before.items()} == {
        k: (e.value, e.t, e.sync_seq) for k, e in after.items()
    }


def test_replayed_batch_reaches_the_same_buffer():
    model = _model()
    buf = ServerBuffer(model)
    model.update_attribute("RECLD0/RREC1.Op.general", boolean(True), at=1)
    model.update_attribute("RECLD0/RREC1.BlkRec.stVal", boolean(True), at=2)
    model.update_attribute("RECLD0/RREC1.Op.general", boolean(False), at=3)
    batch = model.drain_pending()
    buf.sync_cycle(batch)
    first = {k: (e.value, e.q, e.t, e.sync_seq) for k, e in buf.snapshot().items()}
    buf.sync_cycle(batch)
    second = {k: (e.value, e.q, e.t, e.sync_seq) for k, e in buf.snapshot().items()}
    assert first == second


def test_records_for_undeclared_references_are_skipped():
    model = _model()
    buf = ServerBuffer(model, declared=["RECLD0/RREC1.BlkRec.stVal"])
    model.update_attribute("RECLD0/RREC1.Op.general", boolean(True), at=1)
    assert buf.sync_cycle(model.drain_pending()) == 0
    assert buf.skipped_records == 1


# -- full TCP protocol against the scenario ---------------------------------


@pytest.fixture
def scenario():
    scn = build_scenario(script=[], start_servers=True, ephemeral_ports=True)
    scn.system.start_all()
    scn.system.step_ms(0)
    yield scn
    for server in scn.servers.values():
        server.stop()


def test_get_over_tcp_returns_defaults(scenario):
    port = scenario.servers["BRK_IED"].port
    with AcsiClient("127.0.0.1", port) as client:
        hello = client.hello()
        assert hello["ok"] and hello["device"] == "BRK_IED"
        reply = client.get("BRKLD0/XCBR1.Pos.stVal")
    assert reply["ok"] is True
    assert reply["value"] == {"type": "enum", "value": "on", "tag": "dpc"}
    assert reply["q"] == {"validity": "good", "source": "process"}


def test_unknown_ref_keeps_session_open(scenario):
    port = scenario.servers["BRK_IED"].port
    with AcsiClient("127.0.0.1", port) as client:
        bad = client.get("BRKLD0/XCBR9.Pos.stVal")
        assert bad == {"ok": False, "err": "REF_UNKNOWN",
                       "message": "BRKLD0/XCBR9.Pos.stVal is not exposed"}
        good = client.get("BRKLD0/XCBR1.Pos.stVal")
        assert good["ok"] is True


def test_directory_listing_is_sorted(scenario):
    port = scenario.servers["BRK_IED"].port
    with AcsiClient("127.0.0.1", port) as client:
        assert client.dir("")["names"] == ["BRKLD0"]
        assert client.dir("BRKLD0")["names"] == ["LLN0", "XCBR1"]
        assert client.dir("BRKLD0/XCBR1")["names"] == ["Pos"]
        assert client.dir("NOPE")["err"] == "REF_UNKNOWN"


def test_write_path_reaches_the_recloser(scenario):
    system = scenario.system
    port = scenario.servers["REC_IED"].port
    with AcsiClient("127.0.0.1", port) as client:
        ack = client.set(REF_BLK, boolean(True))
        assert ack == {"ok": True, "accepted": True, "ref": REF_BLK}
    # accepted but not yet applied: it lands at the next batch boundary
    assert system.devices["REC_IED"].model.resolve(REF_BLK)[0].value is False
    system.drain_inbound()
    system.step_ms(20)
    assert system.devices["REC_IED"].model.resolve(REF_BLK)[0].value is True
    writes = changes_of(system.scheduler.trace, REF_BLK)
    assert writes == [(0, True)]
    rrec = system.devices["REC_IED"].resources["RREC1"].instances["mfb"]
    assert rrec.get("MODE") == "locked_out"


def test_write_errors(scenario):
    rec_port = scenario.servers["REC_IED"].port
    ct_port = scenario.servers["CT_IED"].port
    with AcsiClient("127.0.0.1", ct_port) as client:
        reply = client.set("CTLD0/TCTR1.Amp.mag", float64(5.0))
        assert reply["err"] == "REF_READONLY"
    with AcsiClient("127.0.0.1", rec_port) as client:
        reply = client.set(REF_BLK, enum("dpc", "on"))
        assert reply["err"] == "TYPE_MISMATCH"
        reply = client.set("RECLD0/RREC1.Nope.stVal", boolean(True))
        assert reply["err"] == "REF_UNKNOWN"
        reply = client.request({"op": "curse"})
        assert reply["err"] == "BAD_REQUEST"


def test_sessions_are_independent(scenario):
    port = scenario.servers["BRK_IED"].port
    c1 = AcsiClient("127.0.0.1", port)
    c2 = AcsiClient("127.0.0.1", port)
    try:
        assert c1.get("BRKLD0/XCBR1.Pos.stVal")["ok"]
        c1.close()
        assert c2.get("BRKLD0/XCBR1.Pos.stVal")["ok"]
    finally:
        c2.close()


def test_buffer_tracks_model_through_a_run(scenario):
    system = scenario.system
    from fb61850 import powersim
    powersim.set_load_current(system, 800.0)
    system.step_ms(200)
    port = scenario.servers["BRK_IED"].port
    with AcsiClient("127.0.0.1", port) as client:
        reply = client.get("BRKLD0/XCBR1.Pos.stVal")
    # trip at 60 ms, open at 100 ms, last sync before 200 ms caught it
    assert reply["value"]["value"] == "off"
    assert reply["t"] == 100 * 1_000_000
