"""Gateway endpoints driven through the ASGI test client while the
simulation is stepped manually on the test thread."""

import json

import pytest
from fastapi.testclient import TestClient

from fb61850.gateway import GatewayState, build_app
from fb61850.harness import RunConfig, SimulationRun


@pytest.fixture
def gw():
    sim = SimulationRun(RunConfig(horizon_ms=60_000))
    state = GatewayState(sim)
    state.running = True
    sim.start()
    sim.step_to(0)
    state.refresh_snapshot()
    client = TestClient(build_app(state))
    yield sim, state, client


def _advance(sim, state, t_ms):
    sim.step_to(t_ms)
    state.refresh_snapshot()


def test_state_defaults_on_fresh_run(gw):
    sim, state, client = gw
    body = client.get("/state").json()
    assert body["breaker_pos"] == "on"
    assert body["load_a"] == 0.0
    assert body["disconnector"] == "closed"
    assert body["locked_out"] is False
    assert body["lns"]["BRKLD0/XCBR1.Pos.stVal"]["value"] == "on"


def test_load_command_round_trips_into_state(gw):
    sim, state, client = gw
    reply = client.post("/load", json={"amps": 800})
    assert reply.status_code == 200
    _advance(sim, state, 200)
    body = client.get("/state").json()
    assert body["load_a"] == 800.0
    assert body["breaker_pos"] == "off"  # super-pickup load tripped it


def test_disconnector_command(gw):
    sim, state, client = gw
    assert client.post("/disconnector", json={"position": "open"}).status_code == 200
    _advance(sim, state, 50)
    body = client.get("/state").json()
    assert body["disconnector"] == "open"
    assert body["amp"] == 0.0


def test_fault_inject_and_clear(gw):
    sim, state, client = gw
    assert client.post("/fault", json={"amps": 900}).status_code == 200
    _advance(sim, state, 30)
    assert client.get("/state").json()["fault_a"] == 900.0
    assert client.post("/fault", json={"clear": True}).status_code == 200
    _advance(sim, state, 60)
    assert client.get("/state").json()["fault_a"] == 0.0


@pytest.mark.parametrize(
    "path, body",
    [
        ("/load", {"amps": -5}),
        ("/load", {"amps": "many"}),
        ("/load", {}),
        ("/disconnector", {"position": "sideways"}),
        ("/fault", {}),
        ("/fault", {"amps": -1}),
    ],
)
def test_malformed_bodies_get_400(gw, path, body):
    _, _, client = gw
    assert client.post(path, json=body).status_code == 400


def test_not_running_gets_503(gw):
    sim, state, client = gw
    state.running = False
    assert client.get("/state").status_code == 503
    assert client.post("/load", json={"amps": 1}).status_code == 503


def test_websocket_streams_trace_records_in_order(gw):
    sim, state, client = gw
    with client.websocket_connect("/events") as ws:
        client.post("/load", json={"amps": 800})
        _advance(sim, state, 100)
        frames = [json.loads(ws.receive_text()) for _ in range(20)]
    seqs = [f["seq"] for f in frames]
    assert seqs == sorted(seqs)
    assert all(s2 - s1 == 1 for s1, s2 in zip(seqs, seqs[1:]))
    kinds = {f["record"]["kind"] for f in frames}
    assert kinds & {"event", "change", "goose_pub", "goose_dlv"}
