import json
from pathlib import Path

import pytest

from fb61850.blocks import register_fb_type
from fb61850.loader import SYSTEM_SCHEMA, SystemLoadError, load_system
from fb61850.powersim import scenario_system_path

from helpers import make_counter_type, make_sink_type

register_fb_type(make_counter_type(), replace=True)
register_fb_type(make_sink_type(), replace=True)


def test_empty_document_yields_empty_system():
    system = load_system({"devices": []})
    assert system.devices == {}


def test_scenario_document_yields_five_devices():
    system = load_system(scenario_system_path())
    assert list(system.devices) == ["CT_IED", "PROT_IED", "REC_IED", "BRK_IED", "DISPLAY"]


def test_connection_to_missing_port_names_the_path():
    doc = {
        "devices": [
            {
                "name": "D1",
                "resources": [
                    {
                        "name": "R1",
                        "fbs": [
                            {"type": "T_COUNTER", "name": "a"},
                            {"type": "T_SINK", "name": "b"},
                        ],
                        "connections": [{"kind": "event", "src": "a.DONE", "dst": "b.MISSING"}],
                    }
                ],
            }
        ]
    }
    with pytest.raises(SystemLoadError) as exc:
        load_system(doc)
    message = str(exc.value)
    assert "connections[0]" in message and "b.MISSING" in message


def test_unresolved_fb_type_reported_with_path():
    doc = {
        "devices": [
            {"name": "D1", "resources": [{"name": "R1", "fbs": [{"type": "NOPE", "name": "a"}]}]}
        ]
    }
    with pytest.raises(SystemLoadError, match=r"fbs\[0\].*NOPE"):
        load_system(doc)


def test_duplicate_names_rejected():
    dup_fb = {
        "devices": [
            {
                "name": "D1",
                "resources": [
                    {
                        "name": "R1",
                        "fbs": [
                            {"type": "T_COUNTER", "name": "a"},
                            {"type": "T_COUNTER", "name": "a"},
                        ],
                    }
                ],
            }
        ]
    }
    with pytest.raises(SystemLoadError, match="duplicate FB name"):
        load_system(dup_fb)
    dup_dev = {"devices": [
        {"name": "D", "resources": []},
        {"name": "D", "resources": []},
    ]}
    with pytest.raises(SystemLoadError, match="duplicate device"):
        load_system(dup_dev)


def test_schema_violation_reports_json_path():
    with pytest.raises(SystemLoadError, match=r"\$\.devices\[0\]"):
        load_system({"devices": [{"resources": []}]})


def test_data_fan_in_rejected():
    doc = {
        "devices": [
            {
                "name": "D1",
                "resources": [
                    {
                        "name": "R1",
                        "fbs": [
                            {"type": "T_SINK", "name": "s1"},
                            {"type": "T_SINK", "name": "s2"},
                            {"type": "T_SINK", "name": "dst"},
                        ],
                        "connections": [
                            {"kind": "data", "src": "s1.RXB", "dst": "dst.RXB"},
                        ],
                    }
                ],
            }
        ]
    }
    # RXB is an input port, not an output: direction error
    with pytest.raises(SystemLoadError, match="not an output data port"):
        load_system(doc)


def test_parameters_set_initial_values():
    doc = {
        "devices": [
            {
                "name": "D1",
                "resources": [
                    {"name": "R1", "fbs": [{"type": "T_COUNTER", "name": "c",
                                            "parameters": {"CNT": 10}}]}
                ],
            }
        ]
    }
    system = load_system(doc)
    assert system.resource("D1", "R1").instances["c"].get("CNT") == 10


def test_unknown_parameter_on_basic_fb_rejected():
    doc = {
        "devices": [
            {
                "name": "D1",
                "resources": [
                    {"name": "R1", "fbs": [{"type": "T_COUNTER", "name": "c",
                                            "parameters": {"nope": 1}}]}
                ],
            }
        ]
    }
    with pytest.raises(SystemLoadError, match="unknown parameter"):
        load_system(doc)


def test_schema_in_docs_matches_loader():
    docs_schema = json.loads(
        (Path(__file__).parent.parent / "docs" / "system_schema.json").read_text()
    )
    assert docs_schema == SYSTEM_SCHEMA
