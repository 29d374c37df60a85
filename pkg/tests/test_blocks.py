"""Execution control chart semantics, checked against hand-executed charts."""

import pytest

from fb61850.blocks import (
    Action,
    BasicFBType,
    BlockDefinitionError,
    DataPortDef,
    ECState,
    ECTransition,
    EccLivelockError,
    EventPort,
    ExecutionControlChart,
    FBInstance,
    UnknownPortError,
    compile_guard,
    ecc_fire,
)
from fb61850.values import boolean, int32

from helpers import make_counter_type


def test_counter_fires_and_moves_state():
    fb = FBInstance("c", make_counter_type())
    out = ecc_fire(fb, "EVT")
    assert out == ["DONE"]
    assert fb.get("CNT") == 1
    assert fb.ec_state == "RUN"


def test_event_with_no_matching_transition_is_inert():
    fb = FBInstance("c", make_counter_type())
    out = ecc_fire(fb, "NOP")
    assert out == []
    assert fb.ec_state == "START"
    assert fb.get("CNT") == 0


def test_unknown_event_rejected():
    fb = FBInstance("c", make_counter_type())
    with pytest.raises(UnknownPortError):
        ecc_fire(fb, "BOGUS")


def _chain_type():
    """S0 -EVT-> S1 -e-> S2 -e-> S3 -e-> S4, each entry increments and emits.

    Hand execution: firing EVT traverses all four transitions in one call,
    emitting E1..E4 in traversal order with CNT ending at 4 in state S4.
    """
    states = tuple(
        ECState(f"S{i}", (Action("inc", f"E{i}"),)) if i else ECState("S0")
        for i in range(5)
    )
    transitions = (
        ECTransition("S0", "EVT", None, "S1"),
        ECTransition("S1", None, "CNT < 10", "S2"),
        ECTransition("S2", None, "CNT < 10", "S3"),
        ECTransition("S3", None, "CNT < 10", "S4"),
    )
    return BasicFBType(
        "T_CHAIN",
        event_inputs=[EventPort("EVT")],
        event_outputs=[EventPort(f"E{i}") for i in range(1, 5)],
        internal_vars={"CNT": int32(0)},
        ecc=ExecutionControlChart(states, "S0", transitions),
        algorithms={"inc": lambda fb: fb.set("CNT", fb.get("CNT") + 1)},
    )


def test_eventless_chain_traverses_in_one_firing():
    fb = FBInstance("x", _chain_type())
    out = ecc_fire(fb, "EVT")
    assert out == ["E1", "E2", "E3", "E4"]
    assert fb.get("CNT") == 4
    assert fb.ec_state == "S4"


def test_trigger_consumed_after_first_transition():
    # second transition requires EVT again; one firing must not reuse it
    t = BasicFBType(
        "T_CONSUME",
        event_inputs=[EventPort("EVT")],
        ecc=ExecutionControlChart(
            (ECState("A"), ECState("B"), ECState("C")),
            "A",
            (ECTransition("A", "EVT", None, "B"), ECTransition("B", "EVT", None, "C")),
        ),
    )
    fb = FBInstance("x", t)
    ecc_fire(fb, "EVT")
    assert fb.ec_state == "B"
    ecc_fire(fb, "EVT")
    assert fb.ec_state == "C"


def test_declaration_order_first_match_wins():
    t = BasicFBType(
        "T_ORDER",
        event_inputs=[EventPort("EVT")],
        internal_vars={"FLAG": boolean(True)},
        ecc=ExecutionControlChart(
            (ECState("A"), ECState("B"), ECState("C")),
            "A",
            (
                ECTransition("A", "EVT", "FLAG", "B"),
                ECTransition("A", "EVT", None, "C"),
            ),
        ),
    )
    fb = FBInstance("x", t)
    ecc_fire(fb, "EVT")
    assert fb.ec_state == "B"


def test_guard_false_blocks_transition():
    t = BasicFBType(
        "T_GUARDED",
        event_inputs=[EventPort("EVT")],
        internal_vars={"N": int32(0)},
        ecc=ExecutionControlChart(
            (ECState("A"), ECState("B")),
            "A",
            (ECTransition("A", "EVT", "N > 0", "B"),),
        ),
    )
    fb = FBInstance("x", t)
    ecc_fire(fb, "EVT")
    assert fb.ec_state == "A"
    fb.set("N", 1)
    ecc_fire(fb, "EVT")
    assert fb.ec_state == "B"


def test_livelock_guard_aborts_with_diagnostic():
    t = BasicFBType(
        "T_LIVELOCK",
        event_inputs=[EventPort("EVT")],
        ecc=ExecutionControlChart(
            (ECState("A"), ECState("B")),
            "A",
            (
                ECTransition("A", "EVT", None, "B"),
                ECTransition("B", None, None, "A"),
                ECTransition("A", None, None, "B"),
            ),
        ),
    )
    fb = FBInstance("x", t)
    with pytest.raises(EccLivelockError, match="1000"):
        ecc_fire(fb, "EVT")


@pytest.mark.parametrize(
    "expr",
    ["__import__('os')", "open('x')", "NOSUCH > 1", "a.b", "x[0]", "(lambda: 1)()"],
)
def test_guards_reject_disallowed_constructs(expr):
    with pytest.raises(BlockDefinitionError):
        compile_guard(expr, ["N"])


def test_guard_allows_boolean_arithmetic():
    code = compile_guard("N + 1 > 2 and not (N == 5)", ["N"])
    assert eval(code, {"__builtins__": {}}, {"N": 2}) is True


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(event_inputs=[EventPort("E"), EventPort("E")]), "duplicate"),
        (dict(event_inputs=[EventPort("E", ("D",))]), "WITH"),
        (
            dict(
                event_inputs=[EventPort("E")],
                data_inputs=[DataPortDef("E2", boolean(False))],
                internal_vars={"E2": boolean(False)},
            ),
            "duplicate",
        ),
    ],
)
def test_interface_validation(kwargs, match):
    with pytest.raises(BlockDefinitionError, match=match):
        BasicFBType(
            "T_BAD",
            ecc=ExecutionControlChart((ECState("A"),), "A", ()),
            **kwargs,
        )


def test_ecc_validation_errors():
    with pytest.raises(BlockDefinitionError, match="initial"):
        BasicFBType("T_B1", ecc=ExecutionControlChart((ECState("A"),), "Z", ()))
    with pytest.raises(BlockDefinitionError, match="unknown state"):
        BasicFBType(
            "T_B2",
            event_inputs=[EventPort("E")],
            ecc=ExecutionControlChart((ECState("A"),), "A", (ECTransition("A", "E", None, "Z"),)),
        )
    with pytest.raises(BlockDefinitionError, match="unregistered algorithm"):
        BasicFBType(
            "T_B3",
            ecc=ExecutionControlChart((ECState("A", (Action("nope"),)),), "A", ()),
        )
    with pytest.raises(BlockDefinitionError, match="not an input event"):
        BasicFBType(
            "T_B4",
            ecc=ExecutionControlChart(
                (ECState("A"), ECState("B")), "A", (ECTransition("A", "GHOST", None, "B"),)
            ),
        )


def test_instance_port_type_enforced():
    fb = FBInstance("c", make_counter_type())
    with pytest.raises(ValueError):
        fb.set("CNT", "text")
    fb.set("CNT", 7)
    assert fb.get("CNT") == 7
