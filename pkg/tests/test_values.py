import pytest

from fb61850.values import (
    DataValue,
    Quality,
    ValueError_,
    boolean,
    enum,
    float64,
    int32,
    register_enum,
    text,
    timestamp,
    value_from_json,
    value_to_json,
)


def test_constructors_and_kinds():
    assert boolean(True).value is True
    assert int32(-5).kind == "int32"
    assert float64(1).value == 1.0
    assert text("abc").kind == "text"
    assert enum("dpc", "on").enum_type == "dpc"
    assert timestamp(12).value == 12


@pytest.mark.parametrize(
    "kind, value",
    [
        ("bool", 1),
        ("int32", 2**31),
        ("int32", True),
        ("float64", "x"),
        ("text", 3),
        ("timestamp", -1),
        ("nosuch", 1),
    ],
)
def test_rejects_bad_values(kind, value):
    with pytest.raises(ValueError_):
        DataValue(kind, value)


def test_enum_requires_registered_member():
    with pytest.raises(ValueError_):
        enum("dpc", "sideways")
    with pytest.raises(ValueError_):
        enum("nosuchtag", "on")


def test_enum_registry_conflict():
    register_enum("t_colors", ("red", "green"))
    register_enum("t_colors", ("red", "green"))  # same values: fine
    with pytest.raises(ValueError_):
        register_enum("t_colors", ("red", "blue"))


def test_same_type_checks_enum_tag():
    register_enum("t_other", ("on", "off"))
    assert enum("dpc", "on").same_type(enum("dpc", "off"))
    assert not enum("dpc", "on").same_type(enum("t_other", "on"))
    assert not boolean(True).same_type(int32(1))


@pytest.mark.parametrize(
    "dv",
    [boolean(False), int32(41), float64(2.5), text("hi"), enum("dpc", "intermediate"), timestamp(7)],
)
def test_json_round_trip(dv):
    assert value_from_json(value_to_json(dv)) == dv


def test_json_accepts_int_for_float():
    assert value_from_json({"type": "float64", "value": 3}) == float64(3.0)


def test_quality_defaults_and_validation():
    q = Quality()
    assert (q.validity, q.source) == ("good", "process")
    with pytest.raises(ValueError_):
        Quality(validity="odd")
