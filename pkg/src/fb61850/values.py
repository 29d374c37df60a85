"""Typed values carried on function-block ports, bus messages and node data.

A ``DataValue`` is one of: boolean, 32-bit integer, 64-bit float, text,
enumeration (tagged) or a timestamp in simulated nanoseconds since epoch.
Enumeration values are checked against a registered value set for their tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Nanos = int

NS_PER_MS = 1_000_000

_INT32_MIN = -(2**31)
_INT32_MAX = 2**31 - 1

# tag -> allowed value identifiers, insertion order preserved
_ENUM_TYPES: dict[str, tuple[str, ...]] = {}


class ValueError_(ValueError):
    """Raised on malformed or type-mismatched values."""


def register_enum(tag: str, values: tuple[str, ...]) -> None:
    existing = _ENUM_TYPES.get(tag)
    if existing is not None and existing != tuple(values):
        raise ValueError_(f"enum tag {tag!r} already registered with different values")
    _ENUM_TYPES[tag] = tuple(values)


def enum_values(tag: str) -> tuple[str, ...]:
    try:
        return _ENUM_TYPES[tag]
    except KeyError:
        raise ValueError_(f"unknown enum tag {tag!r}") from None


@dataclass(frozen=True)
class DataValue:
    kind: str  # bool | int32 | float64 | text | enum | timestamp
    value: object
    enum_type: str | None = None

    def __post_init__(self) -> None:
        k, v = self.kind, self.value
        if k == "bool":
            if not isinstance(v, bool):
                raise ValueError_(f"bool value expected, got {v!r}")
        elif k == "int32":
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError_(f"int32 value expected, got {v!r}")
            if not _INT32_MIN <= v <= _INT32_MAX:
                raise ValueError_(f"int32 out of range: {v}")
        elif k == "float64":
            if not isinstance(v, float):
                raise ValueError_(f"float64 value expected, got {v!r}")
        elif k == "text":
            if not isinstance(v, str):
                raise ValueError_(f"text value expected, got {v!r}")
        elif k == "enum":
            if self.enum_type is None:
                raise ValueError_("enum value requires an enum_type tag")
            if v not in enum_values(self.enum_type):
                raise ValueError_(
                    f"{v!r} not in enum {self.enum_type!r} {enum_values(self.enum_type)}"
                )
        elif k == "timestamp":
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError_(f"timestamp must be a non-negative int, got {v!r}")
        else:
            raise ValueError_(f"unknown value kind {k!r}")
        if k != "enum" and self.enum_type is not None:
            raise ValueError_("enum_type only valid for enum values")

    def same_type(self, other: "DataValue") -> bool:
        return self.kind == other.kind and self.enum_type == other.enum_type


def boolean(v: bool) -> DataValue:
    return DataValue("bool", bool(v))


def int32(v: int) -> DataValue:
    return DataValue("int32", v)


def float64(v: float) -> DataValue:
    return DataValue("float64", float(v))


def text(v: str) -> DataValue:
    return DataValue("text", v)


def enum(tag: str, v: str) -> DataValue:
    return DataValue("enum", v, enum_type=tag)


def timestamp(ns: Nanos) -> DataValue:
    return DataValue("timestamp", ns)


def value_to_json(dv: DataValue) -> dict:
    out: dict = {"type": dv.kind, "value": dv.value}
    if dv.kind == "enum":
        out["tag"] = dv.enum_type
    return out


def value_from_json(obj: dict) -> DataValue:
    if not isinstance(obj, dict) or "type" not in obj or "value" not in obj:
        raise ValueError_(f"malformed value object: {obj!r}")
    kind = obj["type"]
    if kind == "enum":
        return DataValue("enum", obj["value"], enum_type=obj.get("tag"))
    if kind == "float64" and isinstance(obj["value"], int) and not isinstance(obj["value"], bool):
        return DataValue("float64", float(obj["value"]))
    return DataValue(kind, obj["value"])


@dataclass(frozen=True)
class Quality:
    """Companion of a status/measurement value; defaults to (good, process)."""

    validity: str = "good"  # good | invalid | questionable
    source: str = "process"  # process | substituted

    def __post_init__(self) -> None:
        if self.validity not in ("good", "invalid", "questionable"):
            raise ValueError_(f"bad validity {self.validity!r}")
        if self.source not in ("process", "substituted"):
            raise ValueError_(f"bad source {self.source!r}")

    def to_json(self) -> dict:
        return {"validity": self.validity, "source": self.source}


GOOD = Quality()

# Double-point position of a switching device.
register_enum("dpc", ("intermediate", "off", "on", "bad"))
