"""Logical devices, logical nodes and their typed data objects.

Node names follow the four-letter-class-plus-instance convention
(``XCBR1``, ``FPTOC2``); ``LLN0`` is the fixed device-level node.  Every
data object conforms to a common data class; the supported classes are

    SPS  status boolean      (stVal, q, t)
    DPC  double-point switch (stVal in {intermediate, off, on, bad}, q, t)
    MV   measured value      (mag in amperes, q, t)
    ACT  protection signal   (general, q, t)

Attribute reads and writes go through dot-path references of the form
``LD/LN.DO.attr``.  Writes stamp the timestamp, keep quality unless it is
explicitly replaced, and emit a change record; replaying all change
records against a fresh model reproduces the final state, which is what
the server-buffer synchronization relies on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

from .values import (
    GOOD,
    DataValue,
    Nanos,
    Quality,
    boolean,
    enum,
    float64,
    value_to_json,
)

SUPPORTED_CLASSES = ("XCBR", "PTOC", "PTRC", "RREC", "TCTR", "LLN0")

# class -> [(data object name, CDC)]
MANDATORY_DOS: dict[str, tuple[tuple[str, str], ...]] = {
    "XCBR": (("Pos", "DPC"),),
    "PTOC": (("Str", "ACT"), ("Op", "ACT")),
    "PTRC": (("Tr", "ACT"),),
    "RREC": (("Op", "ACT"), ("BlkRec", "SPS")),
    "TCTR": (("Amp", "MV"),),
    "LLN0": (),
}

# CDC -> (value attribute name, default value factory)
CDC_VALUE_ATTR: dict[str, tuple[str, Callable[[], DataValue]]] = {
    "SPS": ("stVal", lambda: boolean(False)),
    "DPC": ("stVal", lambda: enum("dpc", "off")),
    "MV": ("mag", lambda: float64(0.0)),
    "ACT": ("general", lambda: boolean(False)),
}

_IDENT = r"[A-Za-z][A-Za-z0-9]*"
_REF_RE = re.compile(rf"^({_IDENT})/({_IDENT})\.({_IDENT})\.({_IDENT})$")


class ModelError(ValueError):
    pass


class UnresolvedReferenceError(ModelError):
    """A reference segment failed to resolve; ``level`` tells which one."""

    def __init__(self, level: str, path: str):
        self.level = level  # ld | ln | do | attr
        super().__init__(f"unresolved {level} in reference {path!r}")


class TypeMismatchError(ModelError):
    pass


@dataclass(frozen=True)
class LNName:
    ln_class: str
    instance_id: int = 1
    prefix: Optional[str] = None

    def __post_init__(self) -> None:
        if self.ln_class not in SUPPORTED_CLASSES:
            raise ModelError(f"unsupported logical node class {self.ln_class!r}")
        if self.ln_class == "LLN0":
            if self.prefix is not None:
                raise ModelError("LLN0 takes no prefix")
        elif self.instance_id < 1:
            raise ModelError(f"instance id must be positive, got {self.instance_id}")

    def render(self) -> str:
        if self.ln_class == "LLN0":
            return "LLN0"
        return f"{self.prefix or ''}{self.ln_class}{self.instance_id}"

    def __str__(self) -> str:
        return self.render()


def parse_ln_name(name: str) -> LNName:
    if name == "LLN0":
        return LNName("LLN0", 1)
    classes = "|".join(c for c in SUPPORTED_CLASSES if c != "LLN0")
    m = re.match(rf"^((?:{_IDENT})??)({classes})([1-9]\d*)$", name)
    if not m:
        raise ModelError(f"not a supported logical node name: {name!r}")
    prefix, cls, inst = m.group(1) or None, m.group(2), int(m.group(3))
    return LNName(cls, inst, prefix)


@dataclass
class DataObject:
    name: str
    cdc: str
    value: DataValue
    q: Quality
    t: Nanos

    @property
    def value_attr(self) -> str:
        return CDC_VALUE_ATTR[self.cdc][0]


class LogicalNode:
    def __init__(self, name: LNName, host_resource: str | None = None):
        self.name = name
        self.host_resource = host_resource or name.render()
        self.data_objects: dict[str, DataObject] = {}
        for do_name, cdc in MANDATORY_DOS[name.ln_class]:
            attr, default = CDC_VALUE_ATTR[cdc]
            self.data_objects[do_name] = DataObject(do_name, cdc, default(), GOOD, 0)

    def do(self, name: str) -> DataObject:
        return self.data_objects[name]


class LogicalDevice:
    def __init__(self, name: str):
        self.name = name
        self.logical_nodes: dict[str, LogicalNode] = {}
        self.add_ln(LogicalNode(LNName("LLN0")))

    def add_ln(self, ln: LogicalNode) -> LogicalNode:
        key = ln.name.render()
        if key in self.logical_nodes:
            raise ModelError(f"{self.name}: duplicate logical node {key}")
        self.logical_nodes[key] = ln
        return ln


def build_ln(ln_class: str, instance_id: int = 1, prefix: str | None = None) -> LogicalNode:
    """Create a logical node of a supported class with its mandatory data
    objects default-initialized (booleans false, positions off, magnitudes 0)."""
    return LogicalNode(LNName(ln_class, instance_id, prefix))


@dataclass(frozen=True)
class ObjectReference:
    ld: str
    ln: str
    do: str
    attr: str

    def render(self) -> str:
        return f"{self.ld}/{self.ln}.{self.do}.{self.attr}"

    def __str__(self) -> str:
        return self.render()


def parse_reference(path: str) -> ObjectReference:
    m = _REF_RE.match(path)
    if not m:
        raise ModelError(f"malformed object reference {path!r} (want LD/LN.DO.attr)")
    return ObjectReference(*m.groups())


@dataclass(frozen=True)
class ChangeRecord:
    """One applied attribute write; the server buffer and GOOSE publishers
    consume these in emission order."""

    seq: int
    ref: str
    old: DataValue
    new: DataValue
    q: Quality
    t: Nanos

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "ref": self.ref,
            "old": value_to_json(self.old),
            "new": value_to_json(self.new),
            "q": self.q.to_json(),
            "t": self.t,
        }


class ModelStore:
    """The logical devices owned by one physical device, plus the change feed."""

    def __init__(self, lds: Iterable[LogicalDevice] = ()):
        self.lds: dict[str, LogicalDevice] = {}
        self._seq = 0
        self.pending: list[ChangeRecord] = []
        self._listeners: list[Callable[[ChangeRecord], None]] = []
        for ld in lds:
            self.add_ld(ld)

    def add_ld(self, ld: LogicalDevice) -> LogicalDevice:
        if ld.name in self.lds:
            raise ModelError(f"duplicate logical device {ld.name}")
        self.lds[ld.name] = ld
        return ld

    def add_listener(self, fn: Callable[[ChangeRecord], None]) -> None:
        self._listeners.append(fn)

    def _locate(self, ref: ObjectReference) -> DataObject:
        ld = self.lds.get(ref.ld)
        if ld is None:
            raise UnresolvedReferenceError("ld", ref.render())
        ln = ld.logical_nodes.get(ref.ln)
        if ln is None:
            raise UnresolvedReferenceError("ln", ref.render())
        do = ln.data_objects.get(ref.do)
        if do is None:
            raise UnresolvedReferenceError("do", ref.render())
        if ref.attr not in (do.value_attr, "q", "t"):
            raise UnresolvedReferenceError("attr", ref.render())
        return do

    def resolve(self, ref: str | ObjectReference) -> tuple[DataValue, Quality, Nanos]:
        if isinstance(ref, str):
            ref = parse_reference(ref)
        do = self._locate(ref)
        return do.value, do.q, do.t

    def update_attribute(
        self,
        ref: str | ObjectReference,
        value: DataValue,
        at: Nanos,
        q: Quality | None = None,
    ) -> Optional[ChangeRecord]:
        """Write one value attribute.  Returns the change record, or None for
        an idempotent write (same value, same quality)."""
        if isinstance(ref, str):
            ref = parse_reference(ref)
        do = self._locate(ref)
        if ref.attr != do.value_attr:
            raise TypeMismatchError(f"{ref}: only the value attribute is writable, not {ref.attr!r}")
        if not do.value.same_type(value):
            raise TypeMismatchError(
                f"{ref}: expected {do.value.kind}/{do.value.enum_type}, "
                f"got {value.kind}/{value.enum_type}"
            )
        new_q = q if q is not None else do.q
        if value == do.value and new_q == do.q:
            return None
        self._seq += 1
        rec = ChangeRecord(self._seq, ref.render(), do.value, value, new_q, at)
        do.value = value
        do.q = new_q
        do.t = at
        self.pending.append(rec)
        for fn in self._listeners:
            fn(rec)
        return rec

    def apply_record(self, rec: ChangeRecord) -> None:
        """Replay one change record (used for fold-equivalence checks)."""
        ref = parse_reference(rec.ref)
        do = self._locate(ref)
        do.value = rec.new
        do.q = rec.q
        do.t = rec.t

    def drain_pending(self) -> list[ChangeRecord]:
        out, self.pending = self.pending, []
        return out

    def walk_references(self) -> list[ObjectReference]:
        """Every resolvable value-attribute reference, in model order."""
        out = []
        for ld in self.lds.values():
            for ln in ld.logical_nodes.values():
                for do in ln.data_objects.values():
                    out.append(ObjectReference(ld.name, ln.name.render(), do.name, do.value_attr))
        return out
