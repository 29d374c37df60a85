"""Function block types: basic blocks with execution control charts,
composite blocks with an inner network, and service interface blocks.

A basic block fires by walking its execution control chart: transitions
from the current state are evaluated in declaration order, the first one
whose trigger matches the incoming event (or has no trigger) and whose
guard holds is taken.  The target state's actions run in order (algorithm,
then optional output event), after which event-less transitions keep
chaining until none fires.  A chain longer than ``CHAIN_LIMIT`` aborts:
that is a livelocked chart, not a legal program.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .values import DataValue

CHAIN_LIMIT = 1000


class BlockDefinitionError(ValueError):
    """Malformed FB type: bad ports, chart, guard or algorithm wiring."""


class EccLivelockError(RuntimeError):
    """More than CHAIN_LIMIT chained event-less transitions in one firing."""


class UnknownPortError(KeyError):
    pass


# ---------------------------------------------------------------------------
# interface declarations


@dataclass(frozen=True)
class EventPort:
    name: str
    with_data: tuple[str, ...] = ()


@dataclass(frozen=True)
class DataPortDef:
    name: str
    default: DataValue


@dataclass(frozen=True)
class Action:
    algorithm: Optional[str] = None
    output_event: Optional[str] = None


@dataclass(frozen=True)
class ECState:
    name: str
    actions: tuple[Action, ...] = ()


@dataclass(frozen=True)
class ECTransition:
    source: str
    trigger: Optional[str]  # input event name, or None for event-less
    guard: Optional[str]  # boolean expression over data ports / variables
    target: str


@dataclass(frozen=True)
class ExecutionControlChart:
    states: tuple[ECState, ...]
    initial: str
    transitions: tuple[ECTransition, ...]


# ---------------------------------------------------------------------------
# guard expressions

_ALLOWED_NODES = (
    ast.Expression,
    ast.BoolOp,
    ast.And,
    ast.Or,
    ast.UnaryOp,
    ast.Not,
    ast.USub,
    ast.UAdd,
    ast.BinOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Mod,
    ast.Compare,
    ast.Eq,
    ast.NotEq,
    ast.Lt,
    ast.LtE,
    ast.Gt,
    ast.GtE,
    ast.Name,
    ast.Load,
    ast.Constant,
)


def compile_guard(expr: str, allowed_names: Iterable[str]):
    """Compile a guard expression, rejecting anything but boolean/arithmetic
    comparisons over the declared port and variable names."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as e:
        raise BlockDefinitionError(f"guard {expr!r}: {e}") from None
    allowed = set(allowed_names)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise BlockDefinitionError(
                f"guard {expr!r}: disallowed construct {type(node).__name__}"
            )
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise BlockDefinitionError(f"guard {expr!r}: unknown name {node.id!r}")
    return compile(tree, f"<guard:{expr}>", "eval")


# ---------------------------------------------------------------------------
# FB types


class _FBTypeBase:
    kind = "?"

    def __init__(
        self,
        type_name: str,
        event_inputs: Iterable[EventPort] = (),
        event_outputs: Iterable[EventPort] = (),
        data_inputs: Iterable[DataPortDef] = (),
        data_outputs: Iterable[DataPortDef] = (),
        internal_vars: Mapping[str, DataValue] | None = None,
    ):
        self.type_name = type_name
        self.event_inputs = tuple(event_inputs)
        self.event_outputs = tuple(event_outputs)
        self.data_inputs = tuple(data_inputs)
        self.data_outputs = tuple(data_outputs)
        self.internal_vars = dict(internal_vars or {})
        self._validate_interface()

    def _validate_interface(self) -> None:
        ev_names = [p.name for p in self.event_inputs + self.event_outputs]
        dv_names = [p.name for p in self.data_inputs + self.data_outputs] + list(
            self.internal_vars
        )
        for names, what in ((ev_names, "event port"), (dv_names, "data port/variable")):
            dupes = {n for n in names if names.count(n) > 1}
            if dupes:
                raise BlockDefinitionError(
                    f"{self.type_name}: duplicate {what} name(s) {sorted(dupes)}"
                )
        overlap = set(ev_names) & set(dv_names)
        if overlap:
            raise BlockDefinitionError(
                f"{self.type_name}: names used for both events and data {sorted(overlap)}"
            )
        din = {p.name for p in self.data_inputs}
        dout = {p.name for p in self.data_outputs}
        for port in self.event_inputs:
            missing = set(port.with_data) - din
            if missing:
                raise BlockDefinitionError(
                    f"{self.type_name}.{port.name}: WITH references non-input data {sorted(missing)}"
                )
        for port in self.event_outputs:
            missing = set(port.with_data) - dout
            if missing:
                raise BlockDefinitionError(
                    f"{self.type_name}.{port.name}: WITH references non-output data {sorted(missing)}"
                )

    def input_event_names(self) -> set[str]:
        return {p.name for p in self.event_inputs}

    def output_event_names(self) -> set[str]:
        return {p.name for p in self.event_outputs}

    def event_input(self, name: str) -> EventPort:
        for p in self.event_inputs:
            if p.name == name:
                return p
        raise UnknownPortError(f"{self.type_name}: no input event {name!r}")


class BasicFBType(_FBTypeBase):
    """Basic function block: interface + execution control chart + algorithms."""

    kind = "basic"

    def __init__(
        self,
        type_name: str,
        *,
        event_inputs: Iterable[EventPort] = (),
        event_outputs: Iterable[EventPort] = (),
        data_inputs: Iterable[DataPortDef] = (),
        data_outputs: Iterable[DataPortDef] = (),
        internal_vars: Mapping[str, DataValue] | None = None,
        ecc: ExecutionControlChart,
        algorithms: Mapping[str, Callable] | None = None,
    ):
        super().__init__(
            type_name, event_inputs, event_outputs, data_inputs, data_outputs, internal_vars
        )
        self.ecc = ecc
        self.algorithms = dict(algorithms or {})
        self._guards: dict[str, object] = {}
        self._validate_ecc()

    def _validate_ecc(self) -> None:
        names = [s.name for s in self.ecc.states]
        if len(set(names)) != len(names):
            raise BlockDefinitionError(f"{self.type_name}: duplicate ECC state names")
        if self.ecc.initial not in names:
            raise BlockDefinitionError(
                f"{self.type_name}: initial state {self.ecc.initial!r} not declared"
            )
        value_names = (
            [p.name for p in self.data_inputs]
            + [p.name for p in self.data_outputs]
            + list(self.internal_vars)
        )
        inputs = self.input_event_names()
        outputs = self.output_event_names()
        for st in self.ecc.states:
            for act in st.actions:
                if act.algorithm is not None and act.algorithm not in self.algorithms:
                    raise BlockDefinitionError(
                        f"{self.type_name}.{st.name}: unregistered algorithm {act.algorithm!r}"
                    )
                if act.output_event is not None and act.output_event not in outputs:
                    raise BlockDefinitionError(
                        f"{self.type_name}.{st.name}: unknown output event {act.output_event!r}"
                    )
        for tr in self.ecc.transitions:
            if tr.source not in names or tr.target not in names:
                raise BlockDefinitionError(
                    f"{self.type_name}: transition {tr.source}->{tr.target} names unknown state"
                )
            if tr.trigger is not None and tr.trigger not in inputs:
                raise BlockDefinitionError(
                    f"{self.type_name}: transition trigger {tr.trigger!r} is not an input event"
                )
            if tr.guard is not None and tr.guard not in self._guards:
                self._guards[tr.guard] = compile_guard(tr.guard, value_names)

    def guard_code(self, expr: str):
        return self._guards[expr]


class ServiceInterfaceFBType(_FBTypeBase):
    """Service interface block: behavior lives in a host-language handler
    invoked as ``handler(instance, event_name, ctx)``."""

    kind = "sifb"

    def __init__(
        self,
        type_name: str,
        *,
        event_inputs: Iterable[EventPort] = (),
        event_outputs: Iterable[EventPort] = (),
        data_inputs: Iterable[DataPortDef] = (),
        data_outputs: Iterable[DataPortDef] = (),
        internal_vars: Mapping[str, DataValue] | None = None,
        handler: Callable,
        service_contract: str = "",
    ):
        super().__init__(
            type_name, event_inputs, event_outputs, data_inputs, data_outputs, internal_vars
        )
        self.handler = handler
        self.service_contract = service_contract


@dataclass(frozen=True)
class Connection:
    kind: str  # event | data
    src: str  # "instance.PORT", or "PORT" for a composite boundary port
    dst: str


class CompositeFBType(_FBTypeBase):
    """Composite block: behavior is a network of inner FB instances.

    Connection endpoints with no dot refer to the composite's own boundary
    ports; dotted endpoints refer to inner instance ports.
    """

    kind = "composite"

    def __init__(
        self,
        type_name: str,
        *,
        event_inputs: Iterable[EventPort] = (),
        event_outputs: Iterable[EventPort] = (),
        data_inputs: Iterable[DataPortDef] = (),
        data_outputs: Iterable[DataPortDef] = (),
        fbs: Mapping[str, str] | None = None,  # inner instance name -> type name
        connections: Iterable[Connection] = (),
        parameters: Mapping[str, Mapping] | None = None,  # inner name -> params
    ):
        super().__init__(type_name, event_inputs, event_outputs, data_inputs, data_outputs, None)
        self.fbs = dict(fbs or {})
        self.connections = tuple(connections)
        self.parameters = {k: dict(v) for k, v in (parameters or {}).items()}
        if not self.fbs:
            raise BlockDefinitionError(f"{type_name}: composite with empty inner network")


# ---------------------------------------------------------------------------
# instances


class FBInstance:
    """Runtime instance of a basic or service-interface block."""

    def __init__(self, name: str, fbtype: _FBTypeBase, params: Mapping | None = None):
        if isinstance(fbtype, CompositeFBType):
            raise BlockDefinitionError("composite types are expanded at load, not instantiated")
        self.name = name
        self.fbtype = fbtype
        self.inputs: dict[str, DataValue] = {p.name: p.default for p in fbtype.data_inputs}
        self.outputs: dict[str, DataValue] = {p.name: p.default for p in fbtype.data_outputs}
        self.vars: dict[str, DataValue] = dict(fbtype.internal_vars)
        self.ec_state = fbtype.ecc.initial if isinstance(fbtype, BasicFBType) else ""
        self.config: dict = {}  # SIFB parameters that are not port/var names
        self.state: dict = {}  # SIFB private runtime state
        for key, raw in (params or {}).items():
            if key in self.inputs or key in self.vars or key in self.outputs:
                self.set(key, raw)
            elif fbtype.kind == "sifb":
                self.config[key] = raw
            else:
                raise BlockDefinitionError(
                    f"{name}: unknown parameter {key!r} for type {fbtype.type_name}"
                )

    # -- value access (python-level values; enums read/write as their string)

    def _slot(self, port: str) -> dict[str, DataValue]:
        for d in (self.inputs, self.outputs, self.vars):
            if port in d:
                return d
        raise UnknownPortError(f"{self.name}: no data port or variable {port!r}")

    def get(self, port: str):
        return self._slot(port)[port].value

    def get_value(self, port: str) -> DataValue:
        return self._slot(port)[port]

    def set(self, port: str, raw) -> None:
        slot = self._slot(port)
        cur = slot[port]
        if isinstance(raw, DataValue):
            if not cur.same_type(raw):
                raise ValueError(
                    f"{self.name}.{port}: expected {cur.kind}/{cur.enum_type}, got {raw.kind}/{raw.enum_type}"
                )
            slot[port] = raw
            return
        if cur.kind == "float64" and isinstance(raw, int) and not isinstance(raw, bool):
            raw = float(raw)
        slot[port] = DataValue(cur.kind, raw, enum_type=cur.enum_type)

    def set_value(self, port: str, value: DataValue) -> None:
        self.set(port, value)

    def guard_env(self) -> dict:
        env: dict = {}
        for d in (self.inputs, self.outputs, self.vars):
            for k, v in d.items():
                env[k] = v.value
        return env

    def __repr__(self) -> str:  # pragma: no cover
        return f"<FBInstance {self.name}:{self.fbtype.type_name} state={self.ec_state}>"


def ecc_fire(fb: FBInstance, event: str) -> list[str]:
    """Deliver one input event to a basic FB and return emitted output events."""
    fbtype = fb.fbtype
    if not isinstance(fbtype, BasicFBType):
        raise BlockDefinitionError(f"{fb.name}: ecc_fire only applies to basic FBs")
    if event not in fbtype.input_event_names():
        raise UnknownPortError(f"{fb.name}: no input event {event!r}")

    emitted: list[str] = []
    pending: Optional[str] = event
    for hop in range(CHAIN_LIMIT + 1):
        taken = None
        env = None
        for tr in fbtype.ecc.transitions:
            if tr.source != fb.ec_state:
                continue
            if tr.trigger is not None and tr.trigger != pending:
                continue
            if tr.guard is not None:
                if env is None:
                    env = fb.guard_env()
                if not eval(fbtype.guard_code(tr.guard), {"__builtins__": {}}, env):
                    continue
            taken = tr
            break
        if taken is None:
            return emitted
        if hop == CHAIN_LIMIT:
            raise EccLivelockError(
                f"{fb.name}: aborted after {CHAIN_LIMIT} chained event-less transitions "
                f"(state {fb.ec_state!r})"
            )
        pending = None  # the triggering event is consumed by the first transition
        fb.ec_state = taken.target
        state = next(s for s in fbtype.ecc.states if s.name == taken.target)
        for act in state.actions:
            if act.algorithm is not None:
                fbtype.algorithms[act.algorithm](fb)
            if act.output_event is not None:
                emitted.append(act.output_event)
    return emitted


# ---------------------------------------------------------------------------
# type registry

_REGISTRY: dict[str, _FBTypeBase] = {}


def register_fb_type(fbtype: _FBTypeBase, replace: bool = False) -> _FBTypeBase:
    if not replace and fbtype.type_name in _REGISTRY:
        existing = _REGISTRY[fbtype.type_name]
        if existing is not fbtype:
            raise BlockDefinitionError(f"FB type {fbtype.type_name!r} already registered")
    _REGISTRY[fbtype.type_name] = fbtype
    return fbtype


def get_fb_type(name: str) -> _FBTypeBase:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise BlockDefinitionError(f"unresolved FB type {name!r}") from None


def registry() -> dict[str, _FBTypeBase]:
    return _REGISTRY
