"""System description documents: JSON -> linked SystemModel.

The document shape is ``devices[] / resources[] / fbs[] + connections[]``
with connection endpoints written ``"instance.PORT"``.  Composite FB types
are expanded at load time: inner instances get dotted names
(``outer.inner``) and connections that touch a composite boundary port are
rewritten onto the concrete inner blocks, so the scheduler only ever sees
basic and service-interface instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import jsonschema

from .blocks import (
    BasicFBType,
    BlockDefinitionError,
    CompositeFBType,
    FBInstance,
    ServiceInterfaceFBType,
    _FBTypeBase,
    registry,
)
from .runtime import Resource, SystemModel

SYSTEM_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Function block system description",
    "type": "object",
    "required": ["devices"],
    "additionalProperties": False,
    "properties": {
        "devices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "resources"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "address": {"type": "object"},
                    "resources": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "fbs"],
                            "additionalProperties": False,
                            "properties": {
                                "name": {"type": "string", "minLength": 1},
                                "fbs": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["type", "name"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "type": {"type": "string"},
                                            "name": {"type": "string", "minLength": 1},
                                            "parameters": {"type": "object"},
                                        },
                                    },
                                },
                                "connections": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["kind", "src", "dst"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "kind": {"enum": ["event", "data"]},
                                            "src": {"type": "string", "pattern": r"^[^.]+(\.[^.]+)*$"},
                                            "dst": {"type": "string", "pattern": r"^[^.]+(\.[^.]+)*$"},
                                        },
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


class SystemLoadError(ValueError):
    """Document does not describe a loadable system; message carries the path."""


@dataclass
class _Expanded:
    """Concrete view of one FB entry after composite expansion."""

    instances: dict[str, FBInstance] = field(default_factory=dict)
    event_links: list[tuple[tuple[str, str], tuple[str, str]]] = field(default_factory=list)
    data_sources: dict[tuple[str, str], tuple[str, str]] = field(default_factory=dict)
    # boundary maps (empty for non-composites)
    ev_in: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    ev_out: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    data_in: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    data_out: dict[str, tuple[str, str]] = field(default_factory=dict)


def _port_kind(fbtype: _FBTypeBase, port: str) -> str | None:
    if port in {p.name for p in fbtype.event_inputs}:
        return "event_in"
    if port in {p.name for p in fbtype.event_outputs}:
        return "event_out"
    if port in {p.name for p in fbtype.data_inputs}:
        return "data_in"
    if port in {p.name for p in fbtype.data_outputs}:
        return "data_out"
    return None


def _expand(name: str, fbtype: _FBTypeBase, params: Mapping, path: str,
            types: Mapping[str, _FBTypeBase]) -> _Expanded:
    out = _Expanded()
    if isinstance(fbtype, (BasicFBType, ServiceInterfaceFBType)):
        try:
            out.instances[name] = FBInstance(name, fbtype, params)
        except (BlockDefinitionError, ValueError) as e:
            raise SystemLoadError(f"{path}: {e}") from None
        for p in fbtype.event_inputs:
            out.ev_in[p.name] = [(name, p.name)]
        for p in fbtype.event_outputs:
            out.ev_out[p.name] = [(name, p.name)]
        for p in fbtype.data_inputs:
            out.data_in[p.name] = [(name, p.name)]
        for p in fbtype.data_outputs:
            out.data_out[p.name] = (name, p.name)
        return out

    assert isinstance(fbtype, CompositeFBType)
    if params:
        raise SystemLoadError(f"{path}: composite {fbtype.type_name} takes no instance parameters")
    inner: dict[str, _Expanded] = {}
    for iname, itype_name in fbtype.fbs.items():
        itype = types.get(itype_name)
        if itype is None:
            raise SystemLoadError(f"{path}: unresolved FB type {itype_name!r} inside "
                                  f"{fbtype.type_name}")
        sub = _expand(f"{name}.{iname}", itype, fbtype.parameters.get(iname, {}),
                      f"{path}.{iname}", types)
        inner[iname] = sub
        out.instances.update(sub.instances)
        out.event_links.extend(sub.event_links)
        out.data_sources.update(sub.data_sources)

    def split(endpoint: str) -> tuple[str | None, str]:
        if "." in endpoint:
            head, port = endpoint.split(".", 1)
            return head, port
        return None, endpoint

    for conn in fbtype.connections:
        where = f"{path}: {fbtype.type_name} connection {conn.src}->{conn.dst}"
        s_inst, s_port = split(conn.src)
        d_inst, d_port = split(conn.dst)
        if conn.kind == "event":
            if s_inst is None and d_inst is None:
                raise SystemLoadError(f"{where}: boundary-to-boundary pass-through unsupported")
            if s_inst is None:  # boundary input -> inner inputs
                if _port_kind(fbtype, s_port) != "event_in":
                    raise SystemLoadError(f"{where}: {s_port!r} is not a boundary input event")
                targets = inner[d_inst].ev_in.get(d_port) if d_inst in inner else None
                if targets is None:
                    raise SystemLoadError(f"{where}: unknown inner input event {conn.dst!r}")
                out.ev_in.setdefault(s_port, []).extend(targets)
            elif d_inst is None:  # inner output -> boundary output
                if _port_kind(fbtype, d_port) != "event_out":
                    raise SystemLoadError(f"{where}: {d_port!r} is not a boundary output event")
                sources = inner[s_inst].ev_out.get(s_port) if s_inst in inner else None
                if sources is None:
                    raise SystemLoadError(f"{where}: unknown inner output event {conn.src!r}")
                out.ev_out.setdefault(d_port, []).extend(sources)
            else:  # inner to inner
                sources = inner[s_inst].ev_out.get(s_port) if s_inst in inner else None
                targets = inner[d_inst].ev_in.get(d_port) if d_inst in inner else None
                if sources is None or targets is None:
                    raise SystemLoadError(f"{where}: unresolved inner event endpoint")
                for s in sources:
                    for t in targets:
                        out.event_links.append((s, t))
        else:
            if s_inst is None and d_inst is None:
                raise SystemLoadError(f"{where}: boundary-to-boundary pass-through unsupported")
            if s_inst is None:  # boundary data input feeds inner sinks
                if _port_kind(fbtype, s_port) != "data_in":
                    raise SystemLoadError(f"{where}: {s_port!r} is not a boundary data input")
                sinks = inner[d_inst].data_in.get(d_port) if d_inst in inner else None
                if sinks is None:
                    raise SystemLoadError(f"{where}: unknown inner data input {conn.dst!r}")
                out.data_in.setdefault(s_port, []).extend(sinks)
            elif d_inst is None:  # inner source backs boundary data output
                if _port_kind(fbtype, d_port) != "data_out":
                    raise SystemLoadError(f"{where}: {d_port!r} is not a boundary data output")
                src = inner[s_inst].data_out.get(s_port) if s_inst in inner else None
                if src is None:
                    raise SystemLoadError(f"{where}: unknown inner data output {conn.src!r}")
                if d_port in out.data_out:
                    raise SystemLoadError(f"{where}: boundary output {d_port!r} bound twice")
                out.data_out[d_port] = src
            else:
                src = inner[s_inst].data_out.get(s_port) if s_inst in inner else None
                sinks = inner[d_inst].data_in.get(d_port) if d_inst in inner else None
                if src is None or sinks is None:
                    raise SystemLoadError(f"{where}: unresolved inner data endpoint")
                for sink in sinks:
                    if sink in out.data_sources:
                        raise SystemLoadError(f"{where}: data input {sink} fed by two sources")
                    out.data_sources[sink] = src

    for p in fbtype.event_inputs:
        out.ev_in.setdefault(p.name, [])
    for p in fbtype.event_outputs:
        out.ev_out.setdefault(p.name, [])
    return out


def _wire_resource(res: Resource, entries: dict[str, _Expanded],
                   connections: list, path: str) -> None:
    for exp in entries.values():
        for inst in exp.instances.values():
            res.add_instance(inst)
        for (s, t) in exp.event_links:
            res.event_links.setdefault(s, []).append(t)
        for sink, src in exp.data_sources.items():
            res.data_sources[sink] = src
    for name, exp in entries.items():
        for bport, targets in exp.ev_in.items():
            res.event_aliases[f"{name}.{bport}"] = targets

    for i, conn in enumerate(connections):
        where = f"{path}.connections[{i}] ({conn['src']} -> {conn['dst']})"
        try:
            s_name, s_port = conn["src"].split(".", 1)
            d_name, d_port = conn["dst"].split(".", 1)
        except ValueError:
            raise SystemLoadError(f"{where}: endpoints must be 'instance.PORT'") from None
        s_exp = entries.get(s_name)
        d_exp = entries.get(d_name)
        if s_exp is None:
            raise SystemLoadError(f"{where}: unknown FB instance {s_name!r}")
        if d_exp is None:
            raise SystemLoadError(f"{where}: unknown FB instance {d_name!r}")
        if conn["kind"] == "event":
            sources = s_exp.ev_out.get(s_port)
            targets = d_exp.ev_in.get(d_port)
            if sources is None:
                raise SystemLoadError(f"{where}: {conn['src']!r} is not an output event port")
            if targets is None:
                raise SystemLoadError(f"{where}: {conn['dst']!r} is not an input event port")
            for s in sources:
                for t in targets:
                    res.event_links.setdefault(s, []).append(t)
        else:
            src = s_exp.data_out.get(s_port)
            sinks = d_exp.data_in.get(d_port)
            if src is None:
                raise SystemLoadError(f"{where}: {conn['src']!r} is not an output data port")
            if sinks is None:
                raise SystemLoadError(f"{where}: {conn['dst']!r} is not an input data port")
            src_value = res.instances[src[0]].get_value(src[1])
            for sink in sinks:
                if sink in res.data_sources:
                    raise SystemLoadError(f"{where}: data input {sink[0]}.{sink[1]} fed by two sources")
                sink_value = res.instances[sink[0]].get_value(sink[1])
                if not src_value.same_type(sink_value):
                    raise SystemLoadError(
                        f"{where}: type mismatch {src_value.kind} -> {sink_value.kind}"
                    )
                res.data_sources[sink] = src


def load_system(document, types: Mapping[str, _FBTypeBase] | None = None) -> SystemModel:
    """Build a fully linked SystemModel from a document (dict, JSON text, or path)."""
    if isinstance(document, (str, Path)) and not (
        isinstance(document, str) and document.lstrip().startswith("{")
    ):
        document = json.loads(Path(document).read_text(encoding="utf-8"))
    elif isinstance(document, str):
        document = json.loads(document)
    try:
        jsonschema.validate(document, SYSTEM_SCHEMA)
    except jsonschema.ValidationError as e:
        raise SystemLoadError(f"{e.json_path}: {e.message}") from None

    types = dict(types) if types is not None else registry()
    system = SystemModel()
    for di, dev_doc in enumerate(document["devices"]):
        dpath = f"devices[{di}]"
        if dev_doc["name"] in system.devices:
            raise SystemLoadError(f"{dpath}: duplicate device name {dev_doc['name']!r}")
        dev = system.add_device(dev_doc["name"], dev_doc.get("address"))
        for ri, res_doc in enumerate(dev_doc["resources"]):
            rpath = f"{dpath}.resources[{ri}]"
            if res_doc["name"] in dev.resources:
                raise SystemLoadError(f"{rpath}: duplicate resource name {res_doc['name']!r}")
            res = dev.add_resource(res_doc["name"])
            entries: dict[str, _Expanded] = {}
            for fi, fb_doc in enumerate(res_doc["fbs"]):
                fpath = f"{rpath}.fbs[{fi}]"
                if fb_doc["name"] in entries:
                    raise SystemLoadError(f"{fpath}: duplicate FB name {fb_doc['name']!r}")
                fbtype = types.get(fb_doc["type"])
                if fbtype is None:
                    raise SystemLoadError(f"{fpath}: unresolved FB type {fb_doc['type']!r}")
                entries[fb_doc["name"]] = _expand(
                    fb_doc["name"], fbtype, fb_doc.get("parameters", {}), fpath, types
                )
            _wire_resource(res, entries, res_doc.get("connections", []), rpath)
    return system
