"""Substation configuration files: parse, validate, instantiate.

Recognized XML subset: SCL, Header, IED, AccessPoint, Server, LDevice,
LN/LN0, DOI, DAI (with a Val child), DataSet, FCDA, GSEControl.  Anything
else is preserved as a warning, not an error.  Element matching is on
local names; namespace URIs are ignored.

``instantiate_from_scl`` turns a parsed document into per-IED logical
device models (via the node builder, so every node carries its mandatory
data objects), dataset definitions and control blocks; DAI values are
applied as initial values only.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .goose import DataSetDef, GooseControlBlock
from .lnmodel import (
    CDC_VALUE_ATTR,
    LogicalDevice,
    ModelError,
    ModelStore,
    ObjectReference,
    build_ln,
    parse_ln_name,
)
from .values import DataValue, boolean, enum, float64

RECOGNIZED = {
    "SCL", "Header", "IED", "AccessPoint", "Server", "LDevice",
    "LN", "LN0", "DOI", "DAI", "Val", "DataSet", "FCDA", "GSEControl",
}


class SclError(ValueError):
    pass


class SclParseError(SclError):
    pass


@dataclass(frozen=True)
class SclFcda:
    ld_inst: str
    ln_class: str
    ln_inst: str
    do_name: str
    da_name: str
    prefix: str = ""

    def to_reference(self) -> ObjectReference:
        ln = "LLN0" if self.ln_class == "LLN0" else f"{self.prefix}{self.ln_class}{self.ln_inst}"
        return ObjectReference(self.ld_inst, ln, self.do_name, self.da_name)


@dataclass(frozen=True)
class SclDataSet:
    name: str
    members: tuple[SclFcda, ...]


@dataclass(frozen=True)
class SclGseControl:
    name: str
    app_id: int
    dat_set: str


@dataclass(frozen=True)
class SclDai:
    name: str
    value: Optional[str]


@dataclass(frozen=True)
class SclDoi:
    name: str
    dais: tuple[SclDai, ...]


@dataclass(frozen=True)
class SclLn:
    ln_class: str
    inst: str
    prefix: str = ""
    dois: tuple[SclDoi, ...] = ()
    datasets: tuple[SclDataSet, ...] = ()
    gse_controls: tuple[SclGseControl, ...] = ()

    def rendered_name(self) -> str:
        if self.ln_class == "LLN0":
            return "LLN0"
        return f"{self.prefix}{self.ln_class}{self.inst}"


@dataclass(frozen=True)
class SclLDevice:
    inst: str
    lns: tuple[SclLn, ...]


@dataclass(frozen=True)
class SclAccessPoint:
    name: str
    ldevices: tuple[SclLDevice, ...]


@dataclass(frozen=True)
class SclIed:
    name: str
    access_points: tuple[SclAccessPoint, ...]

    def ldevices(self) -> list[SclLDevice]:
        return [ld for ap in self.access_points for ld in ap.ldevices]


@dataclass(frozen=True)
class SclDocument:
    header_id: str
    header_version: str
    ieds: tuple[SclIed, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


def _local(tag: str) -> str:
    return tag.split("}")[-1]


def _attr(el: ET.Element, name: str, path: str) -> str:
    value = el.get(name)
    if value is None:
        raise SclParseError(f"{path}: missing required attribute {name!r}")
    return value


def _children(el: ET.Element, name: str) -> list[ET.Element]:
    return [c for c in el if _local(c.tag) == name]


def parse_scl(text: str) -> SclDocument:
    """Parse an SCL document; malformed XML reports line and column."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        line, col = e.position
        raise SclParseError(f"malformed XML at line {line}, column {col}: {e.msg}") from None
    if _local(root.tag) != "SCL":
        raise SclParseError(f"root element is {_local(root.tag)!r}, expected SCL")

    warnings: list[str] = []

    def note_unrecognized(el: ET.Element, path: str) -> None:
        for child in el:
            if _local(child.tag) not in RECOGNIZED:
                warnings.append(f"{path}: unrecognized element {_local(child.tag)!r} (preserved as warning)")

    note_unrecognized(root, "SCL")
    headers = _children(root, "Header")
    header_id, header_version = "", ""
    if headers:
        header_id = headers[0].get("id", "")
        header_version = headers[0].get("version", "")

    ieds: list[SclIed] = []
    for ii, ied_el in enumerate(_children(root, "IED")):
        ipath = f"SCL/IED[{ii}]"
        note_unrecognized(ied_el, ipath)
        aps: list[SclAccessPoint] = []
        for ai, ap_el in enumerate(_children(ied_el, "AccessPoint")):
            apath = f"{ipath}/AccessPoint[{ai}]"
            note_unrecognized(ap_el, apath)
            lds: list[SclLDevice] = []
            for server_el in _children(ap_el, "Server"):
                note_unrecognized(server_el, f"{apath}/Server")
                for li, ld_el in enumerate(_children(server_el, "LDevice")):
                    lpath = f"{apath}/Server/LDevice[{li}]"
                    note_unrecognized(ld_el, lpath)
                    lns: list[SclLn] = []
                    for ni, ln_el in enumerate([c for c in ld_el if _local(c.tag) in ("LN", "LN0")]):
                        npath = f"{lpath}/{_local(ln_el.tag)}[{ni}]"
                        note_unrecognized(ln_el, npath)
                        ln_class = _attr(ln_el, "lnClass", npath)
                        inst = ln_el.get("inst", "")
                        prefix = ln_el.get("prefix", "")
                        dois = []
                        for doi_el in _children(ln_el, "DOI"):
                            dpath = f"{npath}/DOI"
                            note_unrecognized(doi_el, dpath)
                            dais = []
                            for dai_el in _children(doi_el, "DAI"):
                                vals = _children(dai_el, "Val")
                                dais.append(SclDai(
                                    _attr(dai_el, "name", f"{dpath}/DAI"),
                                    vals[0].text if vals else None,
                                ))
                            dois.append(SclDoi(_attr(doi_el, "name", dpath), tuple(dais)))
                        datasets = []
                        for ds_el in _children(ln_el, "DataSet"):
                            dspath = f"{npath}/DataSet"
                            members = []
                            for f_el in _children(ds_el, "FCDA"):
                                members.append(SclFcda(
                                    ld_inst=_attr(f_el, "ldInst", f"{dspath}/FCDA"),
                                    ln_class=_attr(f_el, "lnClass", f"{dspath}/FCDA"),
                                    ln_inst=f_el.get("lnInst", ""),
                                    do_name=_attr(f_el, "doName", f"{dspath}/FCDA"),
                                    da_name=_attr(f_el, "daName", f"{dspath}/FCDA"),
                                    prefix=f_el.get("prefix", ""),
                                ))
                            datasets.append(SclDataSet(_attr(ds_el, "name", dspath), tuple(members)))
                        gses = []
                        for g_el in _children(ln_el, "GSEControl"):
                            gpath = f"{npath}/GSEControl"
                            raw = _attr(g_el, "appID", gpath)
                            try:
                                app_id = int(raw, 0)
                            except ValueError:
                                raise SclParseError(f"{gpath}: appID {raw!r} is not a number") from None
                            gses.append(SclGseControl(
                                _attr(g_el, "name", gpath), app_id, _attr(g_el, "datSet", gpath)
                            ))
                        lns.append(SclLn(ln_class, inst, prefix, tuple(dois),
                                         tuple(datasets), tuple(gses)))
                    lds.append(SclLDevice(_attr(ld_el, "inst", lpath), tuple(lns)))
            aps.append(SclAccessPoint(_attr(ap_el, "name", apath), tuple(lds)))
        ieds.append(SclIed(_attr(ied_el, "name", ipath), tuple(aps)))

    names = [i.name for i in ieds]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise SclParseError(f"duplicate IED name(s) {sorted(dupes)}")
    if not ieds:
        warnings.append("SCL: no IED declared")
    return SclDocument(header_id, header_version, tuple(ieds), tuple(warnings))


def serialize_scl(doc: SclDocument) -> str:
    """Emit the recognized subset back as XML (round-trips through parse)."""
    root = ET.Element("SCL")
    ET.SubElement(root, "Header", id=doc.header_id, version=doc.header_version)
    for ied in doc.ieds:
        ied_el = ET.SubElement(root, "IED", name=ied.name)
        for ap in ied.access_points:
            ap_el = ET.SubElement(ied_el, "AccessPoint", name=ap.name)
            server_el = ET.SubElement(ap_el, "Server")
            for ld in ap.ldevices:
                ld_el = ET.SubElement(server_el, "LDevice", inst=ld.inst)
                for ln in ld.lns:
                    tag = "LN0" if ln.ln_class == "LLN0" else "LN"
                    ln_el = ET.SubElement(ld_el, tag, lnClass=ln.ln_class, inst=ln.inst)
                    if ln.prefix:
                        ln_el.set("prefix", ln.prefix)
                    for doi in ln.dois:
                        doi_el = ET.SubElement(ln_el, "DOI", name=doi.name)
                        for dai in doi.dais:
                            dai_el = ET.SubElement(doi_el, "DAI", name=dai.name)
                            if dai.value is not None:
                                ET.SubElement(dai_el, "Val").text = dai.value
                    for ds in ln.datasets:
                        ds_el = ET.SubElement(ln_el, "DataSet", name=ds.name)
                        for m in ds.members:
                            f_el = ET.SubElement(
                                ds_el, "FCDA",
                                ldInst=m.ld_inst, lnClass=m.ln_class, lnInst=m.ln_inst,
                                doName=m.do_name, daName=m.da_name,
                            )
                            if m.prefix:
                                f_el.set("prefix", m.prefix)
                    for g in ln.gse_controls:
                        ET.SubElement(ln_el, "GSEControl", name=g.name,
                                      appID=f"0x{g.app_id:04x}", datSet=g.dat_set)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


# ---------------------------------------------------------------------------
# instantiation


@dataclass
class InstantiatedIed:
    name: str
    model: ModelStore
    datasets: dict[str, DataSetDef]
    gcbs: dict[str, GooseControlBlock]


def _parse_dai_value(target: DataValue, raw: str, where: str) -> DataValue:
    kind = target.kind
    try:
        if kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError(f"bool value must be 'true' or 'false', got {raw!r}")
            return boolean(raw == "true")
        if kind == "enum":
            return enum(target.enum_type, raw)
        if kind == "float64":
            return float64(float(raw))
        raise ValueError(f"no DAI parsing for value kind {kind!r}")
    except ValueError as e:
        raise SclError(f"{where}: {e}") from None


def instantiate_from_scl(doc: SclDocument) -> dict[str, InstantiatedIed]:
    """Build per-IED models, datasets and control blocks from a parsed document."""
    out: dict[str, InstantiatedIed] = {}
    seen_app_ids: dict[int, str] = {}
    for ied in doc.ieds:
        model = ModelStore()
        datasets: dict[str, DataSetDef] = {}
        gcbs: dict[str, GooseControlBlock] = {}
        for ld_doc in ied.ldevices():
            ld = LogicalDevice(ld_doc.inst)
            model.add_ld(ld)
            for ln_doc in ld_doc.lns:
                if ln_doc.ln_class == "LLN0":
                    ln = ld.logical_nodes["LLN0"]
                else:
                    try:
                        ln = ld.add_ln(build_ln(
                            ln_doc.ln_class,
                            int(ln_doc.inst) if ln_doc.inst else 1,
                            ln_doc.prefix or None,
                        ))
                    except ModelError as e:
                        raise SclError(f"{ied.name}/{ld_doc.inst}: {e}") from None
                for doi in ln_doc.dois:
                    do = ln.data_objects.get(doi.name)
                    if do is None:
                        raise SclError(
                            f"{ied.name}/{ld_doc.inst}/{ln.name}: DOI {doi.name!r} is not a "
                            f"data object of class {ln_doc.ln_class}"
                        )
                    for dai in doi.dais:
                        if dai.name != do.value_attr:
                            raise SclError(
                                f"{ied.name}/{ld_doc.inst}/{ln.name}.{doi.name}: "
                                f"DAI {dai.name!r} is not the value attribute {do.value_attr!r}"
                            )
                        if dai.value is not None:
                            do.value = _parse_dai_value(
                                do.value, dai.value,
                                f"{ied.name}/{ld_doc.inst}/{ln.name}.{doi.name}.{dai.name}",
                            )
                for ds in ln_doc.datasets:
                    if ds.name in datasets:
                        raise SclError(f"{ied.name}: duplicate dataset name {ds.name!r}")
                    datasets[ds.name] = DataSetDef(
                        ds.name, tuple(m.to_reference().render() for m in ds.members)
                    )
                for g in ln_doc.gse_controls:
                    if g.app_id in seen_app_ids:
                        raise SclError(
                            f"{ied.name}: appID 0x{g.app_id:04x} already used by "
                            f"{seen_app_ids[g.app_id]}"
                        )
                    if g.dat_set not in {d.name for lnn in ld_doc.lns for d in lnn.datasets}:
                        raise SclError(f"{ied.name}/{g.name}: unknown dataset {g.dat_set!r}")
                    seen_app_ids[g.app_id] = f"{ied.name}/{g.name}"
                    gcbs[g.name] = GooseControlBlock(g.name, g.app_id, g.dat_set)
        out[ied.name] = InstantiatedIed(ied.name, model, datasets, gcbs)
    return out


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    severity: str  # error | warning
    kind: str  # missing_device | missing_in_model | undeclared_in_scl | unresolvable_member
    path: str
    message: str

    def to_json(self) -> dict:
        return {"severity": self.severity, "kind": self.kind,
                "path": self.path, "message": self.message}


def validate_against_model(doc: SclDocument, system) -> list[Finding]:
    """Cross-check a configuration against a loaded system.

    Per IED: nodes declared here but missing as resources on the matching
    device, resources that look like nodes but are undeclared, and dataset
    members that do not resolve on the instantiated model.  Devices with no
    matching IED entry (pure simulation equipment) are out of scope.
    An empty list means consistent.
    """
    findings: list[Finding] = []
    try:
        instantiated = instantiate_from_scl(doc)
    except SclError as e:
        return [Finding("error", "unresolvable_member", "SCL", str(e))]

    for ied in doc.ieds:
        device = system.devices.get(ied.name) if system is not None else None
        if device is None:
            findings.append(Finding(
                "error", "missing_device", f"SCL/IED[{ied.name}]",
                f"no device named {ied.name!r} in the system",
            ))
            continue
        declared = {ln.rendered_name() for ld in ied.ldevices() for ln in ld.lns}
        present = set()
        for rname in device.resources:
            try:
                parse_ln_name(rname)
            except ModelError:
                continue
            present.add(rname)
        for name in sorted(declared - present):
            findings.append(Finding(
                "error", "missing_in_model", f"SCL/IED[{ied.name}]/{name}",
                f"logical node {name} declared in SCL but absent as a resource on {ied.name}",
            ))
        for name in sorted(present - declared):
            findings.append(Finding(
                "error", "undeclared_in_scl", f"{ied.name}/{name}",
                f"resource {name} hosts a logical node not declared in the SCL",
            ))
        model = instantiated[ied.name].model
        for ld in ied.ldevices():
            for ln in ld.lns:
                for ds in ln.datasets:
                    for m in ds.members:
                        ref = m.to_reference()
                        try:
                            model.resolve(ref)
                        except ModelError as e:
                            findings.append(Finding(
                                "error", "unresolvable_member",
                                f"SCL/IED[{ied.name}]/DataSet[{ds.name}]",
                                f"member {ref.render()} does not resolve: {e}",
                            ))
    return findings


def findings_to_jsonl(findings: list[Finding]) -> str:
    import json

    return "\n".join(json.dumps(f.to_json(), separators=(", ", ": ")) for f in findings)
