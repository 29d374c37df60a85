"""Configuration pipeline: parse an SCL file, cross-check it against the
running system's shape, and instantiate the node models it declares."""

from fb61850 import instantiate_from_scl, load_system, parse_scl, validate_against_model
from fb61850.powersim import scenario_scl_path, scenario_system_path

text = scenario_scl_path().read_text()
doc = parse_scl(text)
print(f"parsed header id={doc.header_id!r}, {len(doc.ieds)} IEDs:")
for ied in doc.ieds:
    for ld in ied.ldevices():
        lns = ", ".join(ln.rendered_name() for ln in ld.lns)
        print(f"  {ied.name:<9} {ld.inst:<8} [{lns}]")

system = load_system(scenario_system_path())
findings = validate_against_model(doc, system)
print("\nvalidation against the scenario system:", "consistent" if not findings else findings)

broken = text.replace('doName="Pos"', 'doName="Poz"')
findings = validate_against_model(parse_scl(broken), system)
print("after a dataset-member typo:")
for f in findings:
    print(f"  [{f.severity}] {f.kind}: {f.message}")

instantiated = instantiate_from_scl(doc)
brk = instantiated["BRK_IED"]
value, q, t = brk.model.resolve("BRKLD0/XCBR1.Pos.stVal")
print(f"\ninstantiated BRK_IED: Pos.stVal starts {value.value!r} (DAI initial value)")
print("control blocks:", {name: hex(g.app_id) for name, g in brk.gcbs.items()})
