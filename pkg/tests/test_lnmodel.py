import pytest
from hypothesis import given, strategies as st

from fb61850.lnmodel import (
    LNName,
    LogicalDevice,
    ModelError,
    ModelStore,
    TypeMismatchError,
    UnresolvedReferenceError,
    build_ln,
    parse_ln_name,
    parse_reference,
)
from fb61850.values import boolean, enum, float64, text


def _scenario_ish_model() -> ModelStore:
    model = ModelStore()
    ld = LogicalDevice("BRKLD0")
    ld.add_ln(build_ln("XCBR", 1))
    model.add_ld(ld)
    return model


def test_build_ln_xcbr_has_pos_dpc():
    ln = build_ln("XCBR", 1)
    assert ln.name.render() == "XCBR1"
    assert ln.host_resource == "XCBR1"
    pos = ln.do("Pos")
    assert pos.cdc == "DPC"
    assert pos.value == enum("dpc", "off")
    assert (pos.q.validity, pos.t) == ("good", 0)


def test_build_ln_applies_prefix():
    assert build_ln("PTOC", 2, prefix="F").name.render() == "FPTOC2"


def test_build_ln_rejects_unsupported_class():
    with pytest.raises(ModelError, match="unsupported"):
        build_ln("QQQQ", 1)


def test_lln0_is_special_cased():
    name = parse_ln_name("LLN0")
    assert name.ln_class == "LLN0"
    assert name.render() == "LLN0"
    with pytest.raises(ModelError):
        LNName("LLN0", prefix="A")


_prefix = st.one_of(
    st.none(),
    st.from_regex(r"[A-Za-z][A-Za-z0-9]{0,5}", fullmatch=True),
)


@given(
    ln_class=st.sampled_from(["XCBR", "PTOC", "PTRC", "RREC", "TCTR"]),
    instance=st.integers(min_value=1, max_value=999),
    prefix=_prefix,
)
def test_name_render_parse_round_trip(ln_class, instance, prefix):
    name = LNName(ln_class, instance, prefix)
    assert parse_ln_name(name.render()) == name


def test_default_initialization_resolves_off():
    model = _scenario_ish_model()
    value, q, t = model.resolve("BRKLD0/XCBR1.Pos.stVal")
    assert value == enum("dpc", "off")
    assert q.validity == "good" and t == 0


@pytest.mark.parametrize(
    "ref, level",
    [
        ("NOLD0/XCBR1.Pos.stVal", "ld"),
        ("BRKLD0/XCBR9.Pos.stVal", "ln"),
        ("BRKLD0/XCBR1.Nope.stVal", "do"),
        ("BRKLD0/XCBR1.Pos.mag", "attr"),
    ],
)
def test_unresolved_segments_name_the_level(ref, level):
    model = _scenario_ish_model()
    with pytest.raises(UnresolvedReferenceError) as exc:
        model.resolve(ref)
    assert exc.value.level == level


def test_malformed_reference_rejected():
    with pytest.raises(ModelError, match="malformed"):
        parse_reference("justtext")


def test_update_emits_change_record_and_stamps_time():
    model = _scenario_ish_model()
    rec = model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "on"), at=5)
    assert rec is not None
    assert (rec.old.value, rec.new.value, rec.t) == ("off", "on", 5)
    value, _, t = model.resolve("BRKLD0/XCBR1.Pos.stVal")
    assert value.value == "on" and t == 5


def test_idempotent_write_emits_nothing():
    model = _scenario_ish_model()
    model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "on"), at=5)
    assert model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "on"), at=9) is None
    assert model.resolve("BRKLD0/XCBR1.Pos.stVal")[2] == 5  # untouched


def test_type_mismatch_rejected():
    model = _scenario_ish_model()
    with pytest.raises(TypeMismatchError):
        model.update_attribute("BRKLD0/XCBR1.Pos.stVal", float64(1.0), at=1)


def test_listeners_see_records_in_order():
    model = _scenario_ish_model()
    seen = []
    model.add_listener(lambda rec: seen.append(rec.seq))
    model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "on"), at=1)
    model.update_attribute("BRKLD0/XCBR1.Pos.stVal", enum("dpc", "off"), at=2)
    assert seen == [1, 2]


def _fresh_rrec_model() -> ModelStore:
    model = ModelStore()
    ld = LogicalDevice("RECLD0")
    ld.add_ln(build_ln("RREC", 1))
    model.add_ld(ld)
    return model


@given(
    writes=st.lists(
        st.tuples(
            st.sampled_from(["RECLD0/RREC1.Op.general", "RECLD0/RREC1.BlkRec.stVal"]),
            st.booleans(),
        ),
        max_size=30,
    )
)
def test_replaying_change_records_reproduces_final_state(writes):
    model = _fresh_rrec_model()
    for i, (ref, flag) in enumerate(writes):
        model.update_attribute(ref, boolean(flag), at=i + 1)
    records = model.drain_pending()

    replayed = _fresh_rrec_model()
    for rec in records:
        replayed.apply_record(rec)
    for ref in model.walk_references():
        assert replayed.resolve(ref) == model.resolve(ref)


def test_timestamps_never_decrease_per_attribute():
    model = _fresh_rrec_model()
    ref = "RECLD0/RREC1.Op.general"
    stamps = []
    for i, flag in enumerate([True, False, True, False]):
        model.update_attribute(ref, boolean(flag), at=10 * (i + 1))
        stamps.append(model.resolve(ref)[2])
    assert stamps == sorted(stamps)


def test_reference_totality_round_trip():
    model = ModelStore()
    ld = LogicalDevice("PROTLD0")
    ld.add_ln(build_ln("PTOC", 1))
    ld.add_ln(build_ln("PTRC", 1))
    model.add_ld(ld)
    walked = model.walk_references()
    # every walked reference resolves via its rendered string
    for ref in walked:
        model.resolve(ref.render())
    # and every data object shows up in the walk exactly once
    rendered = [r.render() for r in walked]
    assert sorted(rendered) == sorted(set(rendered))
    assert "PROTLD0/PTOC1.Str.general" in rendered
    assert "PROTLD0/PTRC1.Tr.general" in rendered


def test_duplicate_ln_and_ld_rejected():
    ld = LogicalDevice("X")
    ld.add_ln(build_ln("XCBR", 1))
    with pytest.raises(ModelError, match="duplicate logical node"):
        ld.add_ln(build_ln("XCBR", 1))
    model = ModelStore([ld])
    with pytest.raises(ModelError, match="duplicate logical device"):
        model.add_ld(LogicalDevice("X"))
