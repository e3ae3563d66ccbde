import math
import re
from collections import Counter
from decimal import Decimal
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from psoc.backends.nastran import (
    Card,
    Deck,
    MalformedCard,
    NastranError,
    UnsupportedPhysics,
    emit_deck,
    format_field,
    format_real,
    parse_deck,
    parse_field,
)
from psoc.core import QuantityValue
from psoc.dsl import FACE_NAMES, MeshDirective
from psoc.meshgen import box_hex_mesh, mesh_for
from psoc.plan import Binding, IllPosed, PhysicsKind as K, ProblemSpec, derive_problem

GOLDEN = Path(__file__).parent / "golden"


def read_real(text: str) -> float:
    """Independent reader for small-field reals, including ``1.5+3`` and ``-2.-4``."""
    text = text.strip()
    m = re.fullmatch(r"([+-]?[0-9.]+)(?:[eE]?([+-][0-9]+))?", text)
    assert m and "." in m.group(1), text
    return float(Decimal(m.group(1)).scaleb(int(m.group(2) or 0)))


def best_error(x: float) -> float:
    """Smallest relative error of any 8-character decimal rendering of ``x``."""
    best = math.inf
    for p in range(1, 9):
        mant, exp = f"{x:.{p - 1}e}".split("e")
        e = int(exp)
        if "." not in mant:
            mant += "."
        forms = [f"{mant}{'+' if e >= 0 else '-'}{abs(e)}"]
        plain = format(Decimal(f"{mant}e{e}"), "f")
        if "." not in plain:
            plain += "."
        forms += [plain, plain.replace("0.", ".", 1) if plain.lstrip("-").startswith("0.") else plain]
        for s in forms:
            if len(s) <= 8:
                best = min(best, abs(read_real(s) - x) / abs(x))
    return best


@pytest.mark.parametrize("value, text", [
    (7200.0, "7200.0  "),
    (-1.0, "-1.0    "),
    (123456789.0, "1.2346+8"),
    (1e-9, "1.0-9   "),
    (0.0, "0.0     "),
    (0.06, "0.06    "),
    (110000000000.0, "1.1+11  "),
])
def test_format_examples(value, text):
    assert format_field(value) == text


def test_format_other_field_kinds():
    assert format_field(123) == "123     "
    assert format_field(None) == " " * 8
    assert format_field("TRAN") == "TRAN    "
    with pytest.raises(NastranError):
        format_field("LONGERTHAN8")
    with pytest.raises(NastranError):
        format_real(math.inf)


@pytest.mark.parametrize("text, value", [("1.2346+8", 1.2346e8), ("-5.0-3", -5e-3), (".5", 0.5), ("2.E4", 2e4), ("12", 12)])
def test_parse_field(text, value):
    assert parse_field(text) == pytest.approx(value, rel=1e-15)


positive = st.floats(1e-9, 1e9)
signed = st.builds(lambda x, neg: -x if neg else x, positive, st.booleans())


@settings(max_examples=500, deadline=None)
@given(positive)
def test_positive_round_trip_within_1e4(x):
    text = format_field(x)
    assert len(text) == 8
    assert abs(read_real(text) - x) <= 1e-4 * x


@settings(max_examples=500, deadline=None)
@given(signed)
def test_formatter_is_optimal(x):
    # no 8-character rendering is closer than the one chosen
    text = format_field(x)
    err = abs(read_real(text) - x) / abs(x)
    assert err <= best_error(x) * (1 + 1e-9) + 1e-16


@settings(max_examples=300, deadline=None)
@given(signed)
def test_negative_values_keep_four_digits(x):
    # a sign costs one of the eight columns, so exponent forms hold four digits
    text = format_field(x)
    assert abs(read_real(text) - x) <= 5e-4 * abs(x)


def _spec(kind, directive, **kw):
    return ProblemSpec("b", kind, "o", mesh_directive=directive, surface_parents={s: () for s in directive.surfaces()}, **kw)


def _q(x, unit=""):
    return Binding(f"p{x}", QuantityValue(x, unit))


def _structural(directive, fixed="a", loaded="b"):
    return _spec(
        K.STRUCTURAL, directive,
        dirichlet=(Binding("d", QuantityValue(0.0), fixed),),
        neumann=(Binding("t", QuantityValue(5000.0), loaded),),
        volumetric=(Binding("g", QuantityValue(-70632.0)),),
        materials={"ElasticModulus": _q(1.1e11), "ShearModulus": _q(4.4e10)},
    )


def test_one_hex_structural_card_set():
    d = MeshDirective("m", "o", (1.0, 1.0, 1.0), (1, 1, 1), {"x_min": "a", "x_max": "b"})
    deck = emit_deck(_structural(d), mesh_for(d))
    counts = Counter(deck.card_names())
    assert counts["GRID"] == 8 and counts["CHEXA"] == 1
    assert set(counts) == {"GRID", "CHEXA", "PSOLID", "MAT1", "SPC", "PLOAD", "GRAV"}
    assert deck.executive == ["SOL 101"]
    assert "SPC = 1" in deck.case_control and "LOAD = 2" in deck.case_control


def test_structural_fields_against_geometry():
    d = MeshDirective("m", "o", (0.5, 0.1, 0.1), (3, 2, 2), {"x_min": "a", "x_max": "b"})
    mesh = mesh_for(d)
    deck = parse_deck(emit_deck(_structural(d), mesh).render())
    cards = {n: [c for c in deck.cards if c.name == n] for n in set(deck.card_names())}
    fixed = {i + 1 for i, v in enumerate(mesh.vertices) if v[0] == 0.0}
    spc = [c.all_fields() for c in cards["SPC"]]
    got = {f[i] for f in spc for i in range(1, len(f), 3)}
    assert got == fixed
    assert all(f[i + 1] == 123 and f[i + 2] == 0.0 for f in spc for i in range(1, len(f), 3))
    assert len(cards["PLOAD"]) == 2 * 2
    for c in cards["PLOAD"]:
        sid, p, *grids = c.fields
        assert (sid, p) == (2, 5000.0)
        assert all(mesh.vertices[g - 1][0] == 0.5 for g in grids)
    assert cards["MAT1"][0].fields[1:3] == [1.1e11, 4.4e10]
    assert cards["GRAV"][0].fields == [2, 0, -70632.0, 0.0, 0.0, 1.0]
    assert len(cards["GRID"]) == len(mesh.vertices)
    assert len(cards["CHEXA"]) == len(mesh.hexes)
    chexa = cards["CHEXA"][0].all_fields()
    assert chexa[2:] == [n + 1 for n in mesh.hexes[0]]


def _thermal(directive):
    return _spec(
        K.THERMAL, directive,
        dirichlet=(Binding("u", QuantityValue(25.0), "a"),),
        neumann=(Binding("g", QuantityValue(1500.0), "b"),),
        volumetric=(Binding("f", QuantityValue(100.0)),),
        initial=(Binding("u0", QuantityValue(20.0)),),
        materials={"Density": _q(7200.0), "SpecificHeatCapacity": _q(460.0), "ThermalConductivity": _q(52.0)},
        temporal_extent=QuantityValue(3600.0, "s"), temporal_region="T", timestep_count=50,
    )


def test_thermal_cards():
    d = MeshDirective("m", "o", (1.0, 1.0, 1.0), (2, 2, 2), {"z_min": "a", "z_max": "b"})
    mesh = mesh_for(d)
    deck = parse_deck(emit_deck(_thermal(d), mesh).render())
    names = set(deck.card_names())
    assert names == {"GRID", "CHEXA", "PSOLID", "MAT4", "TEMPBC", "QHBDY", "QVOL", "TEMPD", "TSTEP"}
    by = {n: [c for c in deck.cards if c.name == n] for n in names}
    assert by["MAT4"][0].fields == [1, 52.0, 460.0, 7200.0]
    temps = [f for c in by["TEMPBC"] for f in c.fields[2:]]
    nodes = set(temps[1::2])
    assert nodes == {i + 1 for i, v in enumerate(mesh.vertices) if v[2] == 0.0}
    assert set(temps[0::2]) == {25.0}
    assert len(by["QHBDY"]) == 4 and all(c.fields[:3] == [2, "AREA4", 1500.0] for c in by["QHBDY"])
    qvol = sorted(f for c in by["QVOL"] for f in c.fields[3:])
    assert qvol == list(range(1, 9))
    assert by["TEMPD"][0].fields == [3, 20.0]
    assert by["TSTEP"][0].fields == [4, 50, 72.0, 1]
    assert deck.executive == ["SOL 159"]
    assert "TEMP(INIT) = 3" in deck.case_control


def test_fluid_is_unsupported():
    d = MeshDirective("m", "o", (1.0, 1.0, 1.0), (1, 1, 1), {"x_min": "a"})
    with pytest.raises(UnsupportedPhysics, match="unsupported physics"):
        emit_deck(_spec(K.FLUID, d), mesh_for(d))


def test_ill_posed_spec_is_refused():
    d = MeshDirective("m", "o", (1.0, 1.0, 1.0), (1, 1, 1), {"x_min": "a", "x_max": "b"})
    spec = _structural(d)
    bare = ProblemSpec(spec.behavior, spec.kind, spec.domain, neumann=spec.neumann, materials=spec.materials,
                       mesh_directive=d, surface_parents=spec.surface_parents)
    with pytest.raises(IllPosed):
        emit_deck(bare, mesh_for(d))


@pytest.mark.parametrize("behavior", ["structural_behavior", "thermal_behavior"])
def test_case_study_decks_golden(model, behavior):
    sim = next(s for s in model.sims if s.behavior == behavior and s.target == "nastran")
    spec = derive_problem(model.graph, behavior, sim, model.meshes)
    text = emit_deck(spec, mesh_for(spec.mesh_directive)).render()
    assert text == (GOLDEN / f"{behavior}.bdf").read_text()
    assert max(len(line) for line in text.splitlines()) <= 80


def test_parse_reports_line_numbers():
    good = Deck(["SOL 101"], [], [Card("GRID", [1, None, 0.0, 0.0, 0.0])]).render()
    lines = good.splitlines()
    bad = "\n".join(lines[:3] + ["GRID    1       @@@@"] + lines[3:])
    with pytest.raises(MalformedCard) as info:
        parse_deck(bad)
    assert info.value.line == 4
    with pytest.raises(MalformedCard, match="ENDDATA"):
        parse_deck(good.replace("ENDDATA", ""))
    with pytest.raises(MalformedCard, match="bad card name"):
        parse_deck(good.replace("GRID    1", "grid?   1"))


@st.composite
def random_problems(draw):
    ext = tuple(draw(st.floats(1e-3, 1e3)) for _ in range(3))
    div = tuple(draw(st.integers(1, 3)) for _ in range(3))
    faces = draw(st.lists(st.sampled_from(FACE_NAMES), min_size=2, max_size=2, unique=True))
    d = MeshDirective("m", "o", ext, div, {faces[0]: "a", faces[1]: "b"})
    vals = [draw(st.floats(1e-9, 1e9)) * draw(st.sampled_from([1, -1])) for _ in range(8)]
    if draw(st.booleans()):
        spec = _spec(
            K.STRUCTURAL, d,
            dirichlet=(Binding("d", QuantityValue(vals[0]), "a"),),
            neumann=(Binding("t", QuantityValue(vals[1]), "b"),),
            volumetric=(Binding("g", QuantityValue(vals[2])),),
            materials={"ElasticModulus": _q(abs(vals[3])), "ShearModulus": _q(abs(vals[4]))},
        )
    else:
        spec = _spec(
            K.THERMAL, d,
            dirichlet=(Binding("u", QuantityValue(vals[0]), "a"),),
            neumann=(Binding("g", QuantityValue(vals[1]), "b"),),
            volumetric=(Binding("f", QuantityValue(vals[2])),),
            initial=(Binding("u0", QuantityValue(vals[3])),),
            materials={"Density": _q(abs(vals[4])), "SpecificHeatCapacity": _q(abs(vals[5])),
                       "ThermalConductivity": _q(abs(vals[6]))},
            # keep dt = T / N inside the tested magnitude range
            temporal_extent=QuantityValue(draw(st.floats(1e-6, 1e9))), temporal_region="T",
            timestep_count=draw(st.integers(1, 500)),
        )
    return spec, box_hex_mesh(ext, div)


@settings(max_examples=60, deadline=None)
@given(random_problems())
def test_deck_round_trip(problem):
    spec, mesh = problem
    deck = emit_deck(spec, mesh)
    text = deck.render()
    back = parse_deck(text)
    assert Counter(back.card_names()) == Counter(deck.card_names())
    assert back.executive == deck.executive and back.case_control == deck.case_control
    for a, b in zip(deck.cards, back.cards):
        fa, fb = a.all_fields(), b.all_fields()
        assert len(fa) == len(fb)
        for x, y in zip(fa, fb):
            if isinstance(x, float):
                bound = 1e-4 if x > 0 else 5e-4
                assert abs(x - y) <= bound * abs(x)
            else:
                assert x == y
    assert all(len(line) <= 80 for line in text.splitlines())
