"""NASTRAN small-field bulk data: card formatting, deck emission, re-parsing.

Only the cards needed for static structural (SOL 101) and transient
thermal (SOL 159) decks are produced. Each physical line is at most 80
columns: an 8-column name field followed by up to eight 8-column data
fields; continuation lines start with ``+`` in the name field.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from ..meshgen import MeshData, tagged_surfaces
from ..plan import IllPosed, PhysicsKind, ProblemSpec, well_posedness

FieldValue = Union[int, float, str, None]

FIELD_WIDTH = 8
FIELDS_PER_LINE = 8

SPC_SET, LOAD_SET, IC_SET, TSTEP_SET = 1, 2, 3, 4
MATERIAL_ID, PROPERTY_ID = 1, 1


class NastranError(Exception):
    pass


class UnsupportedPhysics(NastranError):
    pass


class MalformedCard(NastranError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _parse_real(text: str) -> float:
    """Read a NASTRAN real, including the implicit-exponent form ``1.2+5``."""
    m = re.fullmatch(r"([+-]?(?:\d+\.\d*|\.\d+|\d+))(?:[eEdD]?([+-]\d+)|[eEdD](\d+))?", text)
    if m is None or "." not in m.group(1):
        raise ValueError(f"not a NASTRAN real: {text!r}")
    exp = m.group(2) or m.group(3) or "0"
    return float(f"{m.group(1)}e{exp}")


def _candidates(value: float) -> list[str]:
    out = []
    for decimals in range(FIELD_WIDTH):
        s = f"{value:.{decimals}f}"
        if decimals == 0:
            s += "."
        if s.startswith("0."):
            s = s[1:]
        elif s.startswith("-0."):
            s = "-" + s[2:]
        if len(s) <= FIELD_WIDTH and any(ch.isdigit() for ch in s):
            out.append(s)
    for decimals in range(1, FIELD_WIDTH):
        mantissa, exp = f"{value:.{decimals}e}".split("e")
        s = f"{mantissa}{'+' if int(exp) >= 0 else '-'}{abs(int(exp))}"
        if len(s) <= FIELD_WIDTH:
            out.append(s)
    return out


def format_real(value: float) -> str:
    """Most precise rendering of ``value`` in at most eight characters (unpadded)."""
    value = float(value)
    if not math.isfinite(value):
        raise NastranError(f"cannot format non-finite value {value!r}")
    if value == 0.0:
        return "0.0"
    plain = repr(value)
    if "e" not in plain and len(plain) <= FIELD_WIDTH:
        return plain
    best, best_err = None, math.inf
    for s in _candidates(value):
        err = abs(_parse_real(s) - value) / abs(value)
        if err < best_err or (err == best_err and len(s) < len(best)):
            best, best_err = s, err
    if best is None:
        raise NastranError(f"{value!r} does not fit a small-field real")
    return best


def format_field(value: FieldValue) -> str:
    """Left-justified 8-character field text."""
    if value is None:
        text = ""
    elif isinstance(value, bool):
        raise NastranError("booleans are not card fields")
    elif isinstance(value, int):
        text = str(value)
    elif isinstance(value, float):
        text = format_real(value)
    else:
        text = str(value)
    if len(text) > FIELD_WIDTH:
        raise NastranError(f"field {text!r} exceeds {FIELD_WIDTH} characters")
    return text.ljust(FIELD_WIDTH)


def parse_field(text: str) -> FieldValue:
    text = text.strip()
    if not text:
        return None
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    try:
        return _parse_real(text)
    except ValueError:
        pass
    if re.fullmatch(r"[A-Za-z][A-Za-z0-9_()]*", text):
        return text
    raise ValueError(f"unreadable field {text!r}")


@dataclass
class Card:
    name: str
    fields: list[FieldValue] = field(default_factory=list)
    continuations: list[list[FieldValue]] = field(default_factory=list)

    def __post_init__(self):
        if not re.fullmatch(r"[A-Z][A-Z0-9]{0,7}", self.name):
            raise NastranError(f"bad card name {self.name!r}")
        if len(self.fields) > FIELDS_PER_LINE or any(len(c) > FIELDS_PER_LINE for c in self.continuations):
            raise NastranError(f"{self.name}: more than {FIELDS_PER_LINE} fields on one line")

    def all_fields(self) -> list[FieldValue]:
        out = list(self.fields)
        for c in self.continuations:
            out += c
        return out

    def render(self) -> list[str]:
        lines = [self.name.ljust(FIELD_WIDTH) + "".join(format_field(f) for f in self.fields)]
        lines += ["+".ljust(FIELD_WIDTH) + "".join(format_field(f) for f in c) for c in self.continuations]
        return [line.rstrip() for line in lines]


@dataclass
class Deck:
    executive: list[str] = field(default_factory=list)
    case_control: list[str] = field(default_factory=list)
    cards: list[Card] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)

    def card_names(self) -> list[str]:
        return [c.name for c in self.cards]

    def render(self) -> str:
        lines = [f"$ {c}" if c else "$" for c in self.comments]
        lines += self.executive + ["CEND"] + self.case_control + ["BEGIN BULK"]
        for card in self.cards:
            lines += card.render()
        lines.append("ENDDATA")
        for line in lines:
            if len(line) > 80:
                raise NastranError(f"line exceeds 80 columns: {line!r}")
        return "\n".join(lines) + "\n"


def parse_deck(text: str) -> Deck:
    deck = Deck()
    section = "executive"
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.startswith("$"):
            deck.comments.append(line[1:].strip())
            continue
        if not line.strip():
            continue
        if section == "done":
            raise MalformedCard("content after ENDDATA", lineno)
        if section == "executive":
            if line.strip().upper() == "CEND":
                section = "case"
            else:
                deck.executive.append(line.strip())
            continue
        if section == "case":
            if line.strip().upper() == "BEGIN BULK":
                section = "bulk"
            else:
                deck.case_control.append(line.strip())
            continue
        if line.strip() == "ENDDATA":
            section = "done"
            continue
        if len(line) > 80:
            raise MalformedCard("line exceeds 80 columns", lineno)
        name = line[:FIELD_WIDTH].strip()
        body = line[FIELD_WIDTH:FIELD_WIDTH * (FIELDS_PER_LINE + 1)]
        chunks = [body[i:i + FIELD_WIDTH] for i in range(0, len(body), FIELD_WIDTH)]
        try:
            values = [parse_field(c) for c in chunks]
        except ValueError as exc:
            raise MalformedCard(str(exc), lineno) from None
        while values and values[-1] is None:
            values.pop()
        if name == "+" or name == "":
            if not deck.cards:
                raise MalformedCard("continuation without a parent card", lineno)
            deck.cards[-1].continuations.append(values)
            continue
        if not re.fullmatch(r"[A-Z][A-Z0-9]{0,7}", name):
            raise MalformedCard(f"bad card name {name!r}", lineno)
        deck.cards.append(Card(name, values))
    if section != "done":
        raise MalformedCard(
            "missing " + {"executive": "CEND", "case": "BEGIN BULK", "bulk": "ENDDATA"}[section],
            lineno,
        )
    return deck


def _chunks(items: list, n: int) -> list[list]:
    return [items[i:i + n] for i in range(0, len(items), n)]


def _nodes_of(mesh: MeshData, spec: ProblemSpec, surface: str) -> list[int]:
    directive = spec.mesh_directive
    nodes: set[int] = set()
    for s in tagged_surfaces(surface, spec.surface_descendants(surface), directive):
        for face, tag in directive.face_tags.items():
            if tag == s:
                for quad in mesh.boundary_faces[face]:
                    nodes.update(quad)
    return sorted(n + 1 for n in nodes)


def _quads_of(mesh: MeshData, spec: ProblemSpec, surface: str) -> list[tuple[int, ...]]:
    directive = spec.mesh_directive
    quads = []
    for s in tagged_surfaces(surface, spec.surface_descendants(surface), directive):
        for face in sorted(f for f, tag in directive.face_tags.items() if tag == s):
            quads += [tuple(n + 1 for n in q) for q in mesh.boundary_faces[face]]
    return quads


def _geometry(mesh: MeshData) -> list[Card]:
    cards = [Card("GRID", [i, None, x, y, z]) for i, (x, y, z) in enumerate(mesh.vertices, start=1)]
    for eid, h in enumerate(mesh.hexes, start=1):
        g = [n + 1 for n in h]
        cards.append(Card("CHEXA", [eid, PROPERTY_ID, *g[:6]], [g[6:]]))
    cards.append(Card("PSOLID", [PROPERTY_ID, MATERIAL_ID]))
    return cards


def _structural(spec: ProblemSpec, mesh: MeshData) -> Deck:
    mats = spec.materials
    deck = Deck(
        executive=["SOL 101"],
        case_control=[
            f"TITLE = {spec.behavior}",
            f"SPC = {SPC_SET}",
            f"LOAD = {LOAD_SET}",
            "DISPLACEMENT = ALL",
            "STRESS = ALL",
        ],
        comments=[
            f"linear static analysis of {spec.behavior} (domain {spec.domain})",
            "MAT1 RHO is 1.0 so that GRAV A carries the body force per unit volume",
        ],
    )
    deck.cards += _geometry(mesh)
    deck.cards.append(Card("MAT1", [
        MATERIAL_ID,
        mats["ElasticModulus"].value.magnitude,
        mats["ShearModulus"].value.magnitude,
        None,
        1.0,
    ]))
    for b in spec.dirichlet:
        triples = [(g, 123, b.value.magnitude) for g in _nodes_of(mesh, spec, b.surface)]
        for pair in _chunks(triples, 2):
            deck.cards.append(Card("SPC", [SPC_SET, *[x for t in pair for x in t]]))
    for b in spec.neumann:
        for quad in _quads_of(mesh, spec, b.surface):
            deck.cards.append(Card("PLOAD", [LOAD_SET, b.value.magnitude, *quad]))
    for b in spec.volumetric:
        deck.cards.append(Card("GRAV", [LOAD_SET, 0, b.value.magnitude, 0.0, 0.0, 1.0]))
    return deck


def _thermal(spec: ProblemSpec, mesh: MeshData) -> Deck:
    mats = spec.materials
    n = spec.timestep_count
    duration = spec.temporal_extent.magnitude
    deck = Deck(
        executive=["SOL 159"],
        case_control=[
            f"TITLE = {spec.behavior}",
            f"SPC = {SPC_SET}",
            f"LOAD = {LOAD_SET}",
            f"TEMP(INIT) = {IC_SET}",
            f"TSTEP = {TSTEP_SET}",
            "THERMAL = ALL",
        ],
        comments=[
            f"transient heat transfer analysis of {spec.behavior} (domain {spec.domain})",
            "prescribed temperatures are TEMPBC entries, prescribed fluxes QHBDY entries",
            f"duration {duration!r} is {n} TSTEP increments",
        ],
    )
    deck.cards += _geometry(mesh)
    deck.cards.append(Card("MAT4", [
        MATERIAL_ID,
        mats["ThermalConductivity"].value.magnitude,
        mats["SpecificHeatCapacity"].value.magnitude,
        mats["Density"].value.magnitude,
    ]))
    for b in spec.dirichlet:
        pairs = [(b.value.magnitude, g) for g in _nodes_of(mesh, spec, b.surface)]
        for chunk in _chunks(pairs, 3):
            deck.cards.append(Card("TEMPBC", [SPC_SET, "TRAN", *[x for p in chunk for x in p]]))
    for b in spec.neumann:
        for quad in _quads_of(mesh, spec, b.surface):
            deck.cards.append(Card("QHBDY", [LOAD_SET, "AREA4", b.value.magnitude, None, *quad]))
    elements = list(range(1, len(mesh.hexes) + 1))
    for b in spec.volumetric:
        for chunk in _chunks(elements, 5):
            deck.cards.append(Card("QVOL", [LOAD_SET, b.value.magnitude, None, *chunk]))
    for b in spec.initial:
        deck.cards.append(Card("TEMPD", [IC_SET, b.value.magnitude]))
    deck.cards.append(Card("TSTEP", [TSTEP_SET, n, duration / n, 1]))
    return deck


def emit_deck(spec: ProblemSpec, mesh: MeshData) -> Deck:
    if spec.kind is PhysicsKind.FLUID:
        raise UnsupportedPhysics(
            f"unsupported physics: {spec.behavior} is a fluid behavior, which NASTRAN cannot simulate"
        )
    problems = [d for d in well_posedness(spec) if d.is_error]
    if problems:
        raise IllPosed(problems)
    if not mesh.hexes:
        raise NastranError("NASTRAN decks need a hexahedral mesh")
    if spec.kind is PhysicsKind.STRUCTURAL:
        return _structural(spec, mesh)
    return _thermal(spec, mesh)


def deck_file_name(spec: ProblemSpec) -> str:
    return f"{spec.behavior}.bdf"
