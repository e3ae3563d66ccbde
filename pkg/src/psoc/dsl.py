"""Reader and canonical writer for ``.pso`` model files.

The format is line oriented, one statement per line, ``#`` starts a
comment::

    class CastIron < MaterialSubstance
    instance pipe : Object "pipe"
    rel pipe made_of cast_iron
    value density_of_cast_iron = 7200.0 kg/m^3
    mesh pipe_mesh for pipe box 0.5 0.1 0.1 div 4 2 2
    tag pipe_mesh face x_min surface psi_1
    simulate thermal_behavior target fenics steps 50

Statements may refer to names declared further down the file.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .core import (
    Assertion,
    Instance,
    ModelError,
    ModelGraph,
    QuantityValue,
    RelationKind,
    Taxonomy,
    default_taxonomy,
    render_number,
    transitive_closure,
)

FACE_NAMES = ("x_min", "x_max", "y_min", "y_max", "z_min", "z_max")
TARGETS = ("fenics", "nastran")
DEFAULT_STEPS = 50

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_INT = re.compile(r"[+-]?\d+\Z")
_STRING = re.compile(r'"(?:[^"\\\n]|\\.)*"')
_TOKEN = re.compile(_STRING.pattern + r'|"[^\n]*|\S+')


@dataclass(frozen=True, order=True)
class SourceSpan:
    line: int
    column: int

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"span must be 1-based, got {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class ParseFailure(Exception):
    """Raised by :func:`parse` with every error found in the input."""

    def __init__(self, errors: list[ParseError]):
        self.errors = sorted(errors, key=lambda e: e.span)
        super().__init__("\n".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class MeshDirective:
    id: str
    target: str
    extent: tuple[float, float, float]
    divisions: tuple[int, int, int]
    face_tags: dict[str, str] = field(default_factory=dict)

    def surfaces(self) -> list[str]:
        return sorted(set(self.face_tags.values()))


@dataclass(frozen=True)
class SimRequest:
    behavior: str
    target: str
    steps: int = DEFAULT_STEPS


@dataclass
class ParsedModel:
    graph: ModelGraph
    meshes: list[MeshDirective] = field(default_factory=list)
    sims: list[SimRequest] = field(default_factory=list)

    def __iter__(self):
        return iter((self.graph, self.meshes, self.sims))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParsedModel):
            return NotImplemented
        return (
            self.graph == other.graph
            and sorted(self.meshes, key=lambda m: m.id) == sorted(other.meshes, key=lambda m: m.id)
            and set(self.sims) == set(other.sims)
        )

    def mesh(self, mesh_id: str) -> MeshDirective:
        for m in self.meshes:
            if m.id == mesh_id:
                return m
        raise KeyError(mesh_id)


@dataclass
class _Tok:
    text: str
    col: int


@dataclass
class _Stmt:
    keyword: str
    toks: list[_Tok]
    line: int

    def span(self, i: int | None = None) -> SourceSpan:
        col = self.toks[i].col if i is not None and i < len(self.toks) else self.toks[0].col
        return SourceSpan(self.line, col)


# keyword -> (min tokens, max tokens, fixed literal positions)
_SHAPES = {
    "class": (4, 4, {2: "<"}),
    "instance": (4, 5, {2: ":"}),
    "rel": (4, 4, {}),
    "value": (4, 5, {2: "="}),
    "mesh": (12, 12, {2: "for", 4: "box", 8: "div"}),
    "tag": (6, 6, {2: "face", 4: "surface"}),
    "simulate": (4, 6, {2: "target"}),
}

_USAGE = {
    "class": "class NAME < PARENT",
    "instance": 'instance NAME : CLASS ["label"]',
    "rel": "rel SUBJECT RELATION OBJECT",
    "value": "value NAME = NUMBER [UNIT]",
    "mesh": "mesh NAME for OBJECT box LX LY LZ div NX NY NZ",
    "tag": "tag MESH face FACE surface SURFACE",
    "simulate": "simulate BEHAVIOR target BACKEND [steps N]",
}


def _tokenize(line: str) -> list[_Tok]:
    toks = []
    for m in _TOKEN.finditer(line):
        if m.group().startswith("#"):
            break
        toks.append(_Tok(m.group(), m.start() + 1))
    return toks


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.errors: list[ParseError] = []

    def error(self, message: str, span: SourceSpan) -> None:
        self.errors.append(ParseError(message, span))

    def statements(self) -> list[_Stmt]:
        stmts = []
        for lineno, raw in enumerate(self.text.split("\n"), start=1):
            toks = _tokenize(raw)
            if not toks:
                continue
            stmt = _Stmt(toks[0].text, toks, lineno)
            if self.check_shape(stmt):
                stmts.append(stmt)
        return stmts

    def check_shape(self, stmt: _Stmt) -> bool:
        shape = _SHAPES.get(stmt.keyword)
        if shape is None:
            self.error(f"unknown keyword {stmt.keyword!r}", stmt.span(0))
            return False
        lo, hi, literals = shape
        n = len(stmt.toks)
        if stmt.keyword == "simulate" and n == 5:
            lo = hi = 6  # "steps" given without a count
        if not lo <= n <= hi:
            col = stmt.toks[min(n, hi) - 1].col if n > hi else stmt.toks[-1].col
            self.error(f"malformed statement, expected: {_USAGE[stmt.keyword]}", SourceSpan(stmt.line, col))
            return False
        for pos, lit in literals.items():
            if stmt.toks[pos].text != lit:
                self.error(f"expected {lit!r}, found {stmt.toks[pos].text!r}", stmt.span(pos))
                return False
        if stmt.keyword == "simulate" and n == 6 and stmt.toks[4].text != "steps":
            self.error(f"expected 'steps', found {stmt.toks[4].text!r}", stmt.span(4))
            return False
        return True

    def ident(self, stmt: _Stmt, i: int) -> str | None:
        text = stmt.toks[i].text
        if not _IDENT.match(text):
            self.error(f"invalid identifier {text!r}", stmt.span(i))
            return None
        return text

    def number(self, stmt: _Stmt, i: int) -> float | None:
        text = stmt.toks[i].text
        if not _NUMBER.match(text):
            self.error(f"malformed number {text!r}", stmt.span(i))
            return None
        value = float(text)
        if not math.isfinite(value):
            self.error(f"number out of range {text!r}", stmt.span(i))
            return None
        return value

    def positive_int(self, stmt: _Stmt, i: int) -> int | None:
        text = stmt.toks[i].text
        if not _INT.match(text):
            self.error(f"malformed integer {text!r}", stmt.span(i))
            return None
        value = int(text)
        if value < 1:
            self.error(f"expected a positive integer, found {text}", stmt.span(i))
            return None
        return value


def parse(text: str) -> ParsedModel:
    """Parse ``.pso`` source into a model.

    Raises :class:`ParseFailure` listing every error, each with the line and
    column of the offending token.
    """
    reader = _Reader(text)
    stmts = reader.statements()
    by_kw: dict[str, list[_Stmt]] = {k: [] for k in _SHAPES}
    for s in stmts:
        by_kw[s.keyword].append(s)

    taxonomy = _resolve_classes(reader, by_kw["class"])

    instances: dict[str, Instance] = {}
    decl_line: dict[str, _Stmt] = {}
    for s in by_kw["instance"]:
        name, cls = reader.ident(s, 1), reader.ident(s, 3)
        label = None
        if len(s.toks) == 5:
            raw = s.toks[4].text
            if not _STRING.fullmatch(raw):
                reader.error(f"malformed label {raw!r}", s.span(4))
                continue
            label = _unquote(raw)
        if name is None or cls is None:
            continue
        if name in instances:
            reader.error(f"duplicate instance {name!r} (first declared on line {decl_line[name].line})", s.span(1))
            continue
        if cls not in taxonomy:
            reader.error(f"unresolved identifier: unknown class {cls!r}", s.span(3))
            continue
        instances[name] = Instance(name, cls, label)
        decl_line[name] = s

    def resolve(s: _Stmt, i: int) -> str | None:
        name = reader.ident(s, i)
        if name is not None and name not in instances:
            reader.error(f"unresolved identifier {name!r}", s.span(i))
            return None
        return name

    assertions: list[Assertion] = []
    for s in by_kw["rel"]:
        rel_text = s.toks[2].text
        try:
            rel = RelationKind(rel_text)
        except ValueError:
            reader.error(f"unknown relation {rel_text!r}", s.span(2))
            rel = None
        subj, obj = resolve(s, 1), resolve(s, 3)
        if rel is not None and subj is not None and obj is not None:
            assertions.append(Assertion(subj, rel, obj))

    values: dict[str, QuantityValue] = {}
    for s in by_kw["value"]:
        name = resolve(s, 1)
        mag = reader.number(s, 3)
        unit = s.toks[4].text if len(s.toks) == 5 else ""
        if name is None or mag is None:
            continue
        if name in values:
            reader.error(f"duplicate value for {name!r}", s.span(1))
            continue
        values[name] = QuantityValue(mag, unit)

    graph = None
    if not reader.errors:
        try:
            graph = ModelGraph(taxonomy, instances, tuple(assertions), values)
        except ModelError as exc:  # defensive: resolution above should prevent this
            reader.error(str(exc), SourceSpan(1, 1))

    meshes = _resolve_meshes(reader, by_kw["mesh"], by_kw["tag"], instances, taxonomy, graph)
    sims = _resolve_sims(reader, by_kw["simulate"], instances, taxonomy)

    if reader.errors or graph is None:
        raise ParseFailure(reader.errors)
    return ParsedModel(graph, meshes, sims)


def _resolve_classes(reader: _Reader, stmts: list[_Stmt]) -> Taxonomy:
    base = default_taxonomy()
    pending: dict[str, tuple[str, _Stmt]] = {}
    for s in stmts:
        name, parent = reader.ident(s, 1), reader.ident(s, 3)
        if name is None or parent is None:
            continue
        if name in base or name in pending:
            reader.error(f"duplicate class {name!r}", s.span(1))
            continue
        pending[name] = (parent, s)
    parents = dict(base.parent)
    # forward references: settle classes whose parent is already known, repeat
    while pending:
        ready = [n for n, (p, _) in pending.items() if p in parents or p == "Entity"]
        if not ready:
            break
        for n in sorted(ready):
            parents[n] = pending.pop(n)[0]
    for name, (parent, s) in sorted(pending.items(), key=lambda kv: kv[1][1].line):
        if parent in pending:
            reader.error(f"class hierarchy cycle through {name!r}", s.span(3))
        else:
            reader.error(f"unresolved identifier: unknown parent class {parent!r}", s.span(3))
    return Taxonomy(parents)


def _resolve_meshes(reader, mesh_stmts, tag_stmts, instances, taxonomy, graph) -> list[MeshDirective]:
    from .core import is_subclass_of

    heads: dict[str, tuple[str, tuple, tuple, _Stmt]] = {}
    for s in mesh_stmts:
        name, target = reader.ident(s, 1), reader.ident(s, 3)
        extent = [reader.number(s, i) for i in (5, 6, 7)]
        divs = [reader.positive_int(s, i) for i in (9, 10, 11)]
        for i, e in zip((5, 6, 7), list(extent)):
            if e is not None and e <= 0:
                reader.error(f"box extent must be positive, found {s.toks[i].text}", s.span(i))
                extent[i - 5] = None
        if name is None or target is None or None in extent or None in divs:
            continue
        if name in heads or name in instances:
            reader.error(f"duplicate name {name!r}", s.span(1))
            continue
        if target not in instances:
            reader.error(f"unresolved identifier {target!r}", s.span(3))
            continue
        if not is_subclass_of(taxonomy, instances[target].cls, "MaterialEntity"):
            reader.error(f"mesh target {target!r} is not a material entity", s.span(3))
            continue
        heads[name] = (target, tuple(extent), tuple(divs), s)

    parthood = transitive_closure(graph, RelationKind.CONTINUANT_PART_OF) if graph is not None else None
    tags: dict[str, dict[str, str]] = {name: {} for name in heads}
    for s in tag_stmts:
        mesh_name, face, surface = reader.ident(s, 1), s.toks[3].text, reader.ident(s, 5)
        if face not in FACE_NAMES:
            reader.error(f"unknown face name {face!r} (expected one of {', '.join(FACE_NAMES)})", s.span(3))
            continue
        if mesh_name is None or surface is None:
            continue
        if mesh_name not in heads:
            reader.error(f"unresolved identifier: unknown mesh {mesh_name!r}", s.span(1))
            continue
        if surface not in instances:
            reader.error(f"unresolved identifier {surface!r}", s.span(5))
            continue
        if not is_subclass_of(taxonomy, instances[surface].cls, "FiatObjectSurface"):
            reader.error(f"{surface!r} is not a fiat object surface", s.span(5))
            continue
        target = heads[mesh_name][0]
        if parthood is not None and (surface, target) not in parthood:
            reader.error(f"surface {surface!r} is not part of mesh target {target!r}", s.span(5))
            continue
        if face in tags[mesh_name]:
            reader.error(f"face {face} of {mesh_name!r} is already tagged", s.span(3))
            continue
        tags[mesh_name][face] = surface

    return [
        MeshDirective(name, target, extent, divs, dict(sorted(tags[name].items())))
        for name, (target, extent, divs, _) in sorted(heads.items())
    ]


def _resolve_sims(reader, stmts, instances, taxonomy) -> list[SimRequest]:
    from .core import is_subclass_of

    sims: list[SimRequest] = []
    for s in stmts:
        behavior = reader.ident(s, 1)
        target = s.toks[3].text
        steps = reader.positive_int(s, 5) if len(s.toks) == 6 else DEFAULT_STEPS
        if target not in TARGETS:
            reader.error(f"unknown target {target!r} (expected fenics or nastran)", s.span(3))
            continue
        if behavior is None or steps is None:
            continue
        if behavior not in instances:
            reader.error(f"unresolved identifier {behavior!r}", s.span(1))
            continue
        if not is_subclass_of(taxonomy, instances[behavior].cls, "PhysicalBehavior"):
            reader.error(f"{behavior!r} is not a physical behavior", s.span(1))
            continue
        req = SimRequest(behavior, target, steps)
        if req not in sims:
            sims.append(req)
    return sims


def serialize_canonical(graph: ModelGraph, meshes=(), sims=()) -> str:
    """Deterministic ``.pso`` text for a model; :func:`parse` inverts it."""
    lines: list[str] = []
    user = graph.taxonomy.user_classes()
    lines += [f"class {name} < {user[name]}" for name in sorted(user)]
    for iid in sorted(graph.instances):
        inst = graph.instances[iid]
        label = f" {_quote(inst.label)}" if inst.label is not None else ""
        lines.append(f"instance {iid} : {inst.cls}{label}")
    for a in sorted(graph.assertions, key=lambda a: (a.subject, a.relation.value, a.object)):
        lines.append(f"rel {a.subject} {a.relation.value} {a.object}")
    for iid in sorted(graph.values):
        q = graph.values[iid]
        unit = f" {q.unit}" if q.unit else ""
        lines.append(f"value {iid} = {render_number(q.magnitude)}{unit}")
    for m in sorted(meshes, key=lambda m: m.id):
        ext = " ".join(render_number(e) for e in m.extent)
        div = " ".join(str(d) for d in m.divisions)
        lines.append(f"mesh {m.id} for {m.target} box {ext} div {div}")
        lines += [f"tag {m.id} face {f} surface {m.face_tags[f]}" for f in sorted(m.face_tags)]
    for r in sorted(set(sims), key=lambda r: (r.behavior, r.target, r.steps)):
        lines.append(f"simulate {r.behavior} target {r.target} steps {r.steps}")
    return "".join(line + "\n" for line in lines)
