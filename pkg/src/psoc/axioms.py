"""Relation signature and structural consistency rules.

Checks never raise on a bad model; they return :class:`Diagnostic` records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .core import (
    Assertion,
    ModelGraph,
    RelationKind,
    closure_of_edges,
    is_subclass_of,
)

ERROR = "error"
WARNING = "warning"

CODES = {
    "E001": "relation signature violation",
    "E002": "continuant_part_of cycle",
    "E003": "contact must depend on exactly two distinct fiat object surfaces",
    "E004": "contact surfaces belong to the same object",
    "E005": "ambiguous or missing domain",
    "E006": "property lacks a value",
    "E007": "surface carries more than one boundary condition",
    "E008": "transient thermal problem without an initial condition",
    "E009": "structural problem without a Dirichlet condition",
    "E010": "required material property missing",
    "W001": "uncovered boundary defaults to zero Neumann",
    "W002": "participant inherited from the parent process",
    "W003": "made_of entails parthood of the substance",
    "W004": "coupled behaviors are compiled separately",
}

_SEVERITY_ORDER = {ERROR: 0, WARNING: 1}


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    subjects: tuple[str, ...] = ()
    # assertions whose presence triggers the diagnostic; not rendered
    cause: tuple[Assertion, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.code not in CODES:
            raise ValueError(f"unregistered diagnostic code {self.code!r}")
        expected = ERROR if self.code.startswith("E") else WARNING
        if self.severity != expected:
            raise ValueError(f"{self.code} must have severity {expected}")
        object.__setattr__(self, "subjects", tuple(self.subjects))

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.code} [{','.join(self.subjects)}]: {self.message}"

    def to_record(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "subjects": list(self.subjects),
            "message": self.message,
        }


def error(code: str, message: str, subjects: Iterable[str] = (), cause: Iterable[Assertion] = ()) -> Diagnostic:
    return Diagnostic(ERROR, code, message, tuple(subjects), tuple(cause))


def warning(code: str, message: str, subjects: Iterable[str] = (), cause: Iterable[Assertion] = ()) -> Diagnostic:
    return Diagnostic(WARNING, code, message, tuple(subjects), tuple(cause))


def sort_diagnostics(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return sorted(
        diags,
        key=lambda d: (_SEVERITY_ORDER[d.severity], d.code, d.subjects[0] if d.subjects else "", d.subjects, d.message),
    )


@dataclass(frozen=True)
class SignatureRule:
    """Allowed (subject class, object class) for a relation.

    ``refinements`` narrow the object class for particular subject
    subclasses; the most specific matching refinement applies.
    ``excluded_subjects`` / ``excluded_objects`` carve classes out of the
    base signature.
    """

    relation: RelationKind
    subject_class: str
    object_class: str
    refinements: tuple[tuple[str, str], ...] = ()
    excluded_subjects: tuple[str, ...] = ()
    excluded_objects: tuple[str, ...] = ()


SIGNATURES: dict[RelationKind, SignatureRule] = {
    r.relation: r
    for r in (
        SignatureRule(RelationKind.OCCUPIES_TEMPORAL_REGION, "Occurrent", "TemporalRegion"),
        SignatureRule(RelationKind.PROCESS_PROFILE_OF, "PhysicalBehavior", "Process"),
        SignatureRule(RelationKind.HAS_PARTICIPANT, "Process", "IndependentContinuant"),
        SignatureRule(RelationKind.CONTINUANT_PART_OF, "Continuant", "Continuant"),
        SignatureRule(RelationKind.LOCATED_IN, "IndependentContinuant", "IndependentContinuant"),
        SignatureRule(
            RelationKind.S_DEPENDS_ON,
            "SpecificallyDependentContinuant",
            "IndependentContinuant",
            refinements=(
                ("MaterialProperty", "MaterialSubstance"),
                ("PhysicalProperty", "MaterialEntity"),
                ("StateOfMatter", "MaterialEntity"),
                ("Shape", "IndependentContinuant"),
                ("Energy", "MaterialEntity"),
                ("Field", "MaterialEntity"),
                ("RealizableMotion", "MaterialEntity"),
            ),
        ),
        SignatureRule(
            RelationKind.MADE_OF,
            "MaterialEntity",
            "MaterialSubstance",
            excluded_subjects=("MaterialSubstance",),
        ),
        SignatureRule(
            RelationKind.PHYSICALLY_RELATED_TO,
            "SpecificallyDependentContinuant",
            "SpecificallyDependentContinuant",
        ),
        SignatureRule(
            RelationKind.IS_ABOUT,
            "InformationContentEntity",
            "Entity",
            excluded_objects=("InformationContentEntity",),
        ),
    )
}


def _violation(graph: ModelGraph, rule: SignatureRule, a: Assertion) -> str | None:
    tax = graph.taxonomy
    s_cls, o_cls = graph.cls(a.subject), graph.cls(a.object)
    if not is_subclass_of(tax, s_cls, rule.subject_class) or any(
        is_subclass_of(tax, s_cls, x) for x in rule.excluded_subjects
    ):
        return f"subject {a.subject} ({s_cls}) of {a.relation.value} must be a {rule.subject_class}" + (
            f" other than {', '.join(rule.excluded_subjects)}" if rule.excluded_subjects else ""
        )
    required = rule.object_class
    # refinements are listed independent of depth; pick the deepest match
    best_depth = -1
    for sub, obj in rule.refinements:
        if is_subclass_of(tax, s_cls, sub):
            depth = len(tax.ancestors(sub))
            if depth > best_depth:
                best_depth, required = depth, obj
    if not is_subclass_of(tax, o_cls, required) or any(
        is_subclass_of(tax, o_cls, x) for x in rule.excluded_objects
    ):
        what = f"a {required}" + (f" other than {', '.join(rule.excluded_objects)}" if rule.excluded_objects else "")
        return f"object {a.object} ({o_cls}) of {a.subject} {a.relation.value} must be {what}"
    return None


def check_signatures(graph: ModelGraph) -> list[Diagnostic]:
    out = []
    for a in graph.assertions:
        reason = _violation(graph, SIGNATURES[a.relation], a)
        if reason:
            out.append(error("E001", reason, (a.subject, a.object), (a,)))
    return out


def parthood_edges(graph: ModelGraph, entailed: bool = True) -> list[Assertion]:
    """Asserted ``continuant_part_of`` edges plus, when ``entailed``, the
    substance-part-of-entity edge implied by every ``made_of``."""
    edges = [a for a in graph.assertions if a.relation is RelationKind.CONTINUANT_PART_OF]
    if entailed:
        edges += [
            Assertion(a.object, RelationKind.CONTINUANT_PART_OF, a.subject)
            for a in graph.assertions
            if a.relation is RelationKind.MADE_OF
        ]
    return edges


def parthood_closure(graph: ModelGraph, entailed: bool = True) -> set[tuple[str, str]]:
    return closure_of_edges((a.subject, a.object) for a in parthood_edges(graph, entailed))


def _part_cycles(graph: ModelGraph) -> list[Diagnostic]:
    edges = [a for a in graph.assertions if a.relation is RelationKind.CONTINUANT_PART_OF]
    succ: dict[str, list[Assertion]] = {}
    for a in edges:
        succ.setdefault(a.subject, []).append(a)
    # Tarjan's strongly connected components, iterative
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = 0
    for root in sorted(succ):
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, i = work.pop()
            if i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            nbrs = succ.get(node, [])
            if i < len(nbrs):
                work.append((node, i + 1))
                nxt = nbrs[i].object
                if nxt not in index:
                    work.append((nxt, 0))
                elif nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
                continue
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    out = []
    for comp in sccs:
        members = set(comp)
        cause = [a for a in edges if a.subject in members and a.object in members]
        if len(comp) > 1 or cause:
            out.append(error(
                "E002",
                "continuant_part_of cycle through " + ", ".join(sorted(members)),
                sorted(members),
                cause,
            ))
    return out


def _contacts(graph: ModelGraph, closure: set[tuple[str, str]]) -> list[Diagnostic]:
    out = []
    for contact in graph.instances_of("Contact"):
        links = [
            a for a in graph.assertions
            if a.subject == contact and a.relation is RelationKind.S_DEPENDS_ON
        ]
        bearers = list(dict.fromkeys(a.object for a in links))
        surfaces = [b for b in bearers if graph.is_a(b, "FiatObjectSurface")]
        if len(bearers) != 2 or len(surfaces) != 2:
            out.append(error(
                "E003",
                f"contact {contact} s-depends on {len(surfaces)} fiat object surface(s)"
                f" among {len(bearers)} bearer(s); exactly two distinct surfaces required",
                [contact, *bearers],
                links,
            ))
            continue
        owners = []
        for surface in surfaces:
            owners.append({
                whole for part, whole in closure
                if part == surface and graph.is_a(whole, "Object")
            })
        shared = sorted(owners[0] & owners[1])
        if shared:
            out.append(error(
                "E004",
                f"contact {contact} joins {surfaces[0]} and {surfaces[1]}, which both belong to "
                + ", ".join(shared) + "; contacting objects must be distinct",
                [contact, *surfaces],
                links,
            ))
    return out


def check_structure(graph: ModelGraph, notes: bool = False) -> list[Diagnostic]:
    """Part cycles, contact well-formedness and (optionally) W003 notes."""
    out = _part_cycles(graph)
    out += _contacts(graph, parthood_closure(graph, entailed=False))
    if notes:
        for a in graph.assertions:
            if a.relation is RelationKind.MADE_OF:
                out.append(warning(
                    "W003",
                    f"{a.subject} made_of {a.object} entails {a.object} continuant_part_of {a.subject}",
                    (a.subject, a.object),
                    (a,),
                ))
    return out


def check_all(graph: ModelGraph, notes: bool = False) -> list[Diagnostic]:
    return sort_diagnostics(check_signatures(graph) + check_structure(graph, notes=notes))
