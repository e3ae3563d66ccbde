"""Taxonomy, instance graph and generic graph queries.

Everything downstream reads the model through :class:`ModelGraph`. Graphs
and taxonomies are immutable; "modifying" operations return new values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

ROOT = "Entity"


class ModelError(Exception):
    """Base class for errors raised while building or querying a model."""


class UnknownParent(ModelError):
    pass


class DuplicateClass(ModelError):
    pass


class UnknownClass(ModelError):
    pass


class UnknownInstance(ModelError):
    pass


class UnsupportedRelation(ModelError):
    pass


def _tree(spec: dict, parent: str, out: dict[str, str]) -> None:
    for name, children in spec.items():
        out[name] = parent
        _tree(children, name, out)


_BUILTIN_TREE = {
    "Occurrent": {
        "Process": {
            "PhysicalBehavior": {
                "StructuralBehavior": {},
                "ThermalBehavior": {},
                "FluidBehavior": {},
            },
        },
        "ProcessBoundary": {},
        "TemporalRegion": {
            "ZeroDTemporalRegion": {},
            "OneDTemporalRegion": {},
        },
    },
    "Continuant": {
        "IndependentContinuant": {
            "MaterialEntity": {
                "Object": {},
                "ObjectAggregate": {},
                "FiatObjectPart": {"FiatObjectSurface": {}},
                "MaterialSubstance": {},
            },
            "ImmaterialEntity": {"Site": {}},
        },
        "SpecificallyDependentContinuant": {
            "Quality": {
                "Shape": {},
                "StateOfMatter": {},
                "PhysicalProperty": {
                    "Displacement": {},
                    "BodyForce": {},
                    "DistributedForce": {},
                    "Pressure": {},
                    "Velocity": {},
                    "Temperature": {},
                    "TemperatureFlux": {},
                },
                "MaterialProperty": {
                    "Density": {},
                    "ElasticModulus": {},
                    "ShearModulus": {},
                    "SpecificHeatCapacity": {},
                    "ThermalConductivity": {},
                    "Viscosity": {},
                },
            },
            "RelationalQuality": {"Contact": {}},
            "RealizableEntity": {
                "Disposition": {
                    "Energy": {},
                    "Field": {},
                    "RealizableMotion": {},
                },
            },
        },
        "GenericallyDependentContinuant": {
            "InformationContentEntity": {
                "Domain": {},
                "GeometricModel": {"Mesh": {}},
                "BoundaryCondition": {},
                "InitialCondition": {},
                "TimeStep": {},
            },
        },
    },
}

_BUILTIN_PARENTS: dict[str, str] = {}
_tree(_BUILTIN_TREE, ROOT, _BUILTIN_PARENTS)
BUILTIN_CLASSES = frozenset(_BUILTIN_PARENTS) | {ROOT}


class Taxonomy:
    """Single-inheritance class tree rooted at ``Entity``."""

    __slots__ = ("_parent",)

    def __init__(self, parent: Mapping[str, str]):
        self._parent = dict(parent)
        for name in self._parent:
            seen = {name}
            cur = name
            while cur != ROOT:
                cur = self._parent.get(cur)
                if cur is None or (cur != ROOT and cur not in self._parent):
                    raise UnknownParent(f"class {name!r} does not reach {ROOT!r}")
                if cur in seen:
                    raise ModelError(f"class hierarchy cycle through {name!r}")
                seen.add(cur)

    @property
    def classes(self) -> frozenset[str]:
        return frozenset(self._parent) | {ROOT}

    @property
    def parent(self) -> Mapping[str, str]:
        return MappingProxyType(self._parent)

    def user_classes(self) -> dict[str, str]:
        """User-declared classes and their parents."""
        return {c: p for c, p in self._parent.items() if c not in BUILTIN_CLASSES}

    def __contains__(self, name: object) -> bool:
        return name == ROOT or name in self._parent

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taxonomy) and self._parent == other._parent

    def __hash__(self) -> int:
        return hash(frozenset(self._parent.items()))

    def __repr__(self) -> str:
        return f"Taxonomy({len(self._parent) + 1} classes)"

    def ancestors(self, name: str) -> list[str]:
        """Parent chain of ``name``, nearest first, ending at ``Entity``."""
        if name not in self:
            raise UnknownClass(name)
        chain = []
        while name != ROOT:
            name = self._parent[name]
            chain.append(name)
        return chain

    def builtin_base(self, name: str) -> str:
        """Nearest built-in class at or above ``name``."""
        if name in BUILTIN_CLASSES:
            return name
        for anc in self.ancestors(name):
            if anc in BUILTIN_CLASSES:
                return anc
        return ROOT  # unreachable: the root is built in


def default_taxonomy() -> Taxonomy:
    return Taxonomy(_BUILTIN_PARENTS)


def add_class(tax: Taxonomy, name: str, parent: str) -> Taxonomy:
    if name in tax:
        raise DuplicateClass(name)
    if parent not in tax:
        raise UnknownParent(parent)
    extended = dict(tax.parent)
    extended[name] = parent
    return Taxonomy(extended)


def is_subclass_of(tax: Taxonomy, a: str, b: str) -> bool:
    """Reflexive subclass test."""
    if a not in tax:
        raise UnknownClass(a)
    if b not in tax:
        raise UnknownClass(b)
    return a == b or b in tax.ancestors(a)


class RelationKind(str, Enum):
    OCCUPIES_TEMPORAL_REGION = "occupies_temporal_region"
    PROCESS_PROFILE_OF = "process_profile_of"
    HAS_PARTICIPANT = "has_participant"
    CONTINUANT_PART_OF = "continuant_part_of"
    LOCATED_IN = "located_in"
    S_DEPENDS_ON = "s_depends_on"
    MADE_OF = "made_of"
    PHYSICALLY_RELATED_TO = "physically_related_to"
    IS_ABOUT = "is_about"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Instance:
    id: str
    cls: str
    label: str | None = None


@dataclass(frozen=True, order=True)
class Assertion:
    subject: str
    relation: RelationKind
    object: str

    def __str__(self) -> str:
        return f"{self.subject} {self.relation.value} {self.object}"


@dataclass(frozen=True)
class QuantityValue:
    magnitude: float
    unit: str = ""

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise ModelError(f"non-finite magnitude {self.magnitude!r}")

    def __str__(self) -> str:
        text = render_number(self.magnitude)
        return f"{text} {self.unit}" if self.unit else text


def render_number(x: float) -> str:
    """Canonical decimal text for a magnitude; round-trips through float()."""
    return repr(float(x))


@dataclass(frozen=True)
class ModelGraph:
    """Typed instances, relation assertions and quantity values.

    Assertions keep insertion order (duplicates are dropped) so that
    :func:`query` is deterministic for a given input file.
    """

    taxonomy: Taxonomy = field(default_factory=default_taxonomy)
    instances: Mapping[str, Instance] = field(default_factory=dict)
    assertions: tuple[Assertion, ...] = ()
    values: Mapping[str, QuantityValue] = field(default_factory=dict)

    def __post_init__(self):
        for key, inst in self.instances.items():
            if key != inst.id:
                raise ModelError(f"instance key {key!r} != id {inst.id!r}")
            if inst.cls not in self.taxonomy:
                raise UnknownClass(f"{inst.id}: {inst.cls}")
        unique = tuple(dict.fromkeys(self.assertions))
        for a in unique:
            for ref in (a.subject, a.object):
                if ref not in self.instances:
                    raise UnknownInstance(f"{ref!r} in assertion {a}")
        for ref in self.values:
            if ref not in self.instances:
                raise UnknownInstance(f"{ref!r} has a value but is not declared")
        object.__setattr__(self, "instances", MappingProxyType(dict(self.instances)))
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))
        object.__setattr__(self, "assertions", unique)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelGraph):
            return NotImplemented
        return (
            self.taxonomy == other.taxonomy
            and dict(self.instances) == dict(other.instances)
            and set(self.assertions) == set(other.assertions)
            and dict(self.values) == dict(other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    def cls(self, instance_id: str) -> str:
        try:
            return self.instances[instance_id].cls
        except KeyError:
            raise UnknownInstance(instance_id) from None

    def is_a(self, instance_id: str, cls: str) -> bool:
        return is_subclass_of(self.taxonomy, self.cls(instance_id), cls)

    def instances_of(self, cls: str) -> list[str]:
        """Ids of instances of ``cls`` or a subclass, sorted."""
        return sorted(i for i in self.instances if self.is_a(i, cls))

    def objects(self, subject: str, relation: RelationKind) -> list[str]:
        return [a.object for a in self.assertions if a.subject == subject and a.relation is relation]

    def subjects(self, relation: RelationKind, obj: str) -> list[str]:
        return [a.subject for a in self.assertions if a.object == obj and a.relation is relation]

    def extended(
        self,
        instances: Iterable[Instance] = (),
        assertions: Iterable[Assertion] = (),
        values: Mapping[str, QuantityValue] | None = None,
    ) -> ModelGraph:
        """New graph with the given additions; existing content is kept."""
        new_instances = dict(self.instances)
        for inst in instances:
            if inst.id in new_instances:
                raise ModelError(f"duplicate instance id {inst.id!r}")
            new_instances[inst.id] = inst
        new_values = dict(self.values)
        new_values.update(values or {})
        return ModelGraph(
            self.taxonomy, new_instances, self.assertions + tuple(assertions), new_values
        )

    def without(self, instance_ids: Iterable[str] = (), assertions: Iterable[Assertion] = ()) -> ModelGraph:
        """New graph with instances (and everything touching them) or assertions removed."""
        drop = set(instance_ids)
        drop_assertions = set(assertions)
        return ModelGraph(
            self.taxonomy,
            {k: v for k, v in self.instances.items() if k not in drop},
            tuple(
                a for a in self.assertions
                if a not in drop_assertions and a.subject not in drop and a.object not in drop
            ),
            {k: v for k, v in self.values.items() if k not in drop},
        )


def query(
    graph: ModelGraph,
    subject: str | None = None,
    relation: RelationKind | None = None,
    object: str | None = None,
) -> list[Assertion]:
    for ref in (subject, object):
        if ref is not None and ref not in graph.instances:
            raise UnknownInstance(ref)
    return [
        a for a in graph.assertions
        if (subject is None or a.subject == subject)
        and (relation is None or a.relation is relation)
        and (object is None or a.object == object)
    ]


def closure_of_edges(edges: Iterable[tuple[str, str]], symmetric: bool = False) -> set[tuple[str, str]]:
    """Transitive (optionally symmetric-transitive) closure of an edge set."""
    succ: dict[str, set[str]] = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
        if symmetric:
            succ.setdefault(b, set()).add(a)
    result = set()
    for start in succ:
        stack = list(succ[start])
        seen: set[str] = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(succ.get(node, ()))
        result.update((start, n) for n in seen)
    return result


def transitive_closure(graph: ModelGraph, relation: RelationKind) -> set[tuple[str, str]]:
    """Closure of ``continuant_part_of`` (transitive) or ``physically_related_to``
    (symmetric and transitive) over the asserted edges."""
    if relation is RelationKind.CONTINUANT_PART_OF:
        symmetric = False
    elif relation is RelationKind.PHYSICALLY_RELATED_TO:
        symmetric = True
    else:
        raise UnsupportedRelation(relation.value)
    edges = [(a.subject, a.object) for a in graph.assertions if a.relation is relation]
    return closure_of_edges(edges, symmetric=symmetric)


def is_ice(graph: ModelGraph, instance_id: str) -> bool:
    """True for PSO-Sim (information content entity) instances."""
    return graph.is_a(instance_id, "InformationContentEntity")


def physics_instances(graph: ModelGraph) -> frozenset[Instance]:
    return frozenset(i for i in graph.instances.values() if not is_ice(graph, i.id))


def sim_instances(graph: ModelGraph) -> frozenset[Instance]:
    return frozenset(i for i in graph.instances.values() if is_ice(graph, i.id))
