"""Solver-neutral problem planning for one physical behavior.

:func:`derive_problem` collects the domain, boundary and initial bindings
and material parameters of a behavior into a :class:`ProblemSpec`;
:func:`well_posedness` checks it; :func:`instantiate_ices` adds the
simulation-side instances (mesh, boundary conditions, ...) that refer back
to the physics model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .axioms import Diagnostic, error, parthood_closure, sort_diagnostics, warning
from .core import (
    Assertion,
    Instance,
    ModelGraph,
    QuantityValue,
    RelationKind,
    transitive_closure,
)
from .dsl import MeshDirective, SimRequest

R = RelationKind


class PhysicsKind(str, Enum):
    STRUCTURAL = "Structural"
    THERMAL = "Thermal"
    FLUID = "Fluid"

    def __str__(self) -> str:
        return self.value


class Role(str, Enum):
    DIRICHLET = "Dirichlet"
    NEUMANN = "Neumann"
    VOLUMETRIC = "Volumetric"
    INITIAL = "Initial"
    UNSUPPORTED = "Unsupported"

    def __str__(self) -> str:
        return self.value


SURFACE = "surface"
OBJECT = "object"

BEHAVIOR_KINDS = {
    "StructuralBehavior": PhysicsKind.STRUCTURAL,
    "ThermalBehavior": PhysicsKind.THERMAL,
    "FluidBehavior": PhysicsKind.FLUID,
}

_ROLES = {
    (PhysicsKind.STRUCTURAL, "Displacement", SURFACE): Role.DIRICHLET,
    (PhysicsKind.STRUCTURAL, "DistributedForce", SURFACE): Role.NEUMANN,
    (PhysicsKind.STRUCTURAL, "Pressure", SURFACE): Role.NEUMANN,
    (PhysicsKind.STRUCTURAL, "BodyForce", OBJECT): Role.VOLUMETRIC,
    (PhysicsKind.THERMAL, "Temperature", SURFACE): Role.DIRICHLET,
    (PhysicsKind.THERMAL, "TemperatureFlux", SURFACE): Role.NEUMANN,
    (PhysicsKind.THERMAL, "TemperatureFlux", OBJECT): Role.VOLUMETRIC,
    (PhysicsKind.THERMAL, "Temperature", OBJECT): Role.INITIAL,
    (PhysicsKind.FLUID, "Velocity", SURFACE): Role.DIRICHLET,
    (PhysicsKind.FLUID, "Pressure", SURFACE): Role.NEUMANN,
    (PhysicsKind.FLUID, "BodyForce", OBJECT): Role.VOLUMETRIC,
    (PhysicsKind.FLUID, "Velocity", OBJECT): Role.INITIAL,
}

REQUIRED_MATERIALS = {
    PhysicsKind.STRUCTURAL: ("ElasticModulus", "ShearModulus"),
    PhysicsKind.THERMAL: ("Density", "SpecificHeatCapacity", "ThermalConductivity"),
    PhysicsKind.FLUID: ("Density", "Viscosity"),
}

# property vocabulary of each kind's governing equations, bearer-independent
KIND_PROPERTIES = {
    kind: frozenset(cls for k, cls, _ in _ROLES if k is kind) for kind in PhysicsKind
}

TRANSIENT = frozenset({PhysicsKind.THERMAL, PhysicsKind.FLUID})


class IllPosed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class PlanError(Exception):
    """Raised by :func:`derive_problem`; carries E005/E006 diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sort_diagnostics(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


def classify_property(kind: PhysicsKind, property_class: str, bearer_kind: str, taxonomy=None) -> Role:
    """Role of a physical property for a behavior kind.

    With ``taxonomy`` given, user subclasses resolve to their built-in base.
    """
    if taxonomy is not None and property_class in taxonomy:
        property_class = taxonomy.builtin_base(property_class)
    return _ROLES.get((kind, property_class, bearer_kind), Role.UNSUPPORTED)


def behavior_kind(graph: ModelGraph, behavior: str) -> PhysicsKind | None:
    tax = graph.taxonomy
    cls = graph.cls(behavior)
    for name in [cls, *tax.ancestors(cls)]:
        if name in BEHAVIOR_KINDS:
            return BEHAVIOR_KINDS[name]
    return None


@dataclass(frozen=True)
class Binding:
    property: str
    value: QuantityValue
    surface: str | None = None


@dataclass(frozen=True)
class ProblemSpec:
    behavior: str
    kind: PhysicsKind
    domain: str
    dirichlet: tuple[Binding, ...] = ()
    neumann: tuple[Binding, ...] = ()
    volumetric: tuple[Binding, ...] = ()
    initial: tuple[Binding, ...] = ()
    materials: dict[str, Binding] = field(default_factory=dict)
    temporal_extent: QuantityValue | None = None
    temporal_region: str | None = None
    timestep_count: int = 50
    mesh_directive: MeshDirective | None = None
    # every fiat surface of the domain -> its surface parents (empty if top level)
    surface_parents: dict[str, tuple[str, ...]] = field(default_factory=dict)
    notes: tuple[Diagnostic, ...] = ()

    def surface_ancestors(self, surface: str) -> set[str]:
        seen: set[str] = set()
        todo = list(self.surface_parents.get(surface, ()))
        while todo:
            s = todo.pop()
            if s not in seen:
                seen.add(s)
                todo.extend(self.surface_parents.get(s, ()))
        return seen

    def surface_descendants(self, surface: str) -> set[str]:
        return {s for s in self.surface_parents if surface in self.surface_ancestors(s)}

    def top_level_surfaces(self) -> list[str]:
        return sorted(s for s, parents in self.surface_parents.items() if not parents)

    @property
    def boundary(self) -> tuple[Binding, ...]:
        return self.dirichlet + self.neumann


def _surfaces_of(graph: ModelGraph, obj: str, closure: set[tuple[str, str]]) -> list[str]:
    return sorted(
        s for s, whole in closure if whole == obj and graph.is_a(s, "FiatObjectSurface")
    )


def _bears_supported_property(graph, kind, obj, closure) -> bool:
    region = {obj, *_surfaces_of(graph, obj, closure)}
    for a in graph.assertions:
        if a.relation is R.S_DEPENDS_ON and a.object in region and graph.is_a(a.subject, "PhysicalProperty"):
            bearer = OBJECT if a.object == obj else SURFACE
            if classify_property(kind, graph.cls(a.subject), bearer, graph.taxonomy) is not Role.UNSUPPORTED:
                return True
    return False


def resolve_domain(graph: ModelGraph, behavior: str, kind: PhysicsKind) -> tuple[str | None, list[Diagnostic]]:
    """Participating object of a behavior.

    An explicit ``has_participant`` on the behavior wins; otherwise the
    participants of the parent process are used (with W002). Aggregates
    resolve to the member object bearing a property this kind can use.
    """
    notes: list[Diagnostic] = []
    closure = parthood_closure(graph, entailed=False)
    candidates = graph.objects(behavior, R.HAS_PARTICIPANT)
    if not candidates:
        for process in graph.objects(behavior, R.PROCESS_PROFILE_OF):
            inherited = graph.objects(process, R.HAS_PARTICIPANT)
            if inherited:
                notes.append(warning(
                    "W002",
                    f"{behavior} has no participant of its own; using participants of {process}: "
                    + ", ".join(inherited),
                    (behavior, process, *inherited),
                ))
            candidates += inherited
    objects: list[str] = []
    for c in dict.fromkeys(candidates):
        if graph.is_a(c, "Object"):
            objects.append(c)
        elif graph.is_a(c, "ObjectAggregate"):
            members = sorted(m for m, whole in closure if whole == c and graph.is_a(m, "Object"))
            objects += [m for m in members if _bears_supported_property(graph, kind, m, closure)]
    objects = list(dict.fromkeys(objects))
    if len(objects) == 1:
        return objects[0], notes
    if not objects:
        return None, notes + [error("E005", f"no participating object found for {behavior}", (behavior,))]
    return None, notes + [error(
        "E005", f"ambiguous domain for {behavior}: candidates " + ", ".join(objects), (behavior, *objects)
    )]


def _temporal_region(graph: ModelGraph, behavior: str) -> str | None:
    for occurrent in [behavior, *graph.objects(behavior, R.PROCESS_PROFILE_OF)]:
        regions = graph.objects(occurrent, R.OCCUPIES_TEMPORAL_REGION)
        if regions:
            return sorted(regions)[0]
    return None


def derive_problem(
    graph: ModelGraph,
    behavior: str,
    sim: SimRequest | None = None,
    meshes: Iterable[MeshDirective] = (),
) -> ProblemSpec:
    """Build the :class:`ProblemSpec` for ``behavior``; raises :class:`PlanError`."""
    if behavior not in graph.instances:
        raise PlanError([error("E005", f"{behavior} is not an instance of the model", (behavior,))])
    kind = behavior_kind(graph, behavior)
    if kind is None:
        raise PlanError([error("E005", f"{behavior} is not a structural, thermal or fluid behavior", (behavior,))])
    steps = sim.steps if sim is not None else 50
    domain, diags = resolve_domain(graph, behavior, kind)
    if domain is None:
        raise PlanError(diags)
    notes = [d for d in diags if not d.is_error]
    errors: list[Diagnostic] = []

    closure = parthood_closure(graph, entailed=False)
    surfaces = _surfaces_of(graph, domain, closure)
    surface_set = set(surfaces)
    surface_parents = {
        s: tuple(sorted(
            o for o in graph.objects(s, R.CONTINUANT_PART_OF) if o in surface_set
        ))
        for s in surfaces
    }

    def value_of(prop: str) -> QuantityValue | None:
        q = graph.values.get(prop)
        if q is None:
            errors.append(error("E006", f"{prop} has no value assigned", (prop,)))
        return q

    roles: dict[Role, list[Binding]] = {r: [] for r in Role}
    for a in graph.assertions:
        if a.relation is not R.S_DEPENDS_ON or not graph.is_a(a.subject, "PhysicalProperty"):
            continue
        if a.object == domain:
            bearer, surface = OBJECT, None
        elif a.object in surface_set:
            bearer, surface = SURFACE, a.object
        else:
            continue
        role = classify_property(kind, graph.cls(a.subject), bearer, graph.taxonomy)
        if role is Role.UNSUPPORTED:
            continue
        q = value_of(a.subject)
        if q is not None:
            roles[role].append(Binding(a.subject, q, surface))

    materials: dict[str, Binding] = {}
    wanted = REQUIRED_MATERIALS[kind]
    for substance in graph.objects(domain, R.MADE_OF):
        for prop in graph.subjects(R.S_DEPENDS_ON, substance):
            if not graph.is_a(prop, "MaterialProperty"):
                continue
            key = graph.taxonomy.builtin_base(graph.cls(prop))
            if key not in wanted:
                continue
            if key in materials:
                errors.append(error(
                    "E010", f"{domain} has conflicting {key} values: {materials[key].property}, {prop}",
                    (domain, materials[key].property, prop),
                ))
                continue
            q = value_of(prop)
            if q is not None:
                materials[key] = Binding(prop, q)

    temporal_extent = region = None
    if kind in TRANSIENT:
        region = _temporal_region(graph, behavior)
        if region is None:
            errors.append(error("E006", f"{behavior} occupies no temporal region; its duration is unknown", (behavior,)))
        else:
            temporal_extent = value_of(region)

    candidates = sorted((m for m in meshes if m.target == domain), key=lambda m: m.id)
    mesh = None
    if len(candidates) == 1:
        mesh = candidates[0]
    elif not candidates:
        errors.append(error("E005", f"no mesh directive discretizes domain {domain}", (behavior, domain)))
    else:
        errors.append(error(
            "E005", f"several mesh directives discretize {domain}: " + ", ".join(m.id for m in candidates),
            (behavior, domain),
        ))

    if errors:
        raise PlanError(errors + notes)
    return ProblemSpec(
        behavior=behavior,
        kind=kind,
        domain=domain,
        dirichlet=tuple(roles[Role.DIRICHLET]),
        neumann=tuple(roles[Role.NEUMANN]),
        volumetric=tuple(roles[Role.VOLUMETRIC]),
        initial=tuple(roles[Role.INITIAL]),
        materials=dict(sorted(materials.items())),
        temporal_extent=temporal_extent,
        temporal_region=region,
        timestep_count=steps,
        mesh_directive=mesh,
        surface_parents=surface_parents,
        notes=tuple(notes),
    )


def well_posedness(spec: ProblemSpec) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    boundary = spec.boundary
    bc_surfaces = {b.surface for b in boundary}

    for s in spec.top_level_surfaces():
        if s in bc_surfaces or spec.surface_descendants(s) & bc_surfaces:
            continue
        default = "traction-free" if spec.kind is PhysicsKind.STRUCTURAL else "zero flux"
        out.append(warning(
            "W001",
            f"surface {s} of {spec.domain} has no boundary condition for {spec.behavior};"
            f" defaulting to zero Neumann ({default})",
            (s,),
        ))

    conflicts: dict[frozenset, set[str]] = {}
    for s in spec.surface_parents:
        scope = {s} | spec.surface_ancestors(s)
        applying = frozenset(b.property for b in boundary if b.surface in scope)
        if len(applying) > 1:
            conflicts.setdefault(applying, set()).add(s)
    for props, where in conflicts.items():
        out.append(error(
            "E007",
            f"surfaces {', '.join(sorted(where))} carry more than one boundary condition: "
            + ", ".join(sorted(props)),
            (*sorted(where), *sorted(props)),
        ))

    if len(spec.initial) > 1:
        props = sorted(b.property for b in spec.initial)
        out.append(error(
            "E007", f"domain {spec.domain} carries more than one initial condition: " + ", ".join(props),
            (spec.domain, *props),
        ))
    if spec.kind is PhysicsKind.THERMAL and not spec.initial:
        out.append(error("E008", f"{spec.behavior} is transient but has no initial temperature", (spec.behavior,)))
    if spec.kind is PhysicsKind.STRUCTURAL and not spec.dirichlet:
        out.append(error(
            "E009", f"{spec.behavior} has no Dirichlet condition; rigid-body motion is unconstrained",
            (spec.behavior,),
        ))
    missing = [k for k in REQUIRED_MATERIALS[spec.kind] if k not in spec.materials]
    if missing:
        out.append(error(
            "E010", f"{spec.domain} lacks material properties for {spec.behavior}: " + ", ".join(missing),
            (spec.domain,),
        ))
    return sort_diagnostics(out)


@dataclass(frozen=True)
class CouplingReport:
    groups: tuple[frozenset[str], ...]
    notes: tuple[Diagnostic, ...] = ()


def _behavior_properties(graph: ModelGraph, behavior: str, kind: PhysicsKind, closure) -> set[str]:
    domain, _ = resolve_domain(graph, behavior, kind)
    if domain is None:
        return set()
    region = {domain, *_surfaces_of(graph, domain, closure)}
    return {
        a.subject for a in graph.assertions
        if a.relation is R.S_DEPENDS_ON and a.object in region
        and graph.is_a(a.subject, "PhysicalProperty")
        and graph.taxonomy.builtin_base(graph.cls(a.subject)) in KIND_PROPERTIES[kind]
    }


def detect_coupling(graph: ModelGraph) -> CouplingReport:
    """Group behaviors whose properties are linked by ``physically_related_to``."""
    behaviors = graph.instances_of("PhysicalBehavior")
    parts = parthood_closure(graph, entailed=False)
    props = {}
    for b in behaviors:
        kind = behavior_kind(graph, b)
        props[b] = _behavior_properties(graph, b, kind, parts) if kind is not None else set()

    parent = {b: b for b in behaviors}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    related = transitive_closure(graph, R.PHYSICALLY_RELATED_TO)
    for p, q in related:
        owners_p = [b for b in behaviors if p in props[b]]
        owners_q = [b for b in behaviors if q in props[b]]
        for x in owners_p:
            for y in owners_q:
                if x != y:
                    rx, ry = find(x), find(y)
                    if rx != ry:
                        parent[max(rx, ry)] = min(rx, ry)
    grouped: dict[str, set[str]] = {}
    for b in behaviors:
        grouped.setdefault(find(b), set()).add(b)
    groups = tuple(frozenset(g) for _, g in sorted(grouped.items(), key=lambda kv: min(kv[1])))
    notes = tuple(
        warning(
            "W004",
            "behaviors " + ", ".join(sorted(g)) + " are physically coupled;"
            " each is compiled as a separate problem",
            sorted(g),
        )
        for g in groups if len(g) > 1
    )
    return CouplingReport(groups, notes)


def _fresh(graph: ModelGraph, taken: set[str], base: str) -> str:
    name, n = base, 1
    while name in graph.instances or name in taken:
        n += 1
        name = f"{base}_{n}"
    taken.add(name)
    return name


def instantiate_ices(graph: ModelGraph, spec: ProblemSpec, sim: SimRequest) -> ModelGraph:
    """Copy of ``graph`` extended with the simulation-side instances for one target."""
    problems = [d for d in well_posedness(spec) if d.is_error]
    if problems:
        raise IllPosed(problems)
    taken: set[str] = set()
    prefix = f"{spec.behavior}_{sim.target}"
    instances: list[Instance] = []
    assertions: list[Assertion] = []
    values: dict[str, QuantityValue] = {}

    def ice(suffix: str, cls: str, label: str, about: Iterable[str]) -> str:
        iid = _fresh(graph, taken, f"{prefix}_{suffix}")
        instances.append(Instance(iid, cls, f"{label} ({sim.target})"))
        assertions.extend(Assertion(iid, R.IS_ABOUT, target) for target in about)
        return iid

    ice("domain", "Domain", f"domain that is about {spec.domain}", [spec.domain])

    shapes = sorted(s for s in graph.subjects(R.S_DEPENDS_ON, spec.domain) if graph.is_a(s, "Shape"))
    if shapes:
        shape = shapes[0]
    else:
        shape = _fresh(graph, taken, f"shape_of_{spec.domain}")
        instances.append(Instance(shape, "Shape", f"shape of {spec.domain}"))
        assertions.append(Assertion(shape, R.S_DEPENDS_ON, spec.domain))
    ice("mesh", "Mesh", f"mesh that is about {shape}", [shape])

    for i, b in enumerate(spec.boundary, start=1):
        ice(f"bc_{i}", "BoundaryCondition",
            f"boundary condition that is about ({spec.domain}, {b.surface}, {b.property})",
            [spec.domain, b.surface, b.property])
    for i, b in enumerate(spec.initial, start=1):
        ice(f"ic_{i}", "InitialCondition",
            f"initial condition that is about ({spec.domain}, {b.property})",
            [spec.domain, b.property])

    if spec.temporal_extent is not None and spec.temporal_region is not None:
        n = spec.timestep_count
        step = ice("timestep", "TimeStep", f"{n} equal partitions of {spec.temporal_region}",
                   [spec.temporal_region])
        values[step] = QuantityValue(spec.temporal_extent.magnitude / n, spec.temporal_extent.unit)

    return graph.extended(instances, assertions, values)


def render_plan(spec: ProblemSpec) -> str:
    """Stable text rendering of a plan (``psoc dump-plan``)."""
    lines = [
        f"behavior: {spec.behavior}",
        f"kind: {spec.kind}",
        f"domain: {spec.domain}",
        f"mesh: {spec.mesh_directive.id if spec.mesh_directive else '-'}",
    ]

    def block(title: str, bindings: Iterable[Binding]) -> None:
        bindings = list(bindings)
        lines.append(f"{title}:" + ("" if bindings else " []"))
        for b in bindings:
            where = f"{b.surface} " if b.surface else ""
            lines.append(f"  {where}{b.property} = {b.value}")

    block("dirichlet", spec.dirichlet)
    block("neumann", spec.neumann)
    block("volumetric", spec.volumetric)
    block("initial", spec.initial)
    lines.append("materials:" + ("" if spec.materials else " []"))
    for key, b in spec.materials.items():
        lines.append(f"  {key}: {b.property} = {b.value}")
    if spec.temporal_extent is not None:
        lines.append(f"temporal_extent: {spec.temporal_region} = {spec.temporal_extent}")
    else:
        lines.append("temporal_extent: -")
    lines.append(f"timestep_count: {spec.timestep_count}")
    lines.append("surfaces:")
    for s in sorted(spec.surface_parents):
        parents = spec.surface_parents[s]
        lines.append(f"  {s} < {', '.join(parents) if parents else spec.domain}")
    return "\n".join(lines) + "\n"
