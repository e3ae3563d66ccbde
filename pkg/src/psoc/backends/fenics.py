"""FEniCS (legacy dolfin) script emission.

The three templates follow the FEniCS tutorial programs for linear
elasticity, the heat equation and the incompressible Navier-Stokes channel
(IPCS splitting). Every line that assigns one of the problem's data items
ends with a ``# [item] ...`` tag naming the item and the model instance it
comes from, e.g. ``kappa = 52.0  # [kappa] thermal_conductivity_of_cast_iron (W/(m*K))``.
Template constants are written as integers so that each model value is the
only decimal literal of its kind in the script.
"""

from __future__ import annotations

import keyword
import os
import re
from dataclasses import dataclass, field

from ..core import render_number
from ..meshgen import facet_markers, tagged_surfaces
from ..plan import Binding, IllPosed, PhysicsKind, ProblemSpec, well_posedness

ITEM_TAG = re.compile(r"#\s\[(\w+)\]")

# data items per kind for a problem with one binding per role
DATA_ITEMS = {
    PhysicsKind.STRUCTURAL: frozenset({"lambda", "mu", "f", "T", "d", "mesh", "bc"}),
    PhysicsKind.THERMAL: frozenset({"T", "rho", "cp", "kappa", "f", "g", "u_D", "mesh", "bc", "u_n"}),
    PhysicsKind.FLUID: frozenset({
        "T", "mu", "rho", "f", "u_walls", "p_inflow", "p_outflow",
        "mesh", "bcu_noslip", "bcp_inflow", "bcp_outflow",
    }),
}


class FenicsError(Exception):
    pass


@dataclass
class ScriptArtifact:
    file_name: str
    body: str
    references: tuple[str, str]
    data_items: dict[str, str] = field(default_factory=dict)


def script_file_name(spec: ProblemSpec) -> str:
    return f"{spec.behavior}_fenics.py"


def data_items_in(body: str) -> set[str]:
    """Data-item names tagged in a generated script."""
    return set(ITEM_TAG.findall(body))


def _var(item: str) -> str:
    return item + "_" if keyword.iskeyword(item) else item


def _names(base: str, count: int) -> list[str]:
    return [base if i == 0 else f"{base}_{i + 1}" for i in range(count)]


def _unit(b: Binding) -> str:
    return f" ({b.value.unit})" if b.value.unit else ""


class _Writer:
    def __init__(self, spec: ProblemSpec, mesh_paths: tuple[str, str]):
        self.spec = spec
        self.lines: list[str] = []
        self.items: dict[str, str] = {}
        directive = spec.mesh_directive
        if directive is None:
            raise FenicsError(f"{spec.behavior} has no mesh directive")
        self.markers = facet_markers(directive)
        self.mesh_file, self.facet_file = (os.path.basename(p) for p in mesh_paths)

    def emit(self, *lines: str) -> None:
        self.lines.extend(lines)

    def item(self, name: str, rhs: str, source: str) -> None:
        self.items[name] = source
        self.lines.append(f"{_var(name)} = {rhs}  # [{name}] {source}")

    def value(self, name: str, b: Binding, wrap: str = "{}") -> None:
        self.item(name, wrap.format(render_number(b.value.magnitude)), f"{b.property}{_unit(b)}")

    def markers_of(self, surface: str) -> list[int]:
        spec = self.spec
        found = tagged_surfaces(surface, spec.surface_descendants(surface), spec.mesh_directive)
        return [self.markers[s] for s in found]

    def ds(self, surface: str) -> str:
        m = self.markers_of(surface)
        return f"ds({m[0]})" if len(m) == 1 else f"ds(({', '.join(map(str, m))}))"

    def dirichlet(self, space: str, value: str, bindings: list[Binding]) -> str:
        parts = [
            f"DirichletBC({space}, {value.format(_var(name))}, boundaries, {m})"
            for name, b in bindings
            for m in self.markers_of(b.surface)
        ]
        return "[" + ", ".join(parts) + "]"

    def header(self, title: str) -> None:
        spec = self.spec
        self.emit(
            f'"""{title} for {spec.behavior} (domain {spec.domain}).',
            "",
            "Generated by psoc for the legacy FEniCS (dolfin) interface.",
            '"""',
            "from fenics import *",
            "",
            "# Mesh and boundary markers: "
            + ", ".join(f"{s}={m}" for s, m in self.markers.items()),
        )
        self.item("mesh", f'Mesh("{self.mesh_file}")', f"mesh of {spec.domain} ({spec.mesh_directive.id})")
        self.emit(
            f'mvc = MeshValueCollection("size_t", mesh, "{self.facet_file}")',
            'boundaries = MeshFunction("size_t", mesh, mvc)',
            'ds = Measure("ds", domain=mesh, subdomain_data=boundaries)',
            "n = FacetNormal(mesh)",
            "",
        )

    def time(self) -> None:
        spec = self.spec
        self.emit("# Time discretization")
        self.item("T", render_number(spec.temporal_extent.magnitude),
                  f"{spec.temporal_region}" + (f" ({spec.temporal_extent.unit})" if spec.temporal_extent.unit else ""))
        self.emit(f"num_steps = {spec.timestep_count}", "dt = T / num_steps", "")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _structural(w: _Writer) -> None:
    spec = w.spec
    w.header("Linear elasticity problem")
    w.emit("# Material parameters")
    w.value("lambda", spec.materials["ElasticModulus"])
    w.value("mu", spec.materials["ShearModulus"])
    w.emit("", "# Loads and prescribed displacements")
    body = list(zip(_names("f", len(spec.volumetric)), spec.volumetric))
    traction = list(zip(_names("T", len(spec.neumann)), spec.neumann))
    fixed = list(zip(_names("d", len(spec.dirichlet)), spec.dirichlet))
    for name, b in body:
        w.value(name, b, "Constant((0, 0, {}))")
    for name, b in traction:
        w.value(name, b)
    for name, b in fixed:
        w.value(name, b)
    w.emit("", 'V = VectorFunctionSpace(mesh, "P", 1)')
    w.item("bc", w.dirichlet("V", "Constant(({0}, {0}, {0}))", fixed),
           "; ".join(f"{spec.domain} {b.surface} {b.property}" for _, b in fixed))
    w.emit(
        "",
        "",
        "def epsilon(u):",
        "    return sym(nabla_grad(u))",
        "",
        "",
        "def sigma(u):",
        "    return lambda_*nabla_div(u)*Identity(3) + 2*mu*epsilon(u)",
        "",
        "",
        "u = TrialFunction(V)",
        "v = TestFunction(V)",
        "a = inner(sigma(u), epsilon(v))*dx",
    )
    terms = [f"dot({name}, v)*dx" for name, _ in body]
    terms += [f"dot({name}*n, v)*{w.ds(b.surface)}" for name, b in traction]
    w.emit(
        "L = " + (" + ".join(terms) if terms else "dot(Constant((0, 0, 0)), v)*dx"),
        "",
        "u = Function(V)",
        "solve(a == L, u, bc)",
        f'File("{spec.behavior}/displacement.pvd") << u',
    )


def _thermal(w: _Writer) -> None:
    spec = w.spec
    w.header("Transient heat transfer problem")
    w.time()
    w.emit("# Material parameters")
    w.value("rho", spec.materials["Density"])
    w.value("cp", spec.materials["SpecificHeatCapacity"])
    w.value("kappa", spec.materials["ThermalConductivity"])
    w.emit("", "# Sources and boundary values")
    source = list(zip(_names("f", len(spec.volumetric)), spec.volumetric))
    flux = list(zip(_names("g", len(spec.neumann)), spec.neumann))
    fixed = list(zip(_names("u_D", len(spec.dirichlet)), spec.dirichlet))
    for name, b in source + flux + fixed:
        w.value(name, b)
    w.emit("", 'V = FunctionSpace(mesh, "P", 1)')
    if fixed:
        w.item("bc", w.dirichlet("V", "Constant({0})", fixed),
               "; ".join(f"{spec.domain} {b.surface} {b.property}" for _, b in fixed))
    else:
        w.emit("bc = []")
    initial = spec.initial[0]
    w.value("u_n", initial, "interpolate(Constant({}), V)")
    terms = ["rho*cp*(u - u_n)/dt*v*dx", "kappa*dot(grad(u), grad(v))*dx"]
    terms += [f"{name}*v*dx" for name, _ in source]
    terms += [f"{name}*v*{w.ds(b.surface)}" for name, b in flux]
    form = terms[0] + " + " + terms[1] + "".join(f" - {t}" for t in terms[2:])
    w.emit(
        "",
        "u = TrialFunction(V)",
        "v = TestFunction(V)",
        f"F = {form}",
        "a, L = lhs(F), rhs(F)",
        "",
        "u = Function(V)",
        f'vtkfile = File("{spec.behavior}/temperature.pvd")',
        "t = 0",
        "for step in range(num_steps):",
        "    t += dt",
        "    solve(a == L, u, bc)",
        "    vtkfile << (u, t)",
        "    u_n.assign(u)",
    )


def _fluid(w: _Writer) -> None:
    spec = w.spec
    w.header("Incompressible Navier-Stokes problem")
    w.time()
    w.emit("# Material parameters")
    w.value("mu", spec.materials["Viscosity"])
    w.value("rho", spec.materials["Density"])
    w.emit("", "# Body force and boundary values")
    body = list(zip(_names("f", len(spec.volumetric)), spec.volumetric))
    walls = list(zip(_names("u_walls", len(spec.dirichlet)), spec.dirichlet))
    # flow runs from the highest prescribed pressure to the others
    pressures = sorted(spec.neumann, key=lambda b: (-b.value.magnitude, b.surface))
    inflow = [("p_inflow", pressures[0])] if pressures else []
    outflow = list(zip(_names("p_outflow", len(pressures) - 1), pressures[1:]))
    for name, b in body:
        w.value(name, b, "Constant((0, 0, {}))")
    for name, b in walls + inflow + outflow:
        w.value(name, b)
    initial = list(zip(_names("u_0", len(spec.initial)), spec.initial))
    for name, b in initial:
        w.value(name, b)
    w.emit(
        "",
        'V = VectorFunctionSpace(mesh, "P", 2)',
        'Q = FunctionSpace(mesh, "P", 1)',
        "",
    )

    def src(b: Binding) -> str:
        return f"{spec.domain} {b.surface} {b.property}"

    bcu, bcp = [], []
    for name, b in walls:
        bc_name = name.replace("u_walls", "bcu_noslip")
        w.item(bc_name, w.dirichlet("V", "Constant(({0}, {0}, {0}))", [(name, b)]), src(b))
        bcu.append(bc_name)
    for name, b in inflow + outflow:
        bc_name = "bc" + name
        w.item(bc_name, w.dirichlet("Q", "Constant({0})", [(name, b)]), src(b))
        bcp.append(bc_name)
    w.emit(
        "bcu = " + (" + ".join(bcu) if bcu else "[]"),
        "bcp = " + (" + ".join(bcp) if bcp else "[]"),
        "",
        "u = TrialFunction(V)",
        "v = TestFunction(V)",
        "p = TrialFunction(Q)",
        "q = TestFunction(Q)",
        "",
    )
    if initial:
        name, _ = initial[0]
        w.emit(f"u_n = interpolate(Constant(({name}, {name}, {name})), V)")
    else:
        w.emit("u_n = Function(V)  # starts from rest")
    f_terms = "".join(f" - dot({name}, v)*dx" for name, _ in body)
    w.emit(
        "u_ = Function(V)",
        "p_n = Function(Q)",
        "p_ = Function(Q)",
        "",
        "U = (u_n + u)/2",
        "k = Constant(dt)",
        "",
        "",
        "def epsilon(u):",
        "    return sym(nabla_grad(u))",
        "",
        "",
        "def sigma(u, p):",
        "    return 2*mu*epsilon(u) - p*Identity(len(u))",
        "",
        "",
        "F1 = rho*dot((u - u_n) / k, v)*dx \\",
        "    + rho*dot(dot(u_n, nabla_grad(u_n)), v)*dx \\",
        "    + inner(sigma(U, p_n), epsilon(v))*dx \\",
        f"    + dot(p_n*n, v)*ds - dot(mu*nabla_grad(U)*n, v)*ds{f_terms}",
        "a1 = lhs(F1)",
        "L1 = rhs(F1)",
        "a2 = dot(nabla_grad(p), nabla_grad(q))*dx",
        "L2 = dot(nabla_grad(p_n), nabla_grad(q))*dx - (1/k)*div(u_)*q*dx",
        "a3 = dot(u, v)*dx",
        "L3 = dot(u_, v)*dx - k*dot(nabla_grad(p_ - p_n), v)*dx",
        "",
        "A1 = assemble(a1)",
        "A2 = assemble(a2)",
        "A3 = assemble(a3)",
        "[bc.apply(A1) for bc in bcu]",
        "[bc.apply(A2) for bc in bcp]",
        "",
        f'ufile = File("{spec.behavior}/velocity.pvd")',
        f'pfile = File("{spec.behavior}/pressure.pvd")',
        "t = 0",
        "for step in range(num_steps):",
        "    t += dt",
        "    b1 = assemble(L1)",
        "    [bc.apply(b1) for bc in bcu]",
        "    solve(A1, u_.vector(), b1)",
        "    b2 = assemble(L2)",
        "    [bc.apply(b2) for bc in bcp]",
        "    solve(A2, p_.vector(), b2)",
        "    b3 = assemble(L3)",
        "    solve(A3, u_.vector(), b3)",
        "    ufile << (u_, t)",
        "    pfile << (p_, t)",
        "    u_n.assign(u_)",
        "    p_n.assign(p_)",
    )


_TEMPLATES = {
    PhysicsKind.STRUCTURAL: _structural,
    PhysicsKind.THERMAL: _thermal,
    PhysicsKind.FLUID: _fluid,
}


def emit_script(spec: ProblemSpec, mesh_paths: tuple[str, str]) -> ScriptArtifact:
    problems = [d for d in well_posedness(spec) if d.is_error]
    if problems:
        raise IllPosed(problems)
    w = _Writer(spec, mesh_paths)
    _TEMPLATES[spec.kind](w)
    return ScriptArtifact(script_file_name(spec), w.text(), tuple(mesh_paths), w.items)
