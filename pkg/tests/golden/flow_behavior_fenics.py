"""Incompressible Navier-Stokes problem for flow_behavior (domain fluid).

Generated by psoc for the legacy FEniCS (dolfin) interface.
"""
from fenics import *

# Mesh and boundary markers: fsi=1, fso=2, fsw=3
mesh = Mesh("fluid_mesh.xml")  # [mesh] mesh of fluid (fluid_mesh)
mvc = MeshValueCollection("size_t", mesh, "fluid_mesh_facets.xml")
boundaries = MeshFunction("size_t", mesh, mvc)
ds = Measure("ds", domain=mesh, subdomain_data=boundaries)
n = FacetNormal(mesh)

# Time discretization
T = 3600.0  # [T] fluid_flow_duration (s)
num_steps = 50
dt = T / num_steps

# Material parameters
mu = 0.06  # [mu] viscosity_of_oil (Pa*s)
rho = 850.0  # [rho] density_of_oil (kg/m^3)

# Body force and boundary values
f = Constant((0, 0, -8338.5))  # [f] body_force_throughout_fluid (N/m^3)
u_walls = 0.0  # [u_walls] velocity_at_fsw (m/s)
p_inflow = 8000.0  # [p_inflow] pressure_at_fsi (Pa)
p_outflow = 0.0  # [p_outflow] pressure_at_fso (Pa)

V = VectorFunctionSpace(mesh, "P", 2)
Q = FunctionSpace(mesh, "P", 1)

bcu_noslip = [DirichletBC(V, Constant((u_walls, u_walls, u_walls)), boundaries, 3)]  # [bcu_noslip] fluid fsw velocity_at_fsw
bcp_inflow = [DirichletBC(Q, Constant(p_inflow), boundaries, 1)]  # [bcp_inflow] fluid fsi pressure_at_fsi
bcp_outflow = [DirichletBC(Q, Constant(p_outflow), boundaries, 2)]  # [bcp_outflow] fluid fso pressure_at_fso
bcu = bcu_noslip
bcp = bcp_inflow + bcp_outflow

u = TrialFunction(V)
v = TestFunction(V)
p = TrialFunction(Q)
q = TestFunction(Q)

u_n = Function(V)  # starts from rest
u_ = Function(V)
p_n = Function(Q)
p_ = Function(Q)

U = (u_n + u)/2
k = Constant(dt)


def epsilon(u):
    return sym(nabla_grad(u))


def sigma(u, p):
    return 2*mu*epsilon(u) - p*Identity(len(u))


F1 = rho*dot((u - u_n) / k, v)*dx \
    + rho*dot(dot(u_n, nabla_grad(u_n)), v)*dx \
    + inner(sigma(U, p_n), epsilon(v))*dx \
    + dot(p_n*n, v)*ds - dot(mu*nabla_grad(U)*n, v)*ds - dot(f, v)*dx
a1 = lhs(F1)
L1 = rhs(F1)
a2 = dot(nabla_grad(p), nabla_grad(q))*dx
L2 = dot(nabla_grad(p_n), nabla_grad(q))*dx - (1/k)*div(u_)*q*dx
a3 = dot(u, v)*dx
L3 = dot(u_, v)*dx - k*dot(nabla_grad(p_ - p_n), v)*dx

A1 = assemble(a1)
A2 = assemble(a2)
A3 = assemble(a3)
[bc.apply(A1) for bc in bcu]
[bc.apply(A2) for bc in bcp]

ufile = File("flow_behavior/velocity.pvd")
pfile = File("flow_behavior/pressure.pvd")
t = 0
for step in range(num_steps):
    t += dt
    b1 = assemble(L1)
    [bc.apply(b1) for bc in bcu]
    solve(A1, u_.vector(), b1)
    b2 = assemble(L2)
    [bc.apply(b2) for bc in bcp]
    solve(A2, p_.vector(), b2)
    b3 = assemble(L3)
    solve(A3, u_.vector(), b3)
    ufile << (u_, t)
    pfile << (p_, t)
    u_n.assign(u_)
    p_n.assign(p_)
