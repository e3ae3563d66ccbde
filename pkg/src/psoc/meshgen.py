"""Structured box meshes with tagged boundary faces.

Hexahedra follow the usual right-handed corner order (bottom face
counter-clockwise seen from +z, then the top face). Each hex splits into
six tetrahedra around its main diagonal; because every quad face is cut
along the diagonal from its lowest to its highest corner, neighbouring
cells triangulate their shared face identically and the tet mesh is
conforming.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable

from .dsl import FACE_NAMES, MeshDirective

Vec = tuple[float, float, float]


class MeshError(Exception):
    pass


class InvalidDivisions(MeshError):
    pass


class UntaggedFaceRequired(MeshError):
    pass


@dataclass
class MeshData:
    vertices: list[Vec]
    hexes: list[tuple[int, ...]]
    boundary_faces: dict[str, list[tuple[int, int, int, int]]]
    tets: list[tuple[int, int, int, int]] | None = None
    facet_markers: dict[str, int] = field(default_factory=dict)


def _coord(length: float, i: int, n: int) -> float:
    return length if i == n else length * i / n


def box_hex_mesh(extent: Iterable[float], divisions: Iterable[int]) -> MeshData:
    lx, ly, lz = (float(e) for e in extent)
    nx, ny, nz = divisions
    if min(nx, ny, nz) < 1 or not all(isinstance(n, int) for n in (nx, ny, nz)):
        raise InvalidDivisions(f"divisions must be positive integers, got {(nx, ny, nz)}")
    if min(lx, ly, lz) <= 0:
        raise MeshError(f"extent must be positive, got {(lx, ly, lz)}")

    def v(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    vertices = [
        (_coord(lx, i, nx), _coord(ly, j, ny), _coord(lz, k, nz))
        for k in range(nz + 1) for j in range(ny + 1) for i in range(nx + 1)
    ]
    hexes = [
        (v(i, j, k), v(i + 1, j, k), v(i + 1, j + 1, k), v(i, j + 1, k),
         v(i, j, k + 1), v(i + 1, j, k + 1), v(i + 1, j + 1, k + 1), v(i, j + 1, k + 1))
        for k in range(nz) for j in range(ny) for i in range(nx)
    ]
    # outward-oriented quads; the first and third corners are the lowest and highest
    faces = {
        "x_min": [(v(0, j, k), v(0, j, k + 1), v(0, j + 1, k + 1), v(0, j + 1, k))
                  for k in range(nz) for j in range(ny)],
        "x_max": [(v(nx, j, k), v(nx, j + 1, k), v(nx, j + 1, k + 1), v(nx, j, k + 1))
                  for k in range(nz) for j in range(ny)],
        "y_min": [(v(i, 0, k), v(i + 1, 0, k), v(i + 1, 0, k + 1), v(i, 0, k + 1))
                  for k in range(nz) for i in range(nx)],
        "y_max": [(v(i, ny, k), v(i, ny, k + 1), v(i + 1, ny, k + 1), v(i + 1, ny, k))
                  for k in range(nz) for i in range(nx)],
        "z_min": [(v(i, j, 0), v(i, j + 1, 0), v(i + 1, j + 1, 0), v(i + 1, j, 0))
                  for j in range(ny) for i in range(nx)],
        "z_max": [(v(i, j, nz), v(i + 1, j, nz), v(i + 1, j + 1, nz), v(i, j + 1, nz))
                  for j in range(ny) for i in range(nx)],
    }
    return MeshData(vertices, hexes, faces)


_CORNER = {(0, 0, 0): 0, (1, 0, 0): 1, (1, 1, 0): 2, (0, 1, 0): 3,
           (0, 0, 1): 4, (1, 0, 1): 5, (1, 1, 1): 6, (0, 1, 1): 7}


def _signed_volume6(a: Vec, b: Vec, c: Vec, d: Vec) -> float:
    u = [b[i] - a[i] for i in range(3)]
    w = [c[i] - a[i] for i in range(3)]
    t = [d[i] - a[i] for i in range(3)]
    return (u[0] * (w[1] * t[2] - w[2] * t[1])
            - u[1] * (w[0] * t[2] - w[2] * t[0])
            + u[2] * (w[0] * t[1] - w[1] * t[0]))


def _kuhn_pattern() -> list[tuple[int, int, int, int]]:
    corners = {idx: pos for pos, idx in _CORNER.items()}
    pattern = []
    for axes in permutations(range(3)):
        p = [0, 0, 0]
        path = [tuple(p)]
        for ax in axes:
            p[ax] = 1
            path.append(tuple(p))
        tet = [_CORNER[q] for q in path]
        if _signed_volume6(*(corners[i] for i in tet)) < 0:
            tet[1], tet[2] = tet[2], tet[1]
        pattern.append(tuple(tet))
    return pattern


_KUHN = _kuhn_pattern()


def hex_to_tet(mesh: MeshData) -> MeshData:
    if not mesh.hexes:
        raise MeshError("mesh has no hexahedra to split")
    tets = [tuple(h[i] for i in pattern) for h in mesh.hexes for pattern in _KUHN]
    return MeshData(mesh.vertices, mesh.hexes, mesh.boundary_faces, tets, dict(mesh.facet_markers))


def facet_markers(directive: MeshDirective) -> dict[str, int]:
    """1-based marker per tagged surface, in lexical surface-id order."""
    return {s: i for i, s in enumerate(directive.surfaces(), start=1)}


def mesh_for(directive: MeshDirective, tets: bool = False) -> MeshData:
    mesh = box_hex_mesh(directive.extent, directive.divisions)
    mesh.facet_markers = facet_markers(directive)
    return hex_to_tet(mesh) if tets else mesh


def tagged_surfaces(surface: str, descendants: Iterable[str], directive: MeshDirective) -> list[str]:
    """Tagged surfaces covering ``surface``: itself and any tagged descendants."""
    tagged = set(directive.face_tags.values())
    found = sorted(({surface} | set(descendants)) & tagged)
    if not found:
        raise UntaggedFaceRequired(
            f"surface {surface} is not tagged on any face of mesh {directive.id}"
        )
    return found


def boundary_triangles(quad: tuple[int, int, int, int]) -> list[tuple[int, int, int]]:
    a, b, c, d = quad
    return [(a, b, c), (a, c, d)]


def volume(a: Vec, b: Vec, c: Vec, d: Vec) -> float:
    return _signed_volume6(a, b, c, d) / 6.0


def _num(x: float) -> str:
    return repr(float(x))


def mesh_paths(directive: MeshDirective, out_dir: str) -> tuple[str, str]:
    return (
        os.path.join(out_dir, f"{directive.id}.xml"),
        os.path.join(out_dir, f"{directive.id}_facets.xml"),
    )


def write_mesh_files(
    mesh: MeshData, directive: MeshDirective, out_dir: str, required: Iterable[str] = ()
) -> tuple[str, str]:
    """Write the DOLFIN XML mesh and its facet marker collection.

    Cells are written with ascending vertex indices (DOLFIN's expected
    ordering), so ``local_entity`` is the position of the vertex opposite the
    facet within the sorted cell.
    """
    if mesh.tets is None:
        raise MeshError("write_mesh_files needs a tetrahedral mesh; call hex_to_tet first")
    for face in directive.face_tags:
        if face not in FACE_NAMES or face not in mesh.boundary_faces:
            raise MeshError(f"unknown face {face!r}")
    tagged = set(directive.face_tags.values())
    for s in required:
        if s not in tagged:
            raise UntaggedFaceRequired(f"surface {s} is not tagged on any face of mesh {directive.id}")
    markers = facet_markers(directive)

    cells = [tuple(sorted(t)) for t in mesh.tets]
    lookup: dict[frozenset, tuple[int, int]] = {}
    for ci, cell in enumerate(cells):
        for local, opposite in enumerate(cell):
            lookup.setdefault(frozenset(x for x in cell if x != opposite), (ci, local))

    entries = []
    for face in FACE_NAMES:
        surface = directive.face_tags.get(face)
        value = markers[surface] if surface is not None else 0
        for quad in mesh.boundary_faces[face]:
            for tri in boundary_triangles(quad):
                try:
                    ci, local = lookup[frozenset(tri)]
                except KeyError:
                    raise MeshError(f"boundary triangle {tri} matches no tetrahedron face") from None
                entries.append((ci, local, value))
    entries.sort()

    mesh_lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<dolfin xmlns:dolfin="http://fenicsproject.org">',
        '  <mesh celltype="tetrahedron" dim="3">',
        f'    <vertices size="{len(mesh.vertices)}">',
    ]
    mesh_lines += [
        f'      <vertex index="{i}" x="{_num(x)}" y="{_num(y)}" z="{_num(z)}" />'
        for i, (x, y, z) in enumerate(mesh.vertices)
    ]
    mesh_lines += ["    </vertices>", f'    <cells size="{len(cells)}">']
    mesh_lines += [
        f'      <tetrahedron index="{i}" v0="{a}" v1="{b}" v2="{c}" v3="{d}" />'
        for i, (a, b, c, d) in enumerate(cells)
    ]
    mesh_lines += ["    </cells>", "  </mesh>", "</dolfin>"]

    facet_lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<dolfin xmlns:dolfin="http://fenicsproject.org">',
        f'  <mesh_value_collection name="boundaries" type="uint" dim="2" size="{len(entries)}">',
    ]
    facet_lines += [
        f'    <value cell_index="{ci}" local_entity="{local}" value="{value}" />'
        for ci, local, value in entries
    ]
    facet_lines += ["  </mesh_value_collection>", "</dolfin>"]

    mesh_path, facet_path = mesh_paths(directive, out_dir)
    os.makedirs(out_dir, exist_ok=True)
    for path, lines in ((mesh_path, mesh_lines), (facet_path, facet_lines)):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return mesh_path, facet_path
