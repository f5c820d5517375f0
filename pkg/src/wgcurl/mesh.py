"""Uniform hexahedral and tetrahedral partitions of the unit cube.

The data model is a general polyhedral element/face incidence structure
with planar faces; the generators only produce the two uniform families
(axis-aligned cubes and the 6-tet Kuhn split of each cube).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HEX = "hexahedron"
TET = "tetrahedron"

# Kuhn split of the unit cube: each tet walks from (0,0,0) to (1,1,1)
# adding one coordinate step at a time, so all six share the main diagonal.
_KUHN_ORDERS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


@dataclass(frozen=True)
class Vertex:
    id: int
    coords: np.ndarray


@dataclass
class Face:
    id: int
    vertex_loop: tuple[int, ...]
    area: float
    normal: np.ndarray          # unit, points out of the lower-id neighbor
    centroid: np.ndarray
    diameter: float
    neighbors: tuple[int, ...]  # 1 (boundary) or 2 (interior) element ids

    @property
    def is_boundary(self) -> bool:
        return len(self.neighbors) == 1


@dataclass
class Element:
    id: int
    shape: str
    vertices: tuple[int, ...]
    faces: tuple[int, ...]
    face_signs: tuple[int, ...]  # +1 if face normal is outward for this element
    volume: float
    diameter: float
    centroid: np.ndarray


@dataclass
class Mesh:
    vertices: list[Vertex]
    faces: list[Face]
    elements: list[Element]
    level: int
    family: str

    @property
    def h(self) -> float:
        return max(T.diameter for T in self.elements)

    def outward_normal(self, elem: Element, local_face: int) -> np.ndarray:
        f = self.faces[elem.faces[local_face]]
        return elem.face_signs[local_face] * f.normal


def _polygon_geometry(coords: np.ndarray):
    """Area, unit normal (Newell), centroid and diameter of a planar polygon."""
    n = np.zeros(3)
    m = len(coords)
    for i in range(m):
        a, b = coords[i], coords[(i + 1) % m]
        n += np.cross(a, b)
    area = 0.5 * np.linalg.norm(n)
    if area <= 0.0:
        raise GeometryError("degenerate face (zero area)")
    normal = n / np.linalg.norm(n)
    centroid = coords.mean(axis=0)
    diam = max(np.linalg.norm(coords[i] - coords[j])
               for i in range(m) for j in range(i + 1, m))
    return area, normal, centroid, diam


class GeometryError(ValueError):
    pass


def _build_mesh(level, family, points, cells, cell_faces):
    """Assemble the incidence structure from per-cell face vertex loops.

    cell_faces(cell_vertex_ids) yields the faces of one cell as vertex
    loops oriented outward.
    """
    vertices = [Vertex(i, points[i]) for i in range(len(points))]

    face_index: dict[tuple, int] = {}
    face_loops: list[tuple[int, ...]] = []
    face_neighbors: list[list[int]] = []
    elem_face_ids: list[list[int]] = []

    for eid, cell in enumerate(cells):
        fids = []
        for loop in cell_faces(cell):
            key = tuple(sorted(loop))
            fid = face_index.get(key)
            if fid is None:
                fid = len(face_loops)
                face_index[key] = fid
                face_loops.append(tuple(loop))
                face_neighbors.append([])
            face_neighbors[fid].append(eid)
            fids.append(fid)
        elem_face_ids.append(fids)

    faces = []
    for fid, loop in enumerate(face_loops):
        coords = points[list(loop)]
        area, normal, centroid, diam = _polygon_geometry(coords)
        nbrs = tuple(sorted(face_neighbors[fid]))
        # orient out of the lower-id neighbor
        owner_centroid = points[list(cells[nbrs[0]])].mean(axis=0)
        if np.dot(centroid - owner_centroid, normal) < 0:
            normal = -normal
        faces.append(Face(fid, loop, area, normal, centroid, diam, nbrs))

    elements = []
    for eid, cell in enumerate(cells):
        coords = points[list(cell)]
        centroid = coords.mean(axis=0)
        diam = max(np.linalg.norm(coords[i] - coords[j])
                   for i in range(len(cell)) for j in range(i + 1, len(cell)))
        signs = []
        vol = 0.0
        for fid in elem_face_ids[eid]:
            f = faces[fid]
            s = 1 if np.dot(f.centroid - centroid, f.normal) > 0 else -1
            signs.append(s)
            vol += s * f.area * np.dot(f.centroid, f.normal) / 3.0
        elements.append(Element(eid, family, tuple(cell), tuple(elem_face_ids[eid]),
                                tuple(signs), vol, diam, centroid))

    return Mesh(vertices, faces, elements, level, family)


def _grid_points(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    pts = np.empty(((n + 1) ** 3, 3))
    idx = 0
    for k in range(n + 1):
        for j in range(n + 1):
            for i in range(n + 1):
                pts[idx] = (xs[i], xs[j], xs[k])
                idx += 1
    return pts


def _vid(i, j, k, n):
    return i + (n + 1) * (j + (n + 1) * k)


def generate_hex_mesh(level: int) -> Mesh:
    """Uniform n^3 grid of axis-aligned cubes, n = 2^(level-1)."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    n = 2 ** (level - 1)
    points = _grid_points(n)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                # standard hexahedron corner ordering, bottom then top
                cells.append((_vid(i, j, k, n), _vid(i + 1, j, k, n),
                              _vid(i + 1, j + 1, k, n), _vid(i, j + 1, k, n),
                              _vid(i, j, k + 1, n), _vid(i + 1, j, k + 1, n),
                              _vid(i + 1, j + 1, k + 1, n), _vid(i, j + 1, k + 1, n)))

    quad_faces = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
                  (2, 3, 7, 6), (1, 2, 6, 5), (3, 0, 4, 7)]

    def cell_faces(cell):
        return [tuple(cell[i] for i in f) for f in quad_faces]

    return _build_mesh(level, HEX, points, cells, cell_faces)


def generate_tet_mesh(level: int) -> Mesh:
    """Each cube of the level's hex grid split into 6 Kuhn tetrahedra.

    All tets of a cube share the cube's main diagonal (low corner to high
    corner), which makes the triangulations of neighboring cubes match.
    """
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    n = 2 ** (level - 1)
    points = _grid_points(n)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                lo = np.array((i, j, k))
                for order in _KUHN_ORDERS:
                    corner = lo.copy()
                    tet = [_vid(*corner, n)]
                    for ax in order:
                        corner[ax] += 1
                        tet.append(_vid(*corner, n))
                    cells.append(tuple(tet))

    def cell_faces(cell):
        return [tuple(cell[i] for i in f)
                for f in [(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)]]

    return _build_mesh(level, TET, points, cells, cell_faces)


def face_frame(face: Face) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic right-handed orthonormal frame (t1, t2, n) of a face.

    The frame is a function of the face normal only, so both adjacent
    elements see the same tangential basis.
    """
    if face.area <= 0.0:
        raise GeometryError(f"face {face.id} has non-positive area")
    n = face.normal
    a = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t1 = np.cross(a, n)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2, n


def validate(mesh: Mesh) -> list[str]:
    """Check the incidence/geometry invariants; returns violation messages."""
    out = []
    for f in mesh.faces:
        if len(f.neighbors) not in (1, 2):
            out.append(f"face {f.id}: non-manifold, {len(f.neighbors)} neighbors")
        if abs(np.linalg.norm(f.normal) - 1.0) > 1e-14:
            out.append(f"face {f.id}: normal not unit")
        coords = np.array([mesh.vertices[v].coords for v in f.vertex_loop])
        off = np.abs((coords - f.centroid) @ f.normal)
        if off.max() > 1e-14:
            out.append(f"face {f.id}: vertex loop not planar ({off.max():.2e})")
    for T in mesh.elements:
        if T.volume <= 0:
            out.append(f"element {T.id}: non-positive volume")
        if T.diameter <= 0:
            out.append(f"element {T.id}: non-positive diameter")
        closure = np.zeros(3)
        surf = 0.0
        for fid, s in zip(T.faces, T.face_signs):
            f = mesh.faces[fid]
            closure += s * f.area * f.normal
            surf += f.area
            if T.id not in f.neighbors:
                out.append(f"element {T.id}: face {fid} does not list it")
        if np.linalg.norm(closure) > 1e-12 * surf:
            out.append(f"element {T.id}: faces do not close up")
        for fid, s in zip(T.faces, T.face_signs):
            f = mesh.faces[fid]
            if min(f.neighbors) == T.id and s != 1:
                out.append(f"face {fid}: normal not outward for owner {T.id}")
    total = sum(T.volume for T in mesh.elements)
    if abs(total - 1.0) > 1e-12:
        out.append(f"element volumes sum to {total!r}, not 1")
    return out


def dump_mesh(mesh: Mesh, path: str) -> None:
    """Write the structured text representation (see load_mesh)."""
    with open(path, "w") as fp:
        fp.write("# wgcurl mesh v1\n")
        fp.write(f"family {mesh.family}\n")
        fp.write(f"level {mesh.level}\n")
        fp.write(f"vertices {len(mesh.vertices)}\n")
        for v in mesh.vertices:
            fp.write(f"{v.id} {float(v.coords[0])!r} {float(v.coords[1])!r} "
                     f"{float(v.coords[2])!r}\n")
        fp.write(f"faces {len(mesh.faces)}\n")
        for f in mesh.faces:
            loop = " ".join(map(str, f.vertex_loop))
            nbrs = " ".join(map(str, f.neighbors))
            fp.write(f"{f.id} loop {len(f.vertex_loop)} {loop} "
                     f"neighbors {len(f.neighbors)} {nbrs}\n")
        fp.write(f"elements {len(mesh.elements)}\n")
        for T in mesh.elements:
            pairs = " ".join(f"{fid} {s}" for fid, s in zip(T.faces, T.face_signs))
            verts = " ".join(map(str, T.vertices))
            fp.write(f"{T.id} {T.shape} verts {len(T.vertices)} {verts} "
                     f"faces {len(T.faces)} {pairs}\n")


def load_mesh(path: str) -> Mesh:
    """Read a mesh written by dump_mesh; geometry is recomputed."""
    with open(path) as fp:
        tokens = [ln.split() for ln in fp if ln.strip() and not ln.startswith("#")]
    it = iter(tokens)
    family = next(it)[1]
    level = int(next(it)[1])
    nv = int(next(it)[1])
    points = np.empty((nv, 3))
    for _ in range(nv):
        t = next(it)
        points[int(t[0])] = [float(t[1]), float(t[2]), float(t[3])]
    nf = int(next(it)[1])
    loops = [None] * nf
    for _ in range(nf):
        t = next(it)
        fid = int(t[0])
        m = int(t[2])
        loops[fid] = tuple(int(s) for s in t[3:3 + m])
    ne = int(next(it)[1])
    cells = [None] * ne
    cell_fids = [None] * ne
    for _ in range(ne):
        t = next(it)
        eid = int(t[0])
        nvert = int(t[3])
        cells[eid] = tuple(int(s) for s in t[4:4 + nvert])
        rest = t[4 + nvert:]
        nfc = int(rest[1])
        cell_fids[eid] = tuple(int(rest[2 + 2 * i]) for i in range(nfc))

    counter = iter(range(ne))

    def cell_faces(cell):
        return [loops[fid] for fid in cell_fids[next(counter)]]

    # rebuild via the same path as the generators so all invariants hold
    mesh = _build_mesh(level, family, points, cells, cell_faces)
    return mesh
