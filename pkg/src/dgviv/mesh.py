"""Triangular meshes: Gmsh MSH 2.2 import, built-in generators, face
connectivity/geometry, and rigid translation for the moving-body case."""

from dataclasses import dataclass, field

import numpy as np

INTERIOR = 0
WALL = 1
FARFIELD = 2

_TAG_NAMES = {"wall": WALL, "farfield": FARFIELD}


class MeshError(Exception):
    pass


@dataclass
class Mesh:
    vertices: np.ndarray        # (nv, 2)
    triangles: np.ndarray       # (nt, 3) CCW vertex indices
    # faces
    f_left: np.ndarray          # (nf,) element index
    f_lloc: np.ndarray          # (nf,) local face 0..2 in left element
    f_right: np.ndarray         # (nf,) element index or -1 for boundary
    f_rloc: np.ndarray
    f_tag: np.ndarray           # INTERIOR / WALL / FARFIELD
    f_normal: np.ndarray        # (nf, 2) unit, outward from left element
    f_len: np.ndarray
    # per-element geometry
    area: np.ndarray
    inradius: np.ndarray
    jac: np.ndarray             # (nt, 2, 2) affine Jacobian of T_K
    jac_inv: np.ndarray
    det_jac: np.ndarray

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def n_faces(self):
        return self.f_left.shape[0]

    def boundary_faces(self, tag=None):
        if tag is None:
            return np.nonzero(self.f_right < 0)[0]
        return np.nonzero(self.f_tag == tag)[0]

    def interior_faces(self):
        return np.nonzero(self.f_right >= 0)[0]

    def element_vertices(self, k):
        return self.vertices[self.triangles[k]]


def _element_geometry(vertices, triangles):
    v = vertices[triangles]                       # (nt, 3, 2)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    det2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det2
    if np.any(area <= 0):
        raise MeshError("non-positive element area (triangle not CCW or degenerate)")
    jac = 0.5 * np.stack([e1, e2], axis=-1)       # d x / d(r,s)
    det_jac = 0.25 * det2                         # = |K| / |K_hat|
    jac_inv = np.empty_like(jac)
    jac_inv[:, 0, 0] = jac[:, 1, 1]
    jac_inv[:, 0, 1] = -jac[:, 0, 1]
    jac_inv[:, 1, 0] = -jac[:, 1, 0]
    jac_inv[:, 1, 1] = jac[:, 0, 0]
    jac_inv /= det_jac[:, None, None]
    per = (np.linalg.norm(e1, axis=1) + np.linalg.norm(e2, axis=1)
           + np.linalg.norm(v[:, 2] - v[:, 1], axis=1))
    inradius = 2.0 * area / per
    return area, inradius, jac, jac_inv, det_jac


def build_mesh(vertices, triangles, boundary_tags):
    """Assemble a Mesh from raw arrays.

    boundary_tags maps a frozenset vertex pair of each boundary edge to
    WALL or FARFIELD; every boundary edge must be covered.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    area, inradius, jac, jac_inv, det_jac = _element_geometry(vertices, triangles)

    edge_map = {}
    for t in range(triangles.shape[0]):
        for lf in range(3):
            a = triangles[t, lf]
            b = triangles[t, (lf + 1) % 3]
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append((t, lf))

    f_left, f_lloc, f_right, f_rloc, f_tag = [], [], [], [], []
    f_normal, f_len = [], []
    for key in sorted(edge_map):
        sides = edge_map[key]
        if len(sides) > 2:
            raise MeshError(f"edge {key} shared by {len(sides)} elements "
                            "(non-conforming mesh)")
        sides.sort()                      # left = lower element index
        t, lf = sides[0]
        a = triangles[t, lf]
        b = triangles[t, (lf + 1) % 3]
        ev = vertices[b] - vertices[a]
        elen = float(np.hypot(*ev))
        if elen == 0.0:
            raise MeshError(f"degenerate edge {key}")
        n = np.array([ev[1], -ev[0]]) / elen
        f_left.append(t)
        f_lloc.append(lf)
        f_normal.append(n)
        f_len.append(elen)
        if len(sides) == 2:
            f_right.append(sides[1][0])
            f_rloc.append(sides[1][1])
            f_tag.append(INTERIOR)
        else:
            if key not in boundary_tags:
                raise MeshError(f"untagged boundary edge {key}")
            f_right.append(-1)
            f_rloc.append(-1)
            f_tag.append(boundary_tags[key])

    return Mesh(
        vertices=vertices, triangles=triangles,
        f_left=np.array(f_left, dtype=int), f_lloc=np.array(f_lloc, dtype=int),
        f_right=np.array(f_right, dtype=int), f_rloc=np.array(f_rloc, dtype=int),
        f_tag=np.array(f_tag, dtype=int),
        f_normal=np.array(f_normal, dtype=float), f_len=np.array(f_len, dtype=float),
        area=area, inradius=inradius, jac=jac, jac_inv=jac_inv, det_jac=det_jac,
    )


def translate(mesh, dx):
    """Rigid translation; all geometric measures stay bitwise identical."""
    mesh.vertices = mesh.vertices + np.asarray(dx, dtype=float)
    return mesh


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII subset

def load_msh(path):
    """Read a Gmsh MSH 2.2 ASCII file with triangles and tagged boundary lines."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]

    def section(name):
        try:
            i = lines.index(f"${name}")
            j = lines.index(f"$End{name}")
        except ValueError:
            raise MeshError(f"missing ${name} section") from None
        return lines[i + 1:j]

    fmt = section("MeshFormat")
    if not fmt or not fmt[0].startswith("2.2"):
        raise MeshError("unsupported MSH version (need 2.2 ASCII)")

    phys = {}
    try:
        body = section("PhysicalNames")
        for ln in body[1:]:
            parts = ln.split()
            dim, tag = int(parts[0]), int(parts[1])
            name = parts[2].strip('"')
            if dim == 1:
                phys[tag] = name
    except MeshError:
        pass

    body = section("Nodes")
    n_nodes = int(body[0])
    node_ids = {}
    verts = np.empty((n_nodes, 2))
    for k, ln in enumerate(body[1:1 + n_nodes]):
        parts = ln.split()
        node_ids[int(parts[0])] = k
        verts[k] = [float(parts[1]), float(parts[2])]

    body = section("Elements")
    n_elem = int(body[0])
    tris = []
    btags = {}
    for ln in body[1:1 + n_elem]:
        parts = [int(x) for x in ln.split()]
        etype, ntags = parts[1], parts[2]
        tags = parts[3:3 + ntags]
        conn = parts[3 + ntags:]
        if etype == 2:
            tris.append([node_ids[c] for c in conn])
        elif etype == 1:
            if not tags:
                raise MeshError("boundary line without physical tag")
            name = phys.get(tags[0])
            if name not in _TAG_NAMES:
                raise MeshError(f"boundary line with unknown physical name {name!r}")
            a, b = (node_ids[c] for c in conn)
            btags[(a, b) if a < b else (b, a)] = _TAG_NAMES[name]
    if not tris:
        raise MeshError("no triangles in mesh file")
    tris = np.array(tris, dtype=int)

    # enforce CCW orientation
    v = verts[tris]
    det = ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
           - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0]))
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    return build_mesh(verts, tris, btags)


def save_msh(mesh, path):
    """Write the MSH 2.2 subset understood by load_msh."""
    inv = {WALL: 1, FARFIELD: 2}
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write('$PhysicalNames\n2\n1 1 "wall"\n1 2 "farfield"\n$EndPhysicalNames\n')
        fh.write(f"$Nodes\n{len(mesh.vertices)}\n")
        for i, (x, y) in enumerate(mesh.vertices, start=1):
            fh.write(f"{i} {float(x)!r} {float(y)!r} 0\n")
        fh.write("$EndNodes\n")
        bnd = mesh.boundary_faces()
        n_el = len(bnd) + mesh.n_elements
        fh.write(f"$Elements\n{n_el}\n")
        eid = 1
        for f in bnd:
            t, lf = mesh.f_left[f], mesh.f_lloc[f]
            a = mesh.triangles[t, lf] + 1
            b = mesh.triangles[t, (lf + 1) % 3] + 1
            tag = inv[mesh.f_tag[f]]
            fh.write(f"{eid} 1 2 {tag} {tag} {a} {b}\n")
            eid += 1
        for tri in mesh.triangles:
            fh.write(f"{eid} 2 2 0 0 {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
            eid += 1
        fh.write("$EndElements\n")


# ---------------------------------------------------------------------------
# Generators

def generate_structured(nx, ny, rect=(0.0, 0.0, 1.0, 1.0), skew_layer=False,
                        boundary=FARFIELD):
    """Crossed-diagonal triangulation of a rectangle.

    With skew_layer the bottom row of cells is flattened to high aspect
    ratio, emulating a single layer of skewed cells.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    x0, y0, x1, y1 = rect
    if x1 <= x0 or y1 <= y0:
        raise MeshError("degenerate rectangle")

    xs = np.linspace(x0, x1, nx + 1)
    if skew_layer and ny >= 2:
        h = (y1 - y0) / ny
        ys = np.concatenate([[y0, y0 + 0.15 * h],
                             np.linspace(y0 + 0.15 * h, y1, ny)[1:]])
    else:
        ys = np.linspace(y0, y1, ny + 1)

    def vid(i, j):
        return j * (nx + 1) + i

    verts = np.array([(x, y) for y in ys for x in xs])
    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
            else:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
    tris = np.array(tris, dtype=int)

    btags = {}
    for i in range(nx):
        btags[tuple(sorted((vid(i, 0), vid(i + 1, 0))))] = boundary
        btags[tuple(sorted((vid(i, ny), vid(i + 1, ny))))] = boundary
    for j in range(ny):
        btags[tuple(sorted((vid(0, j), vid(0, j + 1))))] = boundary
        btags[tuple(sorted((vid(nx, j), vid(nx, j + 1))))] = boundary
    return build_mesh(verts, tris, btags)


def generate_cylinder_ogrid(n_theta=96, n_r=24, r_wall=0.5, r_far=20.0,
                            stretch=1.18):
    """Polar O-grid around a cylinder: wall at the inner ring, far field at
    the outer ring, geometric radial stretching away from the wall."""
    if n_theta < 8 or n_r < 2:
        raise ValueError("need n_theta >= 8 and n_r >= 2")
    g = float(stretch)
    if abs(g - 1.0) < 1e-12:
        radii = np.linspace(r_wall, r_far, n_r + 1)
    else:
        h0 = (r_far - r_wall) * (g - 1.0) / (g ** n_r - 1.0)
        radii = r_wall + h0 * np.concatenate([[0.0], np.cumsum(g ** np.arange(n_r))])
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta

    def vid(k, i):
        return k * n_theta + (i % n_theta)

    verts = np.array([(r * np.cos(t), r * np.sin(t)) for r in radii for t in thetas])
    tris = []
    for k in range(n_r):
        for i in range(n_theta):
            v00, v10 = vid(k, i), vid(k, i + 1)
            v01, v11 = vid(k + 1, i), vid(k + 1, i + 1)
            # theta-then-r quad corners run clockwise; reverse for CCW
            if (k + i) % 2 == 0:
                tris.append((v00, v11, v10))
                tris.append((v00, v01, v11))
            else:
                tris.append((v00, v01, v10))
                tris.append((v10, v01, v11))
    tris = np.array(tris, dtype=int)

    btags = {}
    for i in range(n_theta):
        btags[tuple(sorted((vid(0, i), vid(0, i + 1))))] = WALL
        btags[tuple(sorted((vid(n_r, i), vid(n_r, i + 1))))] = FARFIELD
    return build_mesh(verts, tris, btags)
