"""Legacy VTK ASCII output of DG fields (plus a minimal reader used for
round-trip checks).

Each element is written as its own set of points (duplicated at shared
edges -- the field is discontinuous and values are never averaged) and
subdivided into the canonical nodal sub-triangulation, so a p-th order
element becomes p^2 linear triangles."""

import numpy as np

from . import physics, verify

_HEADER = "# vtk DataFile Version 3.0"


def write_vtk(ev, u, path, description="dgviv field snapshot"):
    """Write rho, u, v, p and vorticity point data for the state u."""
    mesh, t, gas = ev.mesh, ev.tables, ev.gas
    n_e, n_p = mesh.n_elements, t.n_p

    a = mesh.vertices[mesh.triangles[:, 0]]
    pts = a[:, None, :] + np.einsum('eab,qb->eqa', mesh.jac, t.nodes.points + 1.0)
    pts = pts.reshape(-1, 2)

    offs = (np.arange(n_e) * n_p)[:, None, None]
    cells = (t.sub_tris[None, :, :] + offs).reshape(-1, 3)

    rho, v1, v2, p = physics.primitive(u, gas)
    vort = verify.vorticity_field(ev, u)
    data = {
        "rho": rho.ravel(), "u": v1.ravel(), "v": v2.ravel(),
        "p": p.ravel(), "vorticity": vort.ravel(),
    }

    with open(path, "w") as fh:
        fh.write(f"{_HEADER}\n{description}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for x, y in pts:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for c in cells:
            fh.write(f"3 {c[0]} {c[1]} {c[2]}\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        fh.write("5\n" * len(cells))
        fh.write(f"POINT_DATA {len(pts)}\n")
        for name, vals in data.items():
            fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            for v in vals:
                fh.write(f"{v:.17g}\n")


def read_vtk(path):
    """Minimal reader for files produced by write_vtk: returns
    (points (n,2), cells (m,3), {name: values})."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not a legacy VTK ASCII file")
    i = lines.index("DATASET UNSTRUCTURED_GRID") + 1
    points, cells, data = None, None, {}
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("POINTS"):
            n = int(ln.split()[1])
            pts = [lines[i + 1 + j].split() for j in range(n)]
            points = np.array(pts, dtype=float)[:, :2]
            i += 1 + n
        elif ln.startswith("CELLS"):
            m = int(ln.split()[1])
            cells = np.array([lines[i + 1 + j].split()[1:]
                              for j in range(m)], dtype=int)
            i += 1 + m
        elif ln.startswith("CELL_TYPES"):
            i += 1 + int(ln.split()[1])
        elif ln.startswith("POINT_DATA"):
            n = int(ln.split()[1])
            i += 1
            while i < len(lines) and lines[i].startswith("SCALARS"):
                name = lines[i].split()[1]
                vals = [float(lines[i + 2 + j]) for j in range(n)]
                data[name] = np.array(vals)
                i += 2 + n
        else:
            i += 1
    if points is None or cells is None:
        raise ValueError("missing POINTS or CELLS section")
    return points, cells, data
