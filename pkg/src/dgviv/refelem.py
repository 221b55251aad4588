"""Reference-element machinery: interpolation nodes, orthonormal modal basis
on the triangle, and the operator tables used by the solver.

All tables live on the reference triangle K_hat with vertices
(-1,-1), (1,-1), (-1,1).  Physical-element operators follow from the
constant affine Jacobian, so everything here is built once per polynomial
order.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_jacobi, gammaln, roots_jacobi, roots_legendre

MAX_ORDER = 9

# Alpha constants of the warp-and-blend node optimisation, indexed by order.
_ALPHA_OPT = (0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800,
              1.0999, 1.2832, 1.3648, 1.4773)

_SQRT3 = np.sqrt(3.0)


def _check_order(p):
    if not (1 <= p <= MAX_ORDER):
        raise ValueError(f"polynomial order must be in [1, {MAX_ORDER}], got {p}")


def npoly(p):
    """Dimension of P_p on the triangle."""
    return (p + 1) * (p + 2) // 2


def jacobi_normalized(x, alpha, beta, n):
    """Jacobi polynomial of degree n, orthonormal on [-1,1] with weight
    (1-x)^alpha (1+x)^beta."""
    x = np.asarray(x, dtype=float)
    lognorm2 = ((alpha + beta + 1) * np.log(2.0)
                - np.log(2 * n + alpha + beta + 1)
                + gammaln(n + alpha + 1) + gammaln(n + beta + 1)
                - gammaln(n + alpha + beta + 1) - gammaln(n + 1))
    return eval_jacobi(n, alpha, beta, x) / np.exp(0.5 * lognorm2)


def grad_jacobi_normalized(x, alpha, beta, n):
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return np.sqrt(n * (n + alpha + beta + 1)) * jacobi_normalized(
        x, alpha + 1, beta + 1, n - 1)


def _gauss_lobatto(n):
    """n+1 Gauss-Lobatto points on [-1,1]."""
    if n == 1:
        return np.array([-1.0, 1.0])
    interior, _ = roots_jacobi(n - 1, 1.0, 1.0)
    return np.concatenate(([-1.0], interior, [1.0]))


def _vandermonde_1d(p, x):
    return np.column_stack([jacobi_normalized(x, 0.0, 0.0, n)
                            for n in range(p + 1)])


def _warp_factor(p, rout):
    """Edge warp: displacement moving equidistant edge nodes to Gauss-Lobatto."""
    lgl = _gauss_lobatto(p)
    req = np.linspace(-1.0, 1.0, p + 1)
    veq = _vandermonde_1d(p, req)
    pmat = np.stack([jacobi_normalized(rout, 0.0, 0.0, n) for n in range(p + 1)])
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    zerof = np.abs(rout) < 1.0 - 1e-10
    sf = 1.0 - (zerof * rout) ** 2
    return warp / sf + warp * (zerof - 1.0)


def rs_to_ab(r, s):
    """Collapsed coordinates; a = -1 at the singular vertex s = 1."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    denom = np.where(np.abs(1.0 - s) > 1e-14, 1.0 - s, 1.0)
    a = np.where(np.abs(1.0 - s) > 1e-14, 2.0 * (1.0 + r) / denom - 1.0, -1.0)
    return a, s


def _mode_order(p):
    """Graded lexicographic (total degree, then a-index) PKD mode ordering."""
    return [(i, deg - i) for deg in range(p + 1) for i in range(deg + 1)]


def pkd_eval(p, r, s):
    """Evaluate the N_p orthonormal PKD modes at the given points.

    Returns an array of shape (npts, N_p); column order is graded
    lexicographic so the matrix is reproducible bit-for-bit.
    """
    a, b = rs_to_ab(r, s)
    cols = []
    for i, j in _mode_order(p):
        fa = jacobi_normalized(a, 0.0, 0.0, i)
        gb = jacobi_normalized(b, 2.0 * i + 1.0, 0.0, j)
        cols.append(np.sqrt(2.0) * fa * gb * (1.0 - b) ** i)
    return np.column_stack(cols)


def pkd_grad(p, r, s):
    """Gradients (d/dr, d/ds) of the PKD modes; two (npts, N_p) arrays."""
    a, b = rs_to_ab(r, s)
    dr_cols, ds_cols = [], []
    sq2 = np.sqrt(2.0)
    for i, j in _mode_order(p):
        fa = jacobi_normalized(a, 0.0, 0.0, i)
        dfa = grad_jacobi_normalized(a, 0.0, 0.0, i)
        gb = jacobi_normalized(b, 2.0 * i + 1.0, 0.0, j)
        dgb = grad_jacobi_normalized(b, 2.0 * i + 1.0, 0.0, j)
        if i == 0:
            dr = np.zeros_like(a)
            ds = sq2 * fa * dgb
        else:
            pow_im1 = (1.0 - b) ** (i - 1)
            dr = 2.0 * sq2 * dfa * gb * pow_im1
            ds = (sq2 * pow_im1 * (dfa * (1.0 + a) * gb - i * fa * gb)
                  + sq2 * fa * dgb * (1.0 - b) ** i)
        dr_cols.append(dr)
        ds_cols.append(ds)
    return np.column_stack(dr_cols), np.column_stack(ds_cols)


def pkd_vandermonde(p, points):
    """Generalized Vandermonde of the orthonormal PKD basis at the points."""
    pts = np.asarray(points, dtype=float)
    return pkd_eval(p, pts[:, 0], pts[:, 1])


@dataclass(frozen=True)
class NodeSet:
    """Warp-and-blend interpolation nodes on the reference triangle."""

    p: int
    points: np.ndarray              # (N_p, 2) in (r, s)
    face_index: tuple               # 3 arrays of p+1 node ids, ordered along each face
    lattice: np.ndarray             # (N_p, 2) generating equidistant lattice indices

    def __len__(self):
        return self.points.shape[0]


def interpolation_nodes(p):
    """Alpha-optimised warp-and-blend nodes for order p."""
    _check_order(p)
    alpha = _ALPHA_OPT[p - 1]
    np_total = npoly(p)

    lattice = np.array([(i, j) for i in range(p + 1) for j in range(p + 1 - i)],
                       dtype=int)
    l1 = lattice[:, 0] / p
    l3 = lattice[:, 1] / p
    l2 = 1.0 - l1 - l3

    # equilateral-triangle coordinates
    x = -l2 + l3
    y = (-l2 - l3 + 2.0 * l1) / _SQRT3

    blend1 = 4.0 * l2 * l3
    blend2 = 4.0 * l1 * l3
    blend3 = 4.0 * l1 * l2
    warpf1 = _warp_factor(p, l3 - l2)
    warpf2 = _warp_factor(p, l1 - l3)
    warpf3 = _warp_factor(p, l2 - l1)
    warp1 = blend1 * warpf1 * (1.0 + (alpha * l1) ** 2)
    warp2 = blend2 * warpf2 * (1.0 + (alpha * l2) ** 2)
    warp3 = blend3 * warpf3 * (1.0 + (alpha * l3) ** 2)

    x = x + warp1 + np.cos(2.0 * np.pi / 3.0) * warp2 + np.cos(4.0 * np.pi / 3.0) * warp3
    y = y + np.sin(2.0 * np.pi / 3.0) * warp2 + np.sin(4.0 * np.pi / 3.0) * warp3

    # equilateral -> reference (r, s)
    m1 = (_SQRT3 * y + 1.0) / 3.0
    m2 = (-3.0 * x - _SQRT3 * y + 2.0) / 6.0
    m3 = (3.0 * x - _SQRT3 * y + 2.0) / 6.0
    r = -m2 + m3 - m1
    s = -m2 - m3 + m1
    points = np.column_stack([r, s])
    assert points.shape[0] == np_total

    tol = 1e-10
    on_f0 = np.abs(s + 1.0) < tol          # v1 -> v2
    on_f1 = np.abs(r + s) < tol            # v2 -> v3
    on_f2 = np.abs(r + 1.0) < tol          # v3 -> v1
    f0 = np.nonzero(on_f0)[0][np.argsort(r[on_f0])]
    f1 = np.nonzero(on_f1)[0][np.argsort(s[on_f1])]
    f2 = np.nonzero(on_f2)[0][np.argsort(-s[on_f2])]
    for f in (f0, f1, f2):
        if len(f) != p + 1:
            raise RuntimeError("face node extraction failed")

    return NodeSet(p=p, points=points, face_index=(f0, f1, f2), lattice=lattice)


def sub_triangulation(p, lattice):
    """Canonical subdivision of the nodal lattice into p^2 sub-triangles."""
    node_id = {(i, j): n for n, (i, j) in enumerate(map(tuple, lattice))}
    tris = []
    for i in range(p):
        for j in range(p - i):
            tris.append((node_id[(i, j)], node_id[(i, j + 1)], node_id[(i + 1, j)]))
            if j < p - i - 1:
                tris.append((node_id[(i, j + 1)], node_id[(i + 1, j + 1)],
                             node_id[(i + 1, j)]))
    return np.array(tris, dtype=int)


def volume_cubature(p_f):
    """Collapsed-coordinate tensor Gauss rule, exact for total degree p_f."""
    n = p_f // 2 + 1
    ga, wa = roots_legendre(n)
    gb, wb = roots_jacobi(n, 1.0, 0.0)   # weight (1-b)
    a = np.repeat(ga, n)
    b = np.tile(gb, n)
    w = 0.5 * np.repeat(wa, n) * np.tile(wb, n)
    r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0
    s = b
    return np.column_stack([r, s]), w


def face_quadrature(p_f):
    """Gauss-Legendre points/weights on [-1,1] exact for degree p_f."""
    n = (p_f + 1) // 2 + 1
    return roots_legendre(n)


# Reference faces as (start vertex, end vertex); orientation matches the
# local face (a,b), (b,c), (c,a) convention of the mesh module.
_FACE_VERTS = (
    (np.array([-1.0, -1.0]), np.array([1.0, -1.0])),
    (np.array([1.0, -1.0]), np.array([-1.0, 1.0])),
    (np.array([-1.0, 1.0]), np.array([-1.0, -1.0])),
)


def _face_points(lf, xi):
    a, b = _FACE_VERTS[lf]
    return (np.outer(1.0 - xi, a) + np.outer(1.0 + xi, b)) / 2.0


def _face_param(lf, points):
    """Parameter xi in [-1,1] of points lying on local face lf."""
    a, b = _FACE_VERTS[lf]
    d = b - a
    return ((points - a) @ d) * 2.0 / (d @ d) - 1.0


@dataclass(frozen=True)
class OperatorTables:
    """All reference-element operators for a given order pair (p, p_f)."""

    p: int
    p_f: int
    nodes: NodeSet
    V: np.ndarray               # PKD Vandermonde at nodes (N_p x N_p)
    V_inv: np.ndarray
    M: np.ndarray               # reference mass matrix
    M_inv: np.ndarray
    Dx: np.ndarray              # nodal d/dr at nodes
    Dy: np.ndarray              # nodal d/ds at nodes
    E_face: np.ndarray          # (3, N_p, p+1) 0/1 extraction maps
    M_face: np.ndarray          # (p+1, p+1) face mass on the reference edge
    cubature_volume: tuple      # (points (n_q,2), weights (n_q,))
    cubature_face: tuple        # (xi (n_qf,), weights (n_qf,))
    Vq: np.ndarray              # nodal -> volume cubature values (n_q x N_p)
    Vq_dx: np.ndarray           # nodal -> d/dr at volume cubature
    Vq_dy: np.ndarray
    Wx: np.ndarray              # weak d/dr table, (N_p x n_q), weights included
    Wy: np.ndarray
    Vf: np.ndarray              # face-node values -> face cubature (n_qf x (p+1))
    Gface_x: np.ndarray         # (3, N_p, n_qf) volume d/dr basis at face cubature
    Gface_y: np.ndarray
    sub_tris: np.ndarray        # (p^2, 3) nodal sub-triangulation

    @property
    def n_p(self):
        return self.V.shape[0]


def build_tables(p, p_f=None):
    """Build all operator tables for order p with overintegration order p_f."""
    _check_order(p)
    if p_f is None:
        p_f = 3 * p
    if p_f < 2 * p:
        raise ValueError(f"p_f must be >= 2p for aliasing control, got {p_f}")

    nodes = interpolation_nodes(p)
    pts = nodes.points
    n_p = npoly(p)

    V = pkd_vandermonde(p, pts)
    V_inv = np.linalg.inv(V)
    M = V_inv.T @ V_inv                 # (V V^T)^{-1}
    M_inv = V @ V.T

    Vr, Vs = pkd_grad(p, pts[:, 0], pts[:, 1])
    Dx = Vr @ V_inv
    Dy = Vs @ V_inv

    cub_pts, cub_w = volume_cubature(p_f)
    Vq = pkd_eval(p, cub_pts[:, 0], cub_pts[:, 1]) @ V_inv
    gq_r, gq_s = pkd_grad(p, cub_pts[:, 0], cub_pts[:, 1])
    Vq_dx = gq_r @ V_inv
    Vq_dy = gq_s @ V_inv
    Wx = (Vq_dx * cub_w[:, None]).T
    Wy = (Vq_dy * cub_w[:, None]).T

    # face machinery
    xi_q, w_q = face_quadrature(p_f)
    f0 = nodes.face_index[0]
    xi_nodes = _face_param(0, pts[f0])
    V1 = _vandermonde_1d(p, xi_nodes)
    M_face = np.linalg.inv(V1 @ V1.T)
    P1q = _vandermonde_1d(p, xi_q)
    Vf = P1q @ np.linalg.inv(V1)

    E_face = np.zeros((3, n_p, p + 1))
    Gface_x = np.zeros((3, n_p, len(xi_q)))
    Gface_y = np.zeros((3, n_p, len(xi_q)))
    for lf in range(3):
        idx = nodes.face_index[lf]
        E_face[lf, idx, np.arange(p + 1)] = 1.0
        fpts = _face_points(lf, xi_q)
        gr, gs = pkd_grad(p, fpts[:, 0], fpts[:, 1])
        Gface_x[lf] = (gr @ V_inv).T
        Gface_y[lf] = (gs @ V_inv).T

    return OperatorTables(
        p=p, p_f=p_f, nodes=nodes, V=V, V_inv=V_inv, M=M, M_inv=M_inv,
        Dx=Dx, Dy=Dy, E_face=E_face, M_face=M_face,
        cubature_volume=(cub_pts, cub_w), cubature_face=(xi_q, w_q),
        Vq=Vq, Vq_dx=Vq_dx, Vq_dy=Vq_dy, Wx=Wx, Wy=Wy, Vf=Vf,
        Gface_x=Gface_x, Gface_y=Gface_y,
        sub_tris=sub_triangulation(p, nodes.lattice),
    )
