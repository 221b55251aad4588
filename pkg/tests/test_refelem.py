"""Reference-element tables: basis orthonormality, differentiation, quadrature."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgviv import refelem


def test_npoly():
    assert refelem.npoly(1) == 3
    assert refelem.npoly(3) == 10
    assert refelem.npoly(9) == 55


def test_order_guard():
    with pytest.raises(ValueError):
        refelem.build_tables(refelem.MAX_ORDER + 1)
    with pytest.raises(ValueError):
        refelem.build_tables(0)


@pytest.mark.parametrize("p", [1, 2, 4, 7])
def test_basis_orthonormal_under_cubature(p):
    """The modal basis is orthonormal in L2 on the reference triangle."""
    pts, w = refelem.volume_cubature(2 * p + 2)
    V = refelem.pkd_eval(p, pts[:, 0], pts[:, 1])
    G = V.T @ (w[:, None] * V)
    assert np.allclose(G, np.eye(refelem.npoly(p)), atol=1e-12)


@pytest.mark.parametrize("p", [1, 3, 5])
def test_mass_matrix_equals_gram(p):
    t = refelem.build_tables(p)
    # M = V^{-T} V^{-1} for an orthonormal modal basis
    assert np.allclose(t.M, t.V_inv.T @ t.V_inv, atol=1e-11)
    assert np.allclose(t.M @ t.M_inv, np.eye(t.n_p), atol=1e-9)
    # symmetric positive definite
    assert np.allclose(t.M, t.M.T, atol=1e-13)
    assert np.linalg.eigvalsh(t.M).min() > 0


@pytest.mark.parametrize("p", [1, 2, 5, 9])
def test_differentiation_exact_on_polynomials(p):
    t = refelem.build_tables(p)
    r, s = t.nodes.points[:, 0], t.nodes.points[:, 1]
    # d/dr and d/ds of r^i s^j for i+j <= p must be nodally exact
    for i in range(p + 1):
        for j in range(p + 1 - i):
            f = r**i * s**j
            fr = i * r ** max(i - 1, 0) * s**j if i else np.zeros_like(r)
            fs = j * r**i * s ** max(j - 1, 0) if j else np.zeros_like(r)
            assert np.allclose(t.Dx @ f, fr, atol=5e-10)
            assert np.allclose(t.Dy @ f, fs, atol=5e-10)


def test_volume_cubature_exactness():
    pts, w = refelem.volume_cubature(6)
    # area of the reference triangle
    assert abs(w.sum() - 2.0) < 1e-13
    # exact moments: int r^i s^j over T
    r, s = pts[:, 0], pts[:, 1]
    assert abs(np.sum(w * r) - (-2.0 / 3.0)) < 1e-13
    assert abs(np.sum(w * r * s) - 0.0) < 2e-13
    # degree-6 monomial integrated exactly: compare against high-order rule
    pts2, w2 = refelem.volume_cubature(12)
    m6 = np.sum(w2 * pts2[:, 0] ** 4 * pts2[:, 1] ** 2)
    assert abs(np.sum(w * r**4 * s**2) - m6) < 1e-12


def test_face_quadrature_exactness():
    xi, w = refelem.face_quadrature(9)
    assert abs(w.sum() - 2.0) < 1e-13
    for k in range(10):
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert abs(np.sum(w * xi**k) - exact) < 1e-12


@pytest.mark.parametrize("p", [1, 3, 6])
def test_face_nodes_lie_on_edges(p):
    t = refelem.build_tables(p)
    pts = t.nodes.points
    f0, f1, f2 = t.nodes.face_index
    assert np.allclose(pts[f0][:, 1], -1.0, atol=1e-12)          # s = -1
    assert np.allclose(pts[f1].sum(axis=1), 0.0, atol=1e-12)     # r + s = 0
    assert np.allclose(pts[f2][:, 0], -1.0, atol=1e-12)          # r = -1
    assert all(len(f) == p + 1 for f in (f0, f1, f2))


def test_vertices_present_in_nodes():
    t = refelem.build_tables(4)
    pts = t.nodes.points
    for v in [(-1, -1), (1, -1), (-1, 1)]:
        assert np.min(np.abs(pts - np.array(v)).sum(axis=1)) < 1e-12


@pytest.mark.parametrize("p", [2, 4])
def test_weak_derivative_tables(p):
    """Wx implements integration of (d phi_i/dr) * q at cubature points."""
    t = refelem.build_tables(p)
    pts, w = t.cubature_volume
    rng = np.random.default_rng(0)
    q = rng.normal(size=len(w))
    ref = np.einsum("qi,q,q->i", t.Vq_dx, w, q)
    assert np.allclose(t.Wx @ q, ref, atol=1e-12)
    ref = np.einsum("qi,q,q->i", t.Vq_dy, w, q)
    assert np.allclose(t.Wy @ q, ref, atol=1e-12)


def test_default_face_quadrature_order():
    t = refelem.build_tables(3)
    assert t.p_f == 9
    with pytest.raises(ValueError):
        refelem.build_tables(3, p_f=5)  # below 2p


def test_sub_triangulation_covers_element():
    t = refelem.build_tables(4)
    assert t.sub_tris.shape == (16, 3)
    pts = t.nodes.points
    total = 0.0
    for a, b, c in t.sub_tris:
        e1, e2 = pts[b] - pts[a], pts[c] - pts[a]
        total += 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    assert abs(total - 2.0) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.data())
def test_vandermonde_interpolation_reproduces_polynomials(p, data):
    """Nodal interpolation is exact for any polynomial of total degree <= p."""
    t = refelem.build_tables(p)
    n = refelem.npoly(p)
    coef = np.array([data.draw(st.floats(-2, 2)) for _ in range(n)])
    pts, _ = t.cubature_volume
    nodal = t.V @ coef                       # polynomial sampled at the nodes
    at_quad = t.Vq @ nodal                   # interpolated to cubature points
    direct = refelem.pkd_eval(p, pts[:, 0], pts[:, 1]) @ coef
    assert np.allclose(at_quad, direct, atol=1e-9 * max(1.0, np.abs(direct).max()))
