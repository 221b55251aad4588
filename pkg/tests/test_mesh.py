"""Mesh construction, connectivity invariants, and MSH round trips."""

import numpy as np
import pytest

from dgviv import mesh as meshmod


@pytest.fixture
def square():
    return meshmod.generate_structured(4, 3, rect=(0.0, 0.0, 2.0, 1.5))


def test_structured_counts(square):
    assert square.n_elements == 2 * 4 * 3
    # Euler-style face count: 3 faces per triangle, interior shared
    n_bnd = (square.f_right < 0).sum()
    assert 3 * square.n_elements == 2 * square.interior_faces().size + n_bnd
    assert n_bnd == 2 * (4 + 3)


def test_areas_and_jacobians(square):
    assert np.allclose(square.area.sum(), 2.0 * 1.5, atol=1e-12)
    assert np.allclose(square.det_jac, square.area / 2.0, atol=1e-14)
    ident = np.einsum("eab,ebc->eac", square.jac, square.jac_inv)
    assert np.allclose(ident, np.eye(2), atol=1e-12)
    assert (square.inradius > 0).all()


def test_normals_unit_and_outward(square):
    assert np.allclose(np.linalg.norm(square.f_normal, axis=1), 1.0, atol=1e-13)
    # outward from the left element: normal points away from the centroid
    cent = square.vertices[square.triangles].mean(axis=1)
    for f in range(square.n_faces):
        k = square.f_left[f]
        tri = square.triangles[k]
        lf = square.f_lloc[f]
        a, b = tri[lf], tri[(lf + 1) % 3]
        mid = 0.5 * (square.vertices[a] + square.vertices[b])
        assert np.dot(square.f_normal[f], mid - cent[k]) > 0


def test_face_length_consistency(square):
    for f in range(square.n_faces):
        k, lf = square.f_left[f], square.f_lloc[f]
        tri = square.triangles[k]
        a, b = tri[lf], tri[(lf + 1) % 3]
        assert abs(square.f_len[f]
                   - np.linalg.norm(square.vertices[b] - square.vertices[a])) < 1e-13


def test_interior_faces_share_vertices(square):
    for f in square.interior_faces():
        kl, ll = square.f_left[f], square.f_lloc[f]
        kr, lr = square.f_right[f], square.f_rloc[f]
        tl, tr = square.triangles[kl], square.triangles[kr]
        left = {tl[ll], tl[(ll + 1) % 3]}
        right = {tr[lr], tr[(lr + 1) % 3]}
        assert left == right


def test_boundary_tags(square):
    bnd = square.boundary_faces()
    assert (square.f_tag[bnd] != meshmod.INTERIOR).all()
    assert (square.f_tag[square.interior_faces()] == meshmod.INTERIOR).all()


def test_cylinder_ogrid_topology():
    m = meshmod.generate_cylinder_ogrid(n_theta=24, n_r=4, r_wall=0.5, r_far=5.0)
    assert m.n_elements == 2 * 24 * 4
    wall = m.boundary_faces(meshmod.WALL)
    far = m.boundary_faces(meshmod.FARFIELD)
    assert wall.size == 24 and far.size == 24
    # wall faces sit on the inner circle
    for f in wall:
        tri = m.triangles[m.f_left[f]]
        lf = m.f_lloc[f]
        for vid in (tri[lf], tri[(lf + 1) % 3]):
            assert abs(np.linalg.norm(m.vertices[vid]) - 0.5) < 1e-12


def test_wall_normals_point_into_body():
    m = meshmod.generate_cylinder_ogrid(n_theta=32, n_r=3, r_wall=1.0, r_far=4.0)
    for f in m.boundary_faces(meshmod.WALL):
        tri = m.triangles[m.f_left[f]]
        lf = m.f_lloc[f]
        mid = 0.5 * (m.vertices[tri[lf]] + m.vertices[tri[(lf + 1) % 3]])
        # outward from the fluid element = toward the cylinder axis
        assert np.dot(m.f_normal[f], mid) < 0


def test_msh_round_trip(tmp_path, square):
    path = tmp_path / "m.msh"
    meshmod.save_msh(square, path)
    m2 = meshmod.load_msh(path)
    assert np.allclose(m2.vertices, square.vertices, atol=1e-14)
    assert np.array_equal(m2.triangles, square.triangles)
    assert np.array_equal(np.sort(m2.f_tag), np.sort(square.f_tag))
    assert np.allclose(m2.area, square.area, atol=1e-14)


def test_msh_header_is_legacy_ascii(tmp_path, square):
    path = tmp_path / "m.msh"
    meshmod.save_msh(square, path)
    text = path.read_text().splitlines()
    assert text[0] == "$MeshFormat"
    assert text[1].split()[0] == "2.2"


def test_translate_moves_geometry(square):
    v0 = square.vertices.copy()
    meshmod.translate(square, (0.0, 0.25))
    assert np.allclose(square.vertices[:, 1], v0[:, 1] + 0.25, atol=1e-15)
    assert np.allclose(square.vertices[:, 0], v0[:, 0], atol=1e-15)
    # rigid motion: areas, normals unchanged
    assert np.allclose(square.area.sum(), 3.0, atol=1e-12)


def test_bad_mesh_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 2, 1]])  # clockwise
    with pytest.raises(meshmod.MeshError):
        meshmod.build_mesh(verts, tris, {})
