"""Semi-discrete residual: free-stream, gradients, conservation, face assembly."""

import numpy as np
import pytest

from dgviv import dg_core, mesh as meshmod, penalty as pen, physics as ph, refelem

GAS = ph.GasParams(mu=0.02)
FS = ph.FreeStream(1.4, (0.3, 0.1), 1.0)


def make_ev(nx=4, ny=4, p=3, theta=1.0, rect=(0, 0, 1, 1), gas=GAS, **kw):
    m = meshmod.generate_structured(nx, ny, rect=rect)
    tab = refelem.build_tables(p)
    cfg = pen.PenaltyConfig(theta=theta)
    return dg_core.ResidualEvaluator(m, tab, gas, cfg, freestream=FS, **kw)


def uniform(ev):
    return np.broadcast_to(FS.conservative(ev.gas),
                           (ev.mesh.n_elements, ev.tables.n_p, 4)).copy()


@pytest.mark.parametrize("theta", [-1.0, 0.0, 1.0])
def test_free_stream_residual_vanishes(theta):
    ev = make_ev(6, 5, p=3, theta=theta, rect=(0, 0, 2, 1))
    R = ev.residual(uniform(ev))
    assert np.abs(R).max() < 1e-13


def test_broken_gradient_exact_on_linears():
    ev = make_ev()
    u = ev.interpolate(lambda x, y, t=0.0:
                       np.stack([x, 2 * y, x + y, 3.0 + 0 * x], axis=-1))
    g = ev.broken_gradient(u)
    assert np.abs(g[..., 0, 0] - 1).max() < 1e-12
    assert np.abs(g[..., 0, 1]).max() < 1e-12
    assert np.abs(g[..., 1, 1] - 2).max() < 1e-12
    assert np.abs(g[..., 2, 0] - 1).max() < 1e-12
    assert np.abs(g[..., 3, :]).max() < 1e-12


def test_broken_gradient_exact_on_cubics():
    ev = make_ev(p=3)
    u = ev.interpolate(lambda x, y, t=0.0: np.stack([x**2 * y] * 4, axis=-1))
    xy = ev.interpolate(lambda x, y, t=0.0: np.stack([x, y, x, y], axis=-1))
    g = ev.broken_gradient(u)
    assert np.abs(g[..., 0, 0] - 2 * xy[..., 0] * xy[..., 1]).max() < 1e-11
    assert np.abs(g[..., 0, 1] - xy[..., 0] ** 2).max() < 1e-11


def test_global_conservation_telescopes():
    """Summed residual equals minus the net boundary flux for any state."""
    ev = make_ev()
    rng = np.random.default_rng(3)
    u = uniform(ev) * (1 + 0.05 * rng.normal(size=(ev.mesh.n_elements,
                                                   ev.tables.n_p, 4)))
    R = ev.residual(u)
    total = R.sum(axis=(0, 1))
    grad = ev.broken_gradient(u)
    sig = ev.sigmas(u, (0.0, 0.0))
    uLq, uRq, gL, gR = ev._quad_traces(u, grad, (0.0, 0.0))
    H = ev._face_flux(uLq, uRq, gL, gR, sig, (0.0, 0.0))
    bnd = ~ev.interior
    bflux = np.einsum("f,q,fqk->k", ev.half_len[bnd], ev.wf, H[bnd])
    scale = max(1.0, np.abs(bflux).max())
    assert np.abs(total + bflux).max() < 1e-12 * scale


def test_thread_count_is_bitwise_invariant():
    ev1 = make_ev(n_threads=1)
    ev4 = make_ev(n_threads=4)
    rng = np.random.default_rng(5)
    u = uniform(ev1) * (1 + 0.03 * rng.normal(size=(ev1.mesh.n_elements,
                                                    ev1.tables.n_p, 4)))
    assert np.array_equal(ev1.residual(u), ev4.residual(u))


def test_mass_matrix_round_trip():
    ev = make_ev()
    rng = np.random.default_rng(7)
    X = rng.normal(size=(ev.mesh.n_elements, ev.tables.n_p, 4))
    assert np.abs(ev.apply_mass(ev.apply_inverse_mass(X)) - X).max() < 1e-12


def test_volume_source_integrates_constants():
    """Integral of a constant source against the basis: M applied to the field."""
    ev = make_ev()
    S = ev.volume_source(lambda x, y, t: np.full(x.shape + (4,), 2.5), 0.0)
    ones = np.full((ev.mesh.n_elements, ev.tables.n_p, 4), 2.5)
    assert np.abs(ev.apply_inverse_mass(S) - ones).max() < 1e-11


def test_interpolate_positivity_guard():
    ev = make_ev()
    with pytest.raises(ph.PositivityError):
        bad = uniform(ev)
        bad[..., 3] = 0.0  # zero total energy => negative pressure
        ev.residual(bad)


def test_theta_independence_on_continuous_interior():
    """For a globally continuous polynomial state all jump terms vanish, so
    theta only acts through the boundary closure; interior elements agree."""
    ev0 = make_ev(theta=0.0)
    ev1 = make_ev(theta=1.0)

    def fpoly(x, y, t=0.0):
        return np.stack([1.4 + 0.01 * (x + y), 0.3 + 0.02 * x * y,
                         0.1 + 0.01 * y**2, 2.5 + 0.03 * x**2], axis=-1)

    up = ev0.interpolate(fpoly)
    R0, R1 = ev0.residual(up), ev1.residual(up)
    m = ev0.mesh
    bnd_elems = set(m.f_left[m.boundary_faces()])
    inner = np.array([k for k in range(m.n_elements) if k not in bnd_elems])
    assert inner.size > 0
    assert np.abs(R1[inner] - R0[inner]).max() < 1e-15


def dense_face_contribution(ev, u, theta):
    """Brute-force reassembly of one interior face's residual contribution."""
    t = ev.tables
    grad = ev.broken_gradient(u)
    sig = ev.sigmas(u, (0.0, 0.0))
    uLq, uRq, gL, gR = ev._quad_traces(u, grad, (0.0, 0.0))
    f = int(ev.interior.nonzero()[0][0])
    kl, kr = ev.mesh.f_left[f], ev.mesh.f_right[f]
    n = ev.mesh.f_normal[f]
    w = ev.wf * ev.half_len[f]

    fl = ph.roe_flux(uLq[f], uRq[f], n, (0.0, 0.0), ev.gas)
    FvL = ph.viscous_flux(uLq[f], gL[f], ev.gas)
    FvR = ph.viscous_flux(uRq[f], gR[f], ev.gas)
    visc = 0.5 * np.einsum("a,qka->qk", n, FvL + FvR)
    H = fl - visc + sig[f] * (uLq[f] - uRq[f])

    RL = np.zeros((t.n_p, 4))
    RR = np.zeros((t.n_p, 4))
    lloc, rloc = ev.mesh.f_lloc[f], ev.mesh.f_rloc[f]
    # full basis traces at the face quadrature points via extraction maps
    phiL = (t.Vf @ t.E_face[lloc].T).T            # (N_p, n_qf) left basis traces
    phiR = (t.Vf @ t.E_face[rloc].T).T[:, ::-1]   # reversed to match left ordering
    RL -= np.einsum("iq,q,qk->ik", phiL, w, H)
    RR += np.einsum("iq,q,qk->ik", phiR, w, H)

    if theta != 0.0:
        dU = uLq[f] - uRq[f]
        GL = ph.diffusion_tensor(uLq[f], ev.gas)
        GR = ph.diffusion_tensor(uRq[f], ev.gas)
        VL = 0.5 * np.einsum("a,qk,qabkm->qbm", n, dU, GL)
        VR = 0.5 * np.einsum("a,qk,qabkm->qbm", n, dU, GR)
        ji_l, ji_r = ev.mesh.jac_inv[kl], ev.mesh.jac_inv[kr]
        # physical gradients of every left/right basis function at face quad pts
        gxL = (ji_l[0, 0] * ev.GxL[f] + ji_l[1, 0] * ev.GyL[f])
        gyL = (ji_l[0, 1] * ev.GxL[f] + ji_l[1, 1] * ev.GyL[f])
        gxR = (ji_r[0, 0] * ev.GxR[f] + ji_r[1, 0] * ev.GyR[f])
        gyR = (ji_r[0, 1] * ev.GxR[f] + ji_r[1, 1] * ev.GyR[f])
        coef = theta * 0.5 * ev.half_len[f]
        RL += coef * (np.einsum("iq,q,qm->im", gxL, ev.wf, VL[:, 0, :])
                      + np.einsum("iq,q,qm->im", gyL, ev.wf, VL[:, 1, :]))
        RR += coef * (np.einsum("iq,q,qm->im", gxR, ev.wf, VR[:, 0, :])
                      + np.einsum("iq,q,qm->im", gyR, ev.wf, VR[:, 1, :]))
    return f, kl, kr, RL, RR


@pytest.mark.parametrize("theta", [0.0, 1.0])
def test_interior_face_assembly_matches_dense_oracle(theta):
    """Residual difference from zeroing one interior face's flux equals the
    independently assembled dense contribution of that face."""
    ev = make_ev(2, 2, p=2, theta=theta)
    rng = np.random.default_rng(11)
    u = uniform(ev) * (1 + 0.04 * rng.normal(size=(ev.mesh.n_elements,
                                                   ev.tables.n_p, 4)))
    f, kl, kr, RL, RR = dense_face_contribution(ev, u, theta)

    R_full = ev.residual(u)
    # recompute with that single face's couplings switched off
    ev_masked = make_ev(2, 2, p=2, theta=theta)
    orig_flux = ev_masked._face_flux
    orig_lift = ev_masked._theta_lift

    def masked_flux(*args, **kw):
        H = orig_flux(*args, **kw)
        H[f] = 0.0
        return H

    def masked_lift(R, uLq, uRq):
        keep = ev_masked.half_len[f]
        ev_masked.half_len[f] = 0.0
        try:
            orig_lift(R, uLq, uRq)
        finally:
            ev_masked.half_len[f] = keep
    ev_masked._face_flux = masked_flux
    ev_masked._theta_lift = masked_lift
    R_masked = ev_masked.residual(u)

    diff = R_full - R_masked
    scale = max(1.0, np.abs(R_full).max())
    assert np.abs(diff[kl] - RL).max() < 1e-10 * scale
    assert np.abs(diff[kr] - RR).max() < 1e-10 * scale
    others = [k for k in range(ev.mesh.n_elements) if k not in (kl, kr)]
    assert np.abs(diff[others]).max() < 1e-12 * scale


def test_lift_term_linear_in_theta():
    """The symmetrisation term enters linearly: R(1) + R(-1) = 2 R(0) once
    the penalty (quadratic in theta through sigma) is held fixed."""
    evs = {th: make_ev(3, 3, p=2, theta=th) for th in (-1.0, 0.0, 1.0)}
    rng = np.random.default_rng(13)
    u = uniform(evs[0.0]) * (1 + 0.05 * rng.normal(
        size=(evs[0.0].mesh.n_elements, evs[0.0].tables.n_p, 4)))
    sig = evs[0.0].sigmas(u, (0.0, 0.0))
    R = {th: ev.residual(u, sigma=sig) for th, ev in evs.items()}
    lhs = R[1.0] + R[-1.0]
    rhs = 2.0 * R[0.0]
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() < 1e-11 * scale
    # and theta=1 differs from theta=0 (the lift is actually active)
    assert np.abs(R[1.0] - R[0.0]).max() > 1e-8 * scale


def test_checked_positivity_reports_on_wild_state():
    ev = make_ev()
    u = uniform(ev)
    u[3, :, 0] = -1.0
    with pytest.raises(ph.PositivityError):
        ev.residual(u)
