"""Semi-discrete DG residual assembly.

The residual R satisfies M dU/dt = R element-wise and collects, per
element: the weak (integrated-by-parts) volume term of the total flux
F = F_c - v_w (x) U - F_v, the interior-face Roe + interior-penalty
surface flux, the symmetrisation lift terms, and the boundary closures.
All nonlinear flux integrals are over-integrated with cubature exact to
degree p_f.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mesh as meshmod
from . import penalty as penaltymod
from . import physics


@dataclass
class StateField:
    """Per-element nodal conservative values with optional gradient cache."""

    u: np.ndarray                   # (n_elements, N_p, 4)
    t: float = 0.0
    grad: np.ndarray = None         # (n_elements, N_p, 4, 2) broken gradient

    def validate(self, gas):
        physics.eos_pressure(self.u, gas, check=True)


class ResidualEvaluator:
    """Assembles R(U, t, v_w) on a fixed mesh/order; a pure function of its
    arguments once constructed.  `n_threads` splits element-local work into
    contiguous blocks; face terms are scattered in fixed face order, so the
    result is bitwise identical for any worker count."""

    def __init__(self, mesh, tables, gas, config, freestream=None, n_threads=1):
        self.mesh = mesh
        self.tables = tables
        self.gas = gas
        self.config = config
        self.freestream = freestream
        self.n_threads = max(1, int(n_threads))

        if np.any(mesh.f_tag[mesh.f_right < 0] == meshmod.FARFIELD) and freestream is None:
            raise ValueError("mesh has far-field faces but no free stream given")

        ji = mesh.jac_inv
        self.rx, self.sx = ji[:, 0, 0], ji[:, 1, 0]
        self.ry, self.sy = ji[:, 0, 1], ji[:, 1, 1]
        self.det = mesh.det_jac

        t = tables
        self.n_p = t.n_p
        fidx = np.stack(t.nodes.face_index)                 # (3, p+1)
        self.iL = fidx[mesh.f_lloc]                         # (n_faces, p+1)
        rloc = np.where(mesh.f_right >= 0, mesh.f_rloc, 0)
        # the neighbour walks the shared face backwards; align to the left
        self.iR = fidx[rloc][:, ::-1]
        self.right = np.where(mesh.f_right >= 0, mesh.f_right, mesh.f_left)
        self.interior = mesh.f_right >= 0
        self.half_len = 0.5 * mesh.f_len
        self.is_wall = (~self.interior) & (mesh.f_tag == meshmod.WALL)
        self.is_far = (~self.interior) & (mesh.f_tag == meshmod.FARFIELD)

        # face-quadrature trace tables gathered per face (left/right sides)
        self.GxL = t.Gface_x[mesh.f_lloc]                   # (n_faces, N_p, n_qf)
        self.GyL = t.Gface_y[mesh.f_lloc]
        self.GxR = t.Gface_x[rloc][:, :, ::-1]
        self.GyR = t.Gface_y[rloc][:, :, ::-1]
        self.GxLT = np.ascontiguousarray(self.GxL.transpose(0, 2, 1))
        self.GyLT = np.ascontiguousarray(self.GyL.transpose(0, 2, 1))
        self.GxRT = np.ascontiguousarray(self.GxR.transpose(0, 2, 1))
        self.GyRT = np.ascontiguousarray(self.GyR.transpose(0, 2, 1))
        self.wf = t.cubature_face[1]
        self.nq = np.broadcast_to(
            mesh.f_normal[:, None, :], (mesh.n_faces, len(self.wf), 2))

        # per-face trace-inverse constants (max over the two elements)
        p = t.p
        cl = penaltymod.trace_inverse_constant(mesh.f_len, mesh.area[mesh.f_left], p)
        cr = penaltymod.trace_inverse_constant(mesh.f_len, mesh.area[self.right], p)
        self.cinv_face = np.maximum(cl, cr)

        # physical cubature points for source evaluation
        ref, self.wq = t.cubature_volume
        a = mesh.vertices[mesh.triangles[:, 0]]             # vertex at (-1,-1)
        self.xq = a[:, None, :] + np.einsum('eab,qb->eqa', mesh.jac, ref + 1.0)

        # physical face-node / face-quadrature coordinates (boundary ghosts)
        pts = t.nodes.points
        xn = a[:, None, :] + np.einsum('eab,qb->eqa', mesh.jac, pts + 1.0)
        self.xfn = xn[mesh.f_left[:, None], self.iL]
        self.xfq = np.einsum('qa,fad->fqd', t.Vf, self.xfn)

    # -- element-local pieces ------------------------------------------------

    def _blocks(self):
        n = self.mesh.n_elements
        k = min(self.n_threads, n)
        edges = np.linspace(0, n, k + 1, dtype=int)
        return [slice(edges[i], edges[i + 1]) for i in range(k)]

    def _run_blocked(self, fn):
        blocks = self._blocks()
        if len(blocks) == 1:
            fn(blocks[0])
            return
        with ThreadPoolExecutor(max_workers=len(blocks)) as ex:
            list(ex.map(fn, blocks))

    def broken_gradient(self, u):
        """Element-local x/y derivatives of each component: (n_e, N_p, 4, 2)."""
        t = self.tables
        out = np.empty(u.shape + (2,))

        def work(sl):
            dr = t.Dx @ u[sl]
            ds = t.Dy @ u[sl]
            out[sl, ..., 0] = (self.rx[sl, None, None] * dr
                               + self.sx[sl, None, None] * ds)
            out[sl, ..., 1] = (self.ry[sl, None, None] * dr
                               + self.sy[sl, None, None] * ds)

        self._run_blocked(work)
        return out

    def volume_residual(self, u, grad, v_w, out=None):
        """Weak volume term of F = F_c - v_w (x) U - F_v at cubature points."""
        t, gas = self.tables, self.gas
        R = np.zeros(u.shape) if out is None else out

        def work(sl):
            uq = t.Vq @ u[sl]
            physics.eos_pressure(uq, gas, check=True)
            F = physics.advective_flux(uq, v_w, gas)
            if gas.mu > 0.0:
                g2 = grad[sl]
                gq = (t.Vq @ g2.reshape(g2.shape[0], g2.shape[1], 8)).reshape(
                    g2.shape[0], -1, 4, 2)
                F -= physics.viscous_flux(uq, gq, gas)
            fx, fy = F[..., 0], F[..., 1]
            wx_fx = t.Wx @ fx
            wy_fx = t.Wy @ fx
            wx_fy = t.Wx @ fy
            wy_fy = t.Wy @ fy
            R[sl] += self.det[sl, None, None] * (
                self.rx[sl, None, None] * wx_fx + self.sx[sl, None, None] * wy_fx
                + self.ry[sl, None, None] * wx_fy + self.sy[sl, None, None] * wy_fy)

        self._run_blocked(work)
        return R

    # -- face machinery ------------------------------------------------------

    def _nodal_traces(self, u, v_w):
        """Nodal face traces aligned to the left orientation, with ghost
        states substituted on boundary faces."""
        uL = u[self.mesh.f_left[:, None], self.iL]
        uR = u[self.right[:, None], self.iR]
        if np.any(self.is_wall):
            uR[self.is_wall] = physics.wall_ghost(uL[self.is_wall], v_w, self.gas)
        if np.any(self.is_far):
            uR[self.is_far] = self._far_state(self.xfn[self.is_far])
        return uL, uR

    def _far_state(self, x):
        """Far-field exterior state: either a constant free stream or a
        user-supplied state function of position."""
        if callable(self.freestream):
            return self.freestream(x[..., 0], x[..., 1])
        return self.freestream.conservative(self.gas)

    def sigmas(self, u, v_w):
        """Face penalties from current nodal traces."""
        if self.gas.mu == 0.0:
            return np.zeros(self.mesh.n_faces)
        uL, uR = self._nodal_traces(u, v_w)
        gbar = penaltymod.gbar_face(uL, uR, self.mesh.f_normal[:, None, :], self.gas)
        return penaltymod.penalty_sigma(gbar, self.cinv_face, self.config)

    def _quad_traces(self, u, grad, v_w):
        t = self.tables
        uLn, uRn = self._nodal_traces(u, v_w)
        uLq = t.Vf @ uLn
        uRq = t.Vf @ uRn
        physics.eos_pressure(uLq, self.gas, check=True)
        # boundary ghosts are re-evaluated pointwise at quadrature
        if np.any(self.is_wall):
            uRq[self.is_wall] = physics.wall_ghost(uLq[self.is_wall], v_w, self.gas)
        if np.any(self.is_far):
            uRq[self.is_far] = self._far_state(self.xfq[self.is_far])

        gL = gR = None
        if self.gas.mu > 0.0:
            uE = u[self.mesh.f_left]
            drL = self.GxLT @ uE
            dsL = self.GyLT @ uE
            le = self.mesh.f_left
            gL = np.stack([self.rx[le, None, None] * drL + self.sx[le, None, None] * dsL,
                           self.ry[le, None, None] * drL + self.sy[le, None, None] * dsL],
                          axis=-1)
            uE = u[self.right]
            drR = self.GxRT @ uE
            dsR = self.GyRT @ uE
            re = self.right
            gR = np.stack([self.rx[re, None, None] * drR + self.sx[re, None, None] * dsR,
                           self.ry[re, None, None] * drR + self.sy[re, None, None] * dsR],
                          axis=-1)
        return uLq, uRq, gL, gR

    def _face_flux(self, uLq, uRq, gL, gR, sigma, v_w):
        """H_m at face quadrature, from the left element's viewpoint."""
        gas = self.gas
        n = self.mesh.f_normal[:, None, :]
        H = np.empty(uLq.shape)

        idx = self.interior | self.is_far
        if np.any(idx):
            H[idx] = physics.roe_flux(uLq[idx], uRq[idx], n[idx], v_w, gas)
        if np.any(self.is_wall):
            H[self.is_wall] = physics.normal_advective_flux(
                uRq[self.is_wall], n[self.is_wall], v_w, gas)

        if gas.mu > 0.0:
            nq = self.nq
            FvLn = np.einsum('fqka,fqa->fqk',
                             physics.viscous_flux(uLq, gL, gas), nq)
            visc = np.empty_like(H)
            ii = self.interior
            FvRn = np.einsum('fqka,fqa->fqk',
                             physics.viscous_flux(uRq[ii], gR[ii], gas), nq[ii])
            visc[ii] = 0.5 * (FvLn[ii] + FvRn)
            visc[self.is_far] = FvLn[self.is_far]
            iw = self.is_wall
            if np.any(iw):
                # wall closure: G(U^b) grad U+
                visc[iw] = np.einsum(
                    'fqka,fqa->fqk',
                    physics.viscous_flux_linearized(uRq[iw], gL[iw], gas),
                    nq[iw])
            H -= visc

        H += sigma[:, None, None] * (uLq - uRq)
        return H

    def _scatter_faces(self, R, H):
        t = self.tables
        tmp = np.einsum('qa,q,fqk->fak', t.Vf, self.wf, H)
        tmp *= self.half_len[:, None, None]
        flat = R.reshape(-1, 4)
        np.add.at(flat, self.mesh.f_left[:, None] * self.n_p + self.iL, -tmp)
        ii = self.interior
        np.add.at(flat, self.mesh.f_right[ii, None] * self.n_p + self.iR[ii], tmp[ii])

    def _theta_lift(self, R, uLq, uRq):
        """Symmetrisation terms: theta * int_e 1/2 [(dU)^T N+ G] : grad l_i."""
        theta, gas = self.config.theta, self.gas
        if theta == 0.0 or gas.mu == 0.0:
            return
        dU = uLq - uRq
        w = self.wf * theta
        # interior faces carry the 1/2 average; boundary lifts are one-sided
        half = np.where(self.interior, 0.5, 1.0)
        coef = half * self.half_len

        for side in ('left', 'right'):
            if side == 'left':
                elems, Gx, Gy = self.mesh.f_left, self.GxL, self.GyL
                # G evaluated at the interior trace; walls use the ghost state
                ug = np.where(self.is_wall[:, None, None], uRq, uLq)
                sel = slice(None)
            else:
                sel = self.interior
                if not np.any(sel):
                    continue
                elems = self.mesh.f_right[sel]
                Gx, Gy = self.GxR[sel], self.GyR[sel]
                ug = uRq[sel]
            G = physics.diffusion_tensor(ug, gas)
            # V[b, m] = 1/2 sum_{a,k} n_a dU_k G[a, b, k, m]
            V = 0.5 * np.einsum('fqa,fqk,fqabkm->fqbm',
                                self.nq[sel], dU[sel], G)
            rx, sx = self.rx[elems], self.sx[elems]
            ry, sy = self.ry[elems], self.sy[elems]
            dx = rx[:, None, None] * Gx + sx[:, None, None] * Gy
            dy = ry[:, None, None] * Gx + sy[:, None, None] * Gy
            lift = (np.einsum('fiq,q,fqk->fik', dx, w, V[..., 0, :])
                    + np.einsum('fiq,q,fqk->fik', dy, w, V[..., 1, :]))
            lift *= coef[sel][:, None, None] if side == 'right' else \
                coef[:, None, None]
            np.add.at(R, elems, lift)

    # -- public assembly -----------------------------------------------------

    def residual(self, u, t=0.0, v_w=(0.0, 0.0), sigma=None):
        """R such that M dU/dt = R; shape (n_elements, N_p, 4)."""
        grad = self.broken_gradient(u) if self.gas.mu > 0.0 else None
        R = self.volume_residual(u, grad, v_w)
        if sigma is None:
            sigma = self.sigmas(u, v_w)
        uLq, uRq, gL, gR = self._quad_traces(u, grad, v_w)
        H = self._face_flux(uLq, uRq, gL, gR, sigma, v_w)
        self._scatter_faces(R, H)
        self._theta_lift(R, uLq, uRq)
        return R

    def apply_inverse_mass(self, R):
        """Per-element M_K^{-1} R_K with M_K = |J_K| M-hat."""
        out = np.empty_like(R)

        def work(sl):
            out[sl] = (self.tables.M_inv @ R[sl]) / self.det[sl, None, None]

        self._run_blocked(work)
        return out

    def apply_mass(self, R):
        return (self.tables.M @ R) * self.det[:, None, None]

    def volume_source(self, fn, t=0.0):
        """Weak source contribution int_K S l_i for S = fn(x, y, t)."""
        S = fn(self.xq[..., 0], self.xq[..., 1], t)
        return self.det[:, None, None] * np.einsum(
            'qi,q,eqk->eik', self.tables.Vq, self.wq, S)

    def interpolate(self, fn, t=0.0):
        """Nodal interpolant of fn(x, y, t) -> (n_e, N_p, 4)."""
        pts = self.tables.nodes.points
        a = self.mesh.vertices[self.mesh.triangles[:, 0]]
        x = a[:, None, :] + np.einsum('eab,qb->eqa', self.mesh.jac, pts + 1.0)
        return fn(x[..., 0], x[..., 1], t)
