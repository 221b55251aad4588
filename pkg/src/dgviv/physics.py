"""Gas model for the 2D compressible Navier-Stokes system: state
conversions, advective and viscous fluxes, Roe numerical flux and the
ghost states used for boundary closure.

All operations are vectorised: a state array has shape (..., 4) holding
the conservative variables [rho, rho*v1, rho*v2, energy].
"""

from dataclasses import dataclass, field

import numpy as np


class PositivityError(Exception):
    """Density, pressure or Roe sound speed lost positivity."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{message} at {where}")
        self.where = where


@dataclass(frozen=True)
class GasParams:
    gamma: float = 1.4
    Pr: float = 0.72
    mu: float = 0.0
    c_V: float = 717.5

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError("gamma must be > 1")
        if self.Pr <= 0.0 or self.c_V <= 0.0 or self.mu < 0.0:
            raise ValueError("need Pr > 0, c_V > 0, mu >= 0")


@dataclass(frozen=True)
class FreeStream:
    rho: float
    v: tuple
    p: float

    def conservative(self, gas):
        v = np.asarray(self.v, dtype=float)
        eps = self.p / (gas.gamma - 1.0) + 0.5 * self.rho * (v @ v)
        return np.array([self.rho, self.rho * v[0], self.rho * v[1], eps])

    def sound_speed(self, gas):
        return np.sqrt(gas.gamma * self.p / self.rho)


def velocity(u):
    return u[..., 1:3] / u[..., 0:1]


def eos_pressure(u, gas, check=False):
    """p = (gamma-1) (eps - 0.5 rho |v|^2)."""
    rho = u[..., 0]
    ke = 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2) / rho
    p = (gas.gamma - 1.0) * (u[..., 3] - ke)
    if check and (np.any(rho <= 0.0) or np.any(p <= 0.0)):
        bad = np.nonzero((rho <= 0.0) | (p <= 0.0))
        raise PositivityError("nonpositive density or pressure",
                              where=tuple(b[0] for b in bad))
    return p


def primitive(u, gas):
    """Conservative -> (rho, v1, v2, p)."""
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    return rho, v1, v2, eos_pressure(u, gas)


def conservative(rho, v1, v2, p, gas):
    rho = np.asarray(rho, dtype=float)
    eps = p / (gas.gamma - 1.0) + 0.5 * rho * (v1 ** 2 + v2 ** 2)
    return np.stack([rho, rho * v1, rho * v2, eps], axis=-1)


def temperature(u, gas):
    rho, v1, v2, _ = primitive(u, gas)
    return (u[..., 3] / rho - 0.5 * (v1 ** 2 + v2 ** 2)) / gas.c_V


def sound_speed(u, gas):
    rho = u[..., 0]
    return np.sqrt(gas.gamma * eos_pressure(u, gas) / rho)


def advective_flux(u, v_w, gas):
    """ALE advective flux; shape (..., 4, 2), columns are x/y components."""
    rho, v1, v2, p = primitive(u, gas)
    eps = u[..., 3]
    f = np.empty(u.shape + (2,))
    f[..., 0, 0] = u[..., 1]
    f[..., 1, 0] = u[..., 1] * v1 + p
    f[..., 2, 0] = u[..., 2] * v1
    f[..., 3, 0] = v1 * (p + eps)
    f[..., 0, 1] = u[..., 2]
    f[..., 1, 1] = u[..., 1] * v2
    f[..., 2, 1] = u[..., 2] * v2 + p
    f[..., 3, 1] = v2 * (p + eps)
    f[..., 0] -= v_w[0] * u
    f[..., 1] -= v_w[1] * u
    return f


def normal_advective_flux(u, n, v_w, gas):
    """n . (F_c - v_w (x) U) for unit normals n of shape (..., 2)."""
    f = advective_flux(u, v_w, gas)
    return f[..., 0] * n[..., 0:1] + f[..., 1] * n[..., 1:2]


def diffusion_tensor(u, gas):
    """Viscous flux linearisation G(U); shape (..., 2, 2, 4, 4) so that
    F_v[a, k] = sum_{b, m} G[a, b, k, m] dU_m/dx_b."""
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    e_spec = u[..., 3] / rho
    q2 = v1 ** 2 + v2 ** 2
    gp = gas.gamma / gas.Pr
    mr = gas.mu / rho

    G = np.zeros(u.shape[:-1] + (2, 2, 4, 4))
    c41 = -q2 - gp * (e_spec - q2)

    g = G[..., 0, 0, :, :]
    g[..., 1, 0] = -(4.0 / 3.0) * v1
    g[..., 1, 1] = 4.0 / 3.0
    g[..., 2, 0] = -v2
    g[..., 2, 2] = 1.0
    g[..., 3, 0] = c41 - v1 ** 2 / 3.0
    g[..., 3, 1] = (4.0 / 3.0 - gp) * v1
    g[..., 3, 2] = (1.0 - gp) * v2
    g[..., 3, 3] = gp

    g = G[..., 0, 1, :, :]
    g[..., 1, 0] = (2.0 / 3.0) * v2
    g[..., 1, 2] = -2.0 / 3.0
    g[..., 2, 0] = -v1
    g[..., 2, 1] = 1.0
    g[..., 3, 0] = -v1 * v2 / 3.0
    g[..., 3, 1] = v2
    g[..., 3, 2] = -(2.0 / 3.0) * v1

    g = G[..., 1, 0, :, :]
    g[..., 1, 0] = -v2
    g[..., 1, 2] = 1.0
    g[..., 2, 0] = (2.0 / 3.0) * v1
    g[..., 2, 1] = -2.0 / 3.0
    g[..., 3, 0] = -v1 * v2 / 3.0
    g[..., 3, 1] = -(2.0 / 3.0) * v2
    g[..., 3, 2] = v1

    g = G[..., 1, 1, :, :]
    g[..., 1, 0] = -v1
    g[..., 1, 1] = 1.0
    g[..., 2, 0] = -(4.0 / 3.0) * v2
    g[..., 2, 2] = 4.0 / 3.0
    g[..., 3, 0] = c41 - v2 ** 2 / 3.0
    g[..., 3, 1] = (1.0 - gp) * v1
    g[..., 3, 2] = (4.0 / 3.0 - gp) * v2
    g[..., 3, 3] = gp

    return G * mr[..., None, None, None, None]


def viscous_flux(u, grad_u, gas):
    """F_v = G(U) grad U with grad_u of shape (..., 4, 2), evaluated in
    primitive variables (identical to the tensor contraction of
    viscous_flux_linearized(u, grad_u), but far cheaper)."""
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    # velocity gradients from conservative gradients
    dv1 = (grad_u[..., 1, :] - v1[..., None] * grad_u[..., 0, :]) / rho[..., None]
    dv2 = (grad_u[..., 2, :] - v2[..., None] * grad_u[..., 0, :]) / rho[..., None]
    div = dv1[..., 0] + dv2[..., 1]
    mu = gas.mu
    t11 = mu * (2.0 * dv1[..., 0] - 2.0 / 3.0 * div)
    t22 = mu * (2.0 * dv2[..., 1] - 2.0 / 3.0 * div)
    t12 = mu * (dv1[..., 1] + dv2[..., 0])
    e_spec = u[..., 3] / rho
    dT = ((grad_u[..., 3, :] - e_spec[..., None] * grad_u[..., 0, :]) / rho[..., None]
          - v1[..., None] * dv1 - v2[..., None] * dv2) / gas.c_V
    kq = mu * gas.gamma * gas.c_V / gas.Pr

    F = np.zeros(u.shape + (2,))
    F[..., 1, 0] = t11
    F[..., 1, 1] = t12
    F[..., 2, 0] = t12
    F[..., 2, 1] = t22
    F[..., 3, 0] = v1 * t11 + v2 * t12 + kq * dT[..., 0]
    F[..., 3, 1] = v1 * t12 + v2 * t22 + kq * dT[..., 1]
    return F


def viscous_flux_linearized(u, grad_u, gas):
    """F_v = G(U) grad W for independent state and gradient arguments
    (needed e.g. for the wall closure G(U^b) grad U^+)."""
    G = diffusion_tensor(u, gas)
    # F_v[..., k, a] = sum_{b, m} G[..., a, b, k, m] grad_u[..., m, b]
    return np.einsum('...abkm,...mb->...ka', G, grad_u)


def normal_g_matrix(u, n, gas):
    """The 4x4 contraction N G N^T = sum_{ab} n_a n_b G_ab."""
    G = diffusion_tensor(u, gas)
    return np.einsum('...a,...b,...abkm->...km', n, n, G)


# ---------------------------------------------------------------------------
# Roe approximate Riemann solver

def _roe_average(ul, ur, gas):
    rl, v1l, v2l, pl = primitive(ul, gas)
    rr, v1r, v2r, pr = primitive(ur, gas)
    sl, sr = np.sqrt(rl), np.sqrt(rr)
    w = sl / (sl + sr)
    v1 = w * v1l + (1.0 - w) * v1r
    v2 = w * v2l + (1.0 - w) * v2r
    Hl = (ul[..., 3] + pl) / rl
    Hr = (ur[..., 3] + pr) / rr
    H = w * Hl + (1.0 - w) * Hr
    c2 = (gas.gamma - 1.0) * (H - 0.5 * (v1 ** 2 + v2 ** 2))
    if np.any(c2 <= 0.0):
        raise PositivityError("nonpositive Roe-averaged sound speed")
    return sl * sr, v1, v2, H, np.sqrt(c2)


def roe_matrix(ul, ur, n, v_w, gas, absolute=True):
    """Roe matrix for the ALE flux along n; |A~| when absolute, signed A~
    otherwise.  Inputs broadcast over leading axes; n has shape (..., 2)."""
    _, u, v, H, c = _roe_average(ul, ur, gas)
    nx, ny = n[..., 0], n[..., 1]
    un = u * nx + v * ny
    ut = -u * ny + v * nx
    wn = v_w[0] * nx + v_w[1] * ny
    q2h = 0.5 * (u ** 2 + v ** 2)

    shape = np.broadcast(un, nx).shape
    R = np.zeros(shape + (4, 4))
    R[..., 0, 0] = 1.0
    R[..., 1, 0] = u - c * nx
    R[..., 2, 0] = v - c * ny
    R[..., 3, 0] = H - c * un
    R[..., 0, 1] = 1.0
    R[..., 1, 1] = u
    R[..., 2, 1] = v
    R[..., 3, 1] = q2h
    R[..., 1, 2] = -ny
    R[..., 2, 2] = nx
    R[..., 3, 2] = ut
    R[..., 0, 3] = 1.0
    R[..., 1, 3] = u + c * nx
    R[..., 2, 3] = v + c * ny
    R[..., 3, 3] = H + c * un

    lam = np.stack([un - wn - c, un - wn, un - wn, un - wn + c], axis=-1)
    if absolute:
        lam = np.abs(lam)
    return R @ (lam[..., :, None] * np.linalg.inv(R))


def roe_flux(ul, ur, n, v_w, gas):
    """Numerical advective flux along n (outward from the 'left' side):
    0.5 (F_n(U+) + F_n(U-)) - 0.5 |A~| (U- - U+)."""
    fl = normal_advective_flux(ul, n, v_w, gas)
    fr = normal_advective_flux(ur, n, v_w, gas)
    A = roe_matrix(ul, ur, n, v_w, gas, absolute=True)
    diss = np.einsum('...km,...m->...k', A, ur - ul)
    return 0.5 * (fl + fr) - 0.5 * diss


# ---------------------------------------------------------------------------
# Ghost states

def wall_ghost(u, v_w, gas):
    """Moving adiabatic wall: copy rho and p from the trace, impose v = v_w."""
    rho, _, _, p = primitive(u, gas)
    v1 = np.broadcast_to(v_w[0], rho.shape)
    v2 = np.broadcast_to(v_w[1], rho.shape)
    return conservative(rho, v1, v2, p, gas)


def farfield_ghost(freestream, gas, shape=()):
    u_inf = freestream.conservative(gas)
    return np.broadcast_to(u_inf, shape + (4,))
