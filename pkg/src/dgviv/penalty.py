"""Interior-penalty parameter and explicit time-step estimators.

The face penalty sigma_e is built from a trace inverse inequality and the
local size of the diffusion tensor; the two estimators Lambda (a numerical
range bound for the semi-discrete operator) and Lambda-tilde (an operator
norm bound) convert flow state plus mesh data into an admissible explicit
time step through delta_t = C_CFL / Lambda.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import physics, refelem

_D = 2  # spatial dimension

# inradius of the reference triangle (-1,-1), (1,-1), (-1,1)
_RHO_REF = 2.0 - np.sqrt(2.0)


@dataclass(frozen=True)
class PenaltyConfig:
    theta: float = 0.0          # IP variant: 1 symmetric, 0 incomplete
    C_1: float = 0.01           # penalty constant
    C_CFL: float = 0.8          # Courant constant
    C_grad: float = None        # gradient inverse constant; None -> calibrated
    dt_max: float = 1.0         # returned when no dynamics bound the step
    freeze_sigma: bool = False  # reuse sigma_e across RK stages of one step

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [-1, 1]")
        if self.C_1 < 0.0:
            raise ValueError("C_1 must be >= 0")
        if self.C_CFL <= 0.0 or self.dt_max <= 0.0:
            raise ValueError("C_CFL and dt_max must be positive")


def trace_inverse_constant(face_len, area, p):
    """C_inv(e, K, p) = (p+1)(p+d)|e| / (d|K|)."""
    return (p + 1) * (p + _D) * np.asarray(face_len) / (_D * np.asarray(area))


@lru_cache(maxsize=None)
def grad_inverse_constant(p):
    """Calibrated constant C_grad such that on any triangle K

        ||grad q||_K^2 <= C_grad p^4 rho_K^{-2} ||q||_K^2,  q in P_p(K),

    with rho_K the inradius.  The supremum over P_p on the reference
    triangle is the largest eigenvalue of the stiffness/mass pencil, which
    is sharp rather than a sampled lower bound."""
    tab = refelem.build_tables(p)
    pts, w = tab.cubature_volume
    S = tab.Vq_dx.T @ (w[:, None] * tab.Vq_dx) + tab.Vq_dy.T @ (w[:, None] * tab.Vq_dy)
    lam_max = scipy.linalg.eigh(S, tab.M, eigvals_only=True)[-1]
    return lam_max * _RHO_REF ** 2 / p ** 4


def grad_inverse_bound(p, inradius, config):
    """C_inv,2(K) = C_grad p^4 rho_K^{-2} for each element."""
    c = config.C_grad if config.C_grad is not None else grad_inverse_constant(p)
    return c * p ** 4 / np.asarray(inradius) ** 2


def gbar_face(u_left, u_right, n, gas):
    """Gbar_e: max over the two traces and over face points of the spectral
    norm of N G N^T.  Traces have shape (..., n_pts, 4); u_right may be None
    on a boundary face.  n broadcasts against the point axis."""
    n = np.asarray(n, dtype=float)
    M = physics.normal_g_matrix(u_left, n, gas)
    g = np.linalg.svd(M, compute_uv=False)[..., 0].max(axis=-1)
    if u_right is not None:
        Mr = physics.normal_g_matrix(u_right, n, gas)
        gr = np.linalg.svd(Mr, compute_uv=False)[..., 0].max(axis=-1)
        g = np.maximum(g, gr)
    return g


def penalty_sigma(gbar, cinv_max, config):
    """sigma_e = C_1 (1+theta)^2 (d+1) Gbar_e max(C_inv)."""
    return config.C_1 * (1.0 + config.theta) ** 2 * (_D + 1) * gbar * cinv_max


def face_traces(mesh, tables, u):
    """Nodal traces of u on every face: (u_left, u_right) with shape
    (n_faces, p+1, 4); the right trace holds the left values on boundary
    faces (callers substitute ghost states as needed)."""
    fidx = np.stack(tables.nodes.face_index)        # (3, p+1)
    il = fidx[mesh.f_lloc]                          # (n_faces, p+1)
    ul = u[mesh.f_left[:, None], il]
    interior = mesh.f_right >= 0
    right = np.where(interior, mesh.f_right, mesh.f_left)
    ir = fidx[np.where(interior, mesh.f_rloc, mesh.f_lloc)]
    # the neighbour traverses the shared face in the opposite direction
    ur = u[right[:, None], ir][:, ::-1]
    return ul, np.where(interior[:, None, None], ur, ul)


def face_sigmas(mesh, tables, u, gas, config):
    """sigma_e for every face of the mesh from current nodal traces."""
    ul, ur = face_traces(mesh, tables, u)
    gbar = gbar_face(ul, np.where((mesh.f_right >= 0)[:, None, None], ur, ul),
                     mesh.f_normal[:, None, :], gas)
    p = tables.p
    cl = trace_inverse_constant(mesh.f_len, mesh.area[mesh.f_left], p)
    cr = np.where(mesh.f_right >= 0,
                  trace_inverse_constant(
                      mesh.f_len, mesh.area[np.maximum(mesh.f_right, 0)], p),
                  cl)
    return penalty_sigma(gbar, np.maximum(cl, cr), config)


# ---------------------------------------------------------------------------
# per-element ingredients for the time-step estimators

def element_wavespeed(u, v_w, gas):
    """beta_K = max over nodes of |v - v_w| + sqrt(gamma p / rho)."""
    rho, v1, v2, p = physics.primitive(u, gas)
    b = np.hypot(v1 - v_w[0], v2 - v_w[1]) + np.sqrt(gas.gamma * p / rho)
    return b.max(axis=-1)


def element_divergence_bound(mesh, tables, u):
    """beta'_K = 0.5 max over nodes of |div v| from broken gradients."""
    v = u[..., 1:3] / u[..., 0:1]
    dr = np.einsum('ij,ejk->eik', tables.Dx, v)
    ds = np.einsum('ij,ejk->eik', tables.Dy, v)
    ji = mesh.jac_inv
    div = (ji[:, None, 0, 0] * dr[..., 0] + ji[:, None, 1, 0] * ds[..., 0]
           + ji[:, None, 0, 1] * dr[..., 1] + ji[:, None, 1, 1] * ds[..., 1])
    return 0.5 * np.abs(div).max(axis=-1)


def element_g_norm(u, gas):
    """Max over nodes of the spectral norm of the full diffusion tensor,
    arranged as the 8x8 block matrix [G_ab]."""
    G = physics.diffusion_tensor(u, gas)
    n_e, n_p = u.shape[0], u.shape[1]
    G8 = G.transpose(0, 1, 2, 4, 3, 5).reshape(n_e, n_p, 8, 8)
    return np.linalg.svd(G8, compute_uv=False)[..., 0].max(axis=-1)


def neighborhood_max(mesh, vals):
    """Max of an element-wise quantity over each element and its
    face-neighbours, reduced in fixed face order for determinism."""
    out = vals.copy()
    interior = mesh.f_right >= 0
    le, re = mesh.f_left[interior], mesh.f_right[interior]
    np.maximum.at(out, le, vals[re])
    np.maximum.at(out, re, vals[le])
    return out


def element_sigma_max(mesh, sigma):
    """sigma_K = max over the faces of each element."""
    out = np.zeros(mesh.n_elements)
    np.maximum.at(out, mesh.f_left, sigma)
    interior = mesh.f_right >= 0
    np.maximum.at(out, mesh.f_right[interior], sigma[interior])
    return out


def element_cinv_max(mesh, p):
    """C_inv,K = max over the faces of each element of C_inv(e, K, p)."""
    out = np.zeros(mesh.n_elements)
    np.maximum.at(out, mesh.f_left,
                  trace_inverse_constant(mesh.f_len, mesh.area[mesh.f_left], p))
    interior = mesh.f_right >= 0
    re = mesh.f_right[interior]
    np.maximum.at(out, re,
                  trace_inverse_constant(mesh.f_len[interior], mesh.area[re], p))
    return out


def _estimator_inputs(mesh, tables, u, gas, config, v_w):
    if mesh.n_elements == 0:
        raise ValueError("empty mesh")
    beta = element_wavespeed(u, v_w, gas)
    beta_p = element_divergence_bound(mesh, tables, u)
    cinv = element_cinv_max(mesh, tables.p)
    cinv2 = grad_inverse_bound(tables.p, mesh.inradius, config)
    if gas.mu > 0.0:
        sigma_K = element_sigma_max(mesh, face_sigmas(mesh, tables, u, gas, config))
        G_K = neighborhood_max(mesh, element_g_norm(u, gas))
    else:
        sigma_K = np.zeros(mesh.n_elements)
        G_K = np.zeros(mesh.n_elements)
    return beta, beta_p, cinv, cinv2, sigma_K, G_K


def lambda_rayleigh_elements(mesh, tables, u, gas, config, v_w=(0.0, 0.0)):
    """Per-element contributions to the numerical-range bound Lambda."""
    beta, beta_p, cinv, cinv2, sigma_K, G_K = _estimator_inputs(
        mesh, tables, u, gas, config, v_w)
    return 1.5 * cinv2 * G_K + (_D + 1) * cinv * (3.0 * sigma_K + beta) + beta_p


def lambda_rayleigh(mesh, tables, u, gas, config, v_w=(0.0, 0.0)):
    """Lambda = max_K [ 3/2 C_inv,2 G_K + (d+1) C_inv,K (3 sigma_K + beta_K)
    + beta'_K ]."""
    return float(lambda_rayleigh_elements(mesh, tables, u, gas, config, v_w).max())


def lambda_tilde_elements(mesh, tables, u, gas, config, v_w=(0.0, 0.0)):
    """Per-element sqrt(2(Lambda_a,K + Lambda_d,K)) of the operator-norm
    bound Lambda-tilde."""
    beta, beta_p, cinv, cinv2, sigma_K, G_K = _estimator_inputs(
        mesh, tables, u, gas, config, v_w)
    lam_a = ((np.sqrt(cinv2) + (_D + 1) * cinv) * beta + beta_p) ** 2
    if gas.mu > 0.0:
        if np.any(sigma_K <= 0.0):
            raise ValueError(
                "sigma_K = 0 with mu > 0: Lambda-tilde diffusion term is "
                "undefined (is C_1 = 0 or theta = -1?)")
        Gt = neighborhood_max(mesh, G_K)
        lam_d = (config.C_1 * Gt * cinv2 / (8.0 * sigma_K * cinv)
                 + Gt ** 2 * cinv2 ** 2
                 + 2.0 * Gt * sigma_K * cinv * cinv2 / config.C_1)
    else:
        lam_d = 0.0
    return np.sqrt(2.0 * (lam_a + lam_d))


def lambda_tilde(mesh, tables, u, gas, config, v_w=(0.0, 0.0)):
    return float(lambda_tilde_elements(mesh, tables, u, gas, config, v_w).max())


def timestep(lam, config):
    """delta_t = C_CFL / Lambda, capped by dt_max when Lambda vanishes."""
    if lam < 0.0 or not np.isfinite(lam):
        raise ValueError(f"invalid estimator value {lam}")
    if lam == 0.0:
        return config.dt_max
    return min(config.C_CFL / lam, config.dt_max)
