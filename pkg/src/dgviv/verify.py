"""Verification machinery: manufactured solution and its source term,
error norms and convergence rates, aerodynamic force integration,
vorticity extraction/sampling, and DFT spectra of time series."""

from dataclasses import dataclass

import numpy as np

from . import physics, refelem


# ---------------------------------------------------------------------------
# manufactured solution

@dataclass(frozen=True)
class ManufacturedCase:
    kappa: float = 25.0
    C2: float = 200.0

    def __post_init__(self):
        if self.C2 <= 1.0:
            raise ValueError("C2 must exceed 1 for positive fields")


def manufactured_state(x, y, case):
    """Steady exact solution U = [s, s, s, s^2], s = sin(kappa (x+y)) + C2."""
    s = np.sin(case.kappa * (np.asarray(x) + np.asarray(y))) + case.C2
    return np.stack([s, s, s, s * s], axis=-1)


def manufactured_source(x, y, case, gas):
    """Source S = div(F_c - F_v) of the manufactured state (velocity is
    identically (1, 1), so only the heat flux contributes viscous terms)."""
    k, C2 = case.kappa, case.C2
    g, g1 = gas.gamma, gas.gamma - 1.0
    phi = k * (np.asarray(x) + np.asarray(y))
    c, s, s2 = np.cos(phi), np.sin(phi), np.sin(2.0 * phi)
    S1 = 2.0 * k * c
    Sm = k * g1 * s2 + (2.0 * k - k * g1 + 2.0 * k * C2 * g1) * c
    S4 = (2.0 * k * g * s2 + (4.0 * k * g * C2 - 2.0 * k * g1) * c
          + (2.0 * g * gas.mu * k * k / gas.Pr) * s)
    return np.stack([S1, Sm, Sm.copy(), S4], axis=-1)


# ---------------------------------------------------------------------------
# norms and rates

def _dense_lattice(n=15):
    pts = []
    for j in range(n + 1):
        for i in range(n + 1 - j):
            pts.append((-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n))
    return np.array(pts)


def error_norms(ev, u, exact_fn):
    """(L2, Linf) of u - exact over all four components; L2 by cubature,
    Linf over a dense per-element sample lattice."""
    t = ev.tables
    uq = np.einsum('qi,eik->eqk', t.Vq, u)
    err = uq - exact_fn(ev.xq[..., 0], ev.xq[..., 1])
    l2 = np.sqrt(np.einsum('e,q,eqk->', ev.det, ev.wq, err ** 2))

    lat = _dense_lattice()
    E = refelem.pkd_eval(t.p, lat[:, 0], lat[:, 1]) @ t.V_inv
    a = ev.mesh.vertices[ev.mesh.triangles[:, 0]]
    xs = a[:, None, :] + np.einsum('eab,qb->eqa', ev.mesh.jac, lat + 1.0)
    us = np.einsum('qi,eik->eqk', E, u)
    linf = np.abs(us - exact_fn(xs[..., 0], xs[..., 1])).max()
    return float(l2), float(linf)


def convergence_rate(errors, h):
    """Least-squares slope of log(error) against log(h)."""
    errors, h = np.asarray(errors, float), np.asarray(h, float)
    if len(errors) < 2 or len(errors) != len(h):
        raise ValueError("need at least two matching samples")
    if np.any(errors <= 0.0) or np.any(h <= 0.0):
        raise ValueError("errors and h must be positive")
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


# ---------------------------------------------------------------------------
# aerodynamic forces

@dataclass(frozen=True)
class AeroForces:
    F_x: float
    F_y: float
    M_z: float
    C_L: float
    C_D: float


def aero_forces(ev, u, freestream, D=1.0, x_ref=(0.0, 0.0), v_w=(0.0, 0.0)):
    """Integrates the traction t = (-p I + tau) nu over the wall, with nu
    the body-outward normal (the negative of the fluid-side face normal);
    lift/drag are resolved against the free-stream direction."""
    gas = ev.gas
    wall = np.nonzero(ev.is_wall)[0]
    if wall.size == 0:
        raise ValueError("mesh has no wall faces")

    uE = u[ev.mesh.f_left[wall]]
    uq = np.einsum('qa,fak->fqk', ev.tables.Vf,
                   u[ev.mesh.f_left[wall][:, None], ev.iL[wall]])
    drL = np.einsum('fiq,fik->fqk', ev.GxL[wall], uE)
    dsL = np.einsum('fiq,fik->fqk', ev.GyL[wall], uE)
    le = ev.mesh.f_left[wall]
    gx = ev.rx[le, None, None] * drL + ev.sx[le, None, None] * dsL
    gy = ev.ry[le, None, None] * drL + ev.sy[le, None, None] * dsL

    rho = uq[..., 0]
    v1, v2 = uq[..., 1] / rho, uq[..., 2] / rho
    p = physics.eos_pressure(uq, gas)
    # velocity gradients from conservative gradients
    du1 = (gx[..., 1] - v1 * gx[..., 0]) / rho, (gy[..., 1] - v1 * gy[..., 0]) / rho
    du2 = (gx[..., 2] - v2 * gx[..., 0]) / rho, (gy[..., 2] - v2 * gy[..., 0]) / rho
    div = du1[0] + du2[1]
    t11 = gas.mu * (2.0 * du1[0] - 2.0 / 3.0 * div)
    t22 = gas.mu * (2.0 * du2[1] - 2.0 / 3.0 * div)
    t12 = gas.mu * (du1[1] + du2[0])

    nu = -ev.nq[wall]                       # body-outward normal
    tx = -p * nu[..., 0] + t11 * nu[..., 0] + t12 * nu[..., 1]
    ty = -p * nu[..., 1] + t12 * nu[..., 0] + t22 * nu[..., 1]

    w = ev.half_len[wall][:, None] * ev.wf[None, :]
    F_x = float(np.sum(w * tx))
    F_y = float(np.sum(w * ty))
    xq = ev.xfq[wall]
    rx_, ry_ = xq[..., 0] - x_ref[0], xq[..., 1] - x_ref[1]
    M_z = float(np.sum(w * (rx_ * ty - ry_ * tx)))

    vinf = np.asarray(freestream.v, dtype=float)
    speed = np.linalg.norm(vinf)
    q = 0.5 * freestream.rho * speed ** 2 * D
    e_d = vinf / speed
    e_l = np.array([-e_d[1], e_d[0]])
    return AeroForces(F_x=F_x, F_y=F_y, M_z=M_z,
                      C_L=(F_x * e_l[0] + F_y * e_l[1]) / q,
                      C_D=(F_x * e_d[0] + F_y * e_d[1]) / q)


# ---------------------------------------------------------------------------
# spectra

def dft_spectrum(t, x, window="hann"):
    """Single-sided magnitude spectrum of an (optionally non-uniform) time
    series; the series is resampled to uniform spacing by linear
    interpolation first."""
    t, x = np.asarray(t, float), np.asarray(x, float)
    if len(t) < 16:
        raise ValueError("need at least 16 samples")
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("time samples must be strictly increasing")
    n = len(t)
    tu = np.linspace(t[0], t[-1], n)
    xu = np.interp(tu, t, x)
    if window == "hann":
        w = np.hanning(n)
    elif window in (None, "rect"):
        w = np.ones(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    xw = (xu - xu.mean()) * w
    mag = np.abs(np.fft.rfft(xw)) * 2.0 / w.sum()
    freq = np.fft.rfftfreq(n, d=(tu[-1] - tu[0]) / (n - 1))
    return freq, mag


def dominant_modes(freq, mag, k=2):
    """Top-k spectral peaks (local maxima, DC excluded) with parabolic
    peak interpolation; returns a list of (frequency, magnitude)."""
    freq, mag = np.asarray(freq), np.asarray(mag)
    interior = np.arange(1, len(mag) - 1)
    is_peak = (mag[interior] >= mag[interior - 1]) & (mag[interior] > mag[interior + 1])
    peaks = interior[is_peak]
    peaks = peaks[np.argsort(mag[peaks])[::-1][:k]]
    out = []
    df = freq[1] - freq[0]
    for i in peaks:
        a, b, c = mag[i - 1], mag[i], mag[i + 1]
        denom = a - 2.0 * b + c
        delta = 0.0 if denom == 0.0 else 0.5 * (a - c) / denom
        out.append((float(freq[i] + delta * df),
                    float(b - 0.25 * (a - c) * delta)))
    return out


def strouhal(freq, D, v_inf_norm):
    return freq * D / v_inf_norm


# ---------------------------------------------------------------------------
# vorticity and sampling

def vorticity_field(ev, u):
    """Nodal vorticity w = d(v2)/dx - d(v1)/dy via conservative gradients."""
    g = ev.broken_gradient(u)
    rho = u[..., 0]
    v1, v2 = u[..., 1] / rho, u[..., 2] / rho
    dv2dx = (g[..., 2, 0] - v2 * g[..., 0, 0]) / rho
    dv1dy = (g[..., 1, 1] - v1 * g[..., 0, 1]) / rho
    return dv2dx - dv1dy


def sample_line(ev, nodal_values, p0, p1, n=100):
    """Sample a per-node scalar along the segment p0 -> p1; returns
    (arclength positions, values).  Raises if a point falls outside."""
    mesh, t = ev.mesh, ev.tables
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    s = np.linspace(0.0, 1.0, n)
    pts = p0 + s[:, None] * (p1 - p0)

    a = mesh.vertices[mesh.triangles[:, 0]]
    # x = a + J (r+1, s+1)  =>  (r, s) = J^{-1}(x - a) - 1
    rs = np.einsum('eab,epb->epa', mesh.jac_inv,
                   pts[None, :, :] - a[:, None, :]) - 1.0
    tol = 1e-10
    inside = (rs[..., 0] >= -1.0 - tol) & (rs[..., 1] >= -1.0 - tol) \
        & (rs[..., 0] + rs[..., 1] <= tol)
    vals = np.empty(n)
    for j in range(n):
        elems = np.nonzero(inside[:, j])[0]
        if elems.size == 0:
            raise ValueError(f"sample point {pts[j]} outside the mesh")
        e = elems[0]
        phi = refelem.pkd_eval(t.p, rs[e, j, 0:1], rs[e, j, 1:2]) @ t.V_inv
        vals[j] = phi[0] @ nodal_values[e]
    x = s * np.linalg.norm(p1 - p0)
    return x, vals


# ---------------------------------------------------------------------------
# delimited output

def write_convergence_csv(path, rows):
    """rows: iterable of (p, h, L2, Linf)."""
    with open(path, "w") as fh:
        fh.write("p,h,L2,Linf\n")
        for p, h, l2, linf in rows:
            fh.write(f"{int(p)},{float(h)!r},{float(l2)!r},{float(linf)!r}\n")


def write_spectrum_csv(path, freq, mag):
    with open(path, "w") as fh:
        fh.write("f,mag\n")
        for f, m in zip(freq, mag):
            fh.write(f"{float(f)!r},{float(m)!r}\n")


def write_profile_csv(path, x, omega):
    with open(path, "w") as fh:
        fh.write("x,omega\n")
        for xi, w in zip(x, omega):
            fh.write(f"{float(xi)!r},{float(w)!r}\n")
