"""Explicit time integration and fluid-structure coupling.

A five-stage fourth-order low-storage (two-register) Runge-Kutta scheme
advances the fluid; a Newmark-beta step (constant average acceleration)
advances the one-degree-of-freedom oscillator carrying the body.  The
coupling is weak/staggered: each step the structure moves first using the
previous force, the mesh translates rigidly, and the fluid step sees the
resulting wall velocity held fixed across all RK stages.
"""

import io
from dataclasses import dataclass, replace
from fractions import Fraction as Fr

import numpy as np

from . import mesh as meshmod
from . import penalty as penaltymod

_CKPT_VERSION = 1


@dataclass(frozen=True)
class RKScheme:
    """Low-storage 2-register coefficients: K1 <- A_i K1 + dt f(t + c_i dt, K0);
    K0 <- K0 + B_i K1."""

    A: tuple
    B: tuple
    c: tuple

    def __post_init__(self):
        if self.A[0] != 0.0:
            raise ValueError("low-storage scheme must have A[0] = 0")

    @property
    def stages(self):
        return len(self.A)


def _fr(p, q):
    return float(Fr(p, q))


# classic 5-stage, 4th-order, 2N-storage Runge-Kutta coefficients
CK45 = RKScheme(
    A=(0.0,
       _fr(-567301805773, 1357537059087),
       _fr(-2404267990393, 2016746695238),
       _fr(-3550918686646, 2091501179385),
       _fr(-1275806237668, 842570457699)),
    B=(_fr(1432997174477, 9575080441755),
       _fr(5161836677717, 13612068292357),
       _fr(1720146321549, 2090206949498),
       _fr(3134564353537, 4481467310338),
       _fr(2277821191437, 14882151754819)),
    c=(0.0,
       _fr(1432997174477, 9575080441755),
       _fr(2526269341429, 6820363962896),
       _fr(2006345519317, 3224310063776),
       _fr(2802321613138, 2924317926251)),
)


def rk_step(u, t, dt, rhs, scheme=CK45):
    """One low-storage RK step; rhs(u, t) must return du/dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k0 = u.copy()
    k1 = np.zeros_like(u)
    for i in range(scheme.stages):
        try:
            k1 = scheme.A[i] * k1 + dt * rhs(k0, t + scheme.c[i] * dt)
        except Exception as exc:
            exc.args = (f"RK stage {i}: {exc.args[0] if exc.args else exc}",)
            raise
        k0 += scheme.B[i] * k1
    return k0


# ---------------------------------------------------------------------------
# structure

@dataclass(frozen=True)
class OscillatorState:
    y: float = 0.0
    ydot: float = 0.0
    yddot: float = None     # None -> initialised from the first force
    M_r: float = 1.0
    C_r: float = 0.0
    K_r: float = 0.0
    beta_N: float = 0.25
    gamma_N: float = 0.5

    def __post_init__(self):
        if self.M_r <= 0.0:
            raise ValueError("M_r must be positive")


def newmark_step(osc, F_r, dt):
    """Newmark predictor-corrector step of M y'' + C y' + K y = F_r."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a0 = osc.yddot
    if a0 is None:
        a0 = (F_r - osc.C_r * osc.ydot - osc.K_r * osc.y) / osc.M_r
    b, g = osc.beta_N, osc.gamma_N
    y_p = osc.y + dt * osc.ydot + dt * dt * (0.5 - b) * a0
    v_p = osc.ydot + dt * (1.0 - g) * a0
    a1 = (F_r - osc.C_r * v_p - osc.K_r * y_p) / (
        osc.M_r + g * dt * osc.C_r + b * dt * dt * osc.K_r)
    return replace(osc,
                   y=y_p + b * dt * dt * a1,
                   ydot=v_p + g * dt * a1,
                   yddot=a1)


@dataclass(frozen=True)
class StructuralSetup:
    M_r: float
    C_r: float
    K_r: float
    f_n: float
    mass: float


def structural_coefficients(U_star, m_star, xi, v_inf, D, rho_inf):
    """Reduced-velocity parametrisation of the mounted cylinder:
    f_n = v_inf / (U* D), M_r = 1, C_r = 4 pi f_n xi,
    K_r = (1 + 1/m*)(2 pi f_n)^2, mass = m* rho_inf pi D^2 / 4."""
    if U_star <= 0.0 or m_star <= 0.0 or D <= 0.0:
        raise ValueError("U*, m*, D must be positive")
    f_n = v_inf / (U_star * D)
    return StructuralSetup(
        M_r=1.0,
        C_r=4.0 * np.pi * f_n * xi,
        K_r=(1.0 + 1.0 / m_star) * (2.0 * np.pi * f_n) ** 2,
        f_n=f_n,
        mass=m_star * rho_inf * np.pi * D ** 2 / 4.0,
    )


# ---------------------------------------------------------------------------
# coupled loop

SERIES_HEADER = "t,CL,CD,y,ydot,dt"


@dataclass
class RunResult:
    series: np.ndarray          # rows of (t, CL, CD, y, ydot, dt)
    u: np.ndarray
    osc: OscillatorState
    t: float
    step: int
    displacement: float
    aborted: bool = False


def save_checkpoint(path, u, osc, t, step, displacement):
    buf = io.BytesIO()
    np.savez(buf, version=_CKPT_VERSION, t=t, step=step, u=u,
             displacement=displacement,
             y=osc.y, ydot=osc.ydot,
             yddot=np.nan if osc.yddot is None else osc.yddot,
             M_r=osc.M_r, C_r=osc.C_r, K_r=osc.K_r,
             beta_N=osc.beta_N, gamma_N=osc.gamma_N)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    with np.load(path) as z:
        if int(z["version"]) != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {z['version']}")
        yddot = float(z["yddot"])
        osc = OscillatorState(
            y=float(z["y"]), ydot=float(z["ydot"]),
            yddot=None if np.isnan(yddot) else yddot,
            M_r=float(z["M_r"]), C_r=float(z["C_r"]), K_r=float(z["K_r"]),
            beta_N=float(z["beta_N"]), gamma_N=float(z["gamma_N"]))
        return z["u"].copy(), osc, float(z["t"]), int(z["step"]), \
            float(z["displacement"])


def couple_run(ev, u0, force_fn, *, n_steps, dt=None, osc=None, mass=1.0,
               scheme=CK45, t0=0.0, step0=0, displacement0=0.0,
               ref_rho=1.0, ref_v=1.0, ref_D=1.0,
               series_path=None, checkpoint_path=None, checkpoint_every=0,
               motion_enabled=True):
    """Staggered FSI loop.  `ev` is a ResidualEvaluator, `force_fn(u, v_w)`
    returns the global (F_x, F_y) on the wall.  With `osc=None` or
    `motion_enabled=False` the body is held fixed (stationary-cylinder run).
    `dt=None` uses the CFL estimator each step.  Appends one series row
    (t, CL, CD, y, ydot, dt) per step."""
    u = u0.copy()
    oscillating = motion_enabled and osc is not None
    if osc is None:
        osc = OscillatorState()
    t, step, displacement = t0, step0, displacement0
    qref = 0.5 * ref_rho * ref_v ** 2 * ref_D
    rows = []
    fh = open(series_path, "a") if series_path else None
    if fh is not None and fh.tell() == 0:
        fh.write(SERIES_HEADER + "\n")

    def emit(row):
        rows.append(row)
        if fh is not None:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
            fh.flush()

    aborted = False
    try:
        v_w = (0.0, 0.0)
        fx, fy = force_fn(u, v_w)
        for _ in range(n_steps):
            last_good = (u, osc, t, step, displacement)
            if dt is None:
                lam = penaltymod.lambda_rayleigh(
                    ev.mesh, ev.tables, u, ev.gas, ev.config, v_w)
                dt_n = penaltymod.timestep(lam, ev.config)
            else:
                dt_n = dt
            if oscillating:
                osc = newmark_step(osc, fy / mass, dt_n)
                dy = osc.y - displacement
                displacement = osc.y
                meshmod.translate(ev.mesh, (0.0, dy))
                v_w = (0.0, dy / dt_n)
            else:
                v_w = (0.0, 0.0)

            def rhs(state, tau, v_w=v_w):
                sig = None
                if ev.config.freeze_sigma:
                    if not hasattr(rhs, "_sig"):
                        rhs._sig = ev.sigmas(state, v_w)
                    sig = rhs._sig
                return ev.apply_inverse_mass(
                    ev.residual(state, tau, v_w, sigma=sig))

            try:
                u = rk_step(u, t, dt_n, rhs, scheme)
            except Exception:
                aborted = True
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, *last_good)
                raise
            t += dt_n
            step += 1
            fx, fy = force_fn(u, v_w)
            emit((t, fy / qref, fx / qref, osc.y, osc.ydot, dt_n))
            if checkpoint_path and checkpoint_every and step % checkpoint_every == 0:
                save_checkpoint(checkpoint_path, u, osc, t, step, displacement)
    finally:
        if fh is not None:
            fh.close()

    return RunResult(series=np.array(rows).reshape(-1, 6), u=u, osc=osc,
                     t=t, step=step, displacement=displacement,
                     aborted=aborted)
