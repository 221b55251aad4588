"""Command-line drivers.

Subcommands: convergence (manufactured-solution study), cylinder
(stationary-cylinder shedding run), viv (elastically mounted cylinder),
penalty-report (per-face sigma_e), cfl-report (per-element time-step
estimators).  Every delimited output gets a rendered figure next to it.
"""

import argparse
import json
import os

import numpy as np

from . import (config as configmod, dg_core, mesh as meshmod, penalty,
               physics, refelem, report, time_fsi, verify, vtk_io)


def _freestream(cfg, gas):
    c = np.sqrt(gas.gamma * cfg.freestream.p / cfg.freestream.rho)
    speed = cfg.freestream.Ma * c
    ang = np.deg2rad(cfg.freestream.angle)
    return physics.FreeStream(rho=cfg.freestream.rho,
                              v=(speed * np.cos(ang), speed * np.sin(ang)),
                              p=cfg.freestream.p)


def _gas(cfg, with_re=False):
    mu = cfg.gas.mu
    if mu is None:
        if not with_re:
            raise configmod.ConfigError("gas.mu must be set for this run")
        rho = cfg.freestream.rho
        c = np.sqrt(cfg.gas.gamma * cfg.freestream.p / rho)
        mu = rho * cfg.freestream.Ma * c * cfg.body.D / cfg.body.Re
    return physics.GasParams(gamma=cfg.gas.gamma, Pr=cfg.gas.Pr,
                             mu=mu, c_V=cfg.gas.c_V)


def _pconfig(cfg):
    return penalty.PenaltyConfig(
        theta=float(cfg.discretization.theta), C_1=cfg.discretization.C_1,
        C_CFL=cfg.time.C_CFL, dt_max=cfg.time.dt_max,
        freeze_sigma=cfg.time.freeze_sigma)


def _load_mesh(cfg):
    if cfg.io.mesh is not None:
        return meshmod.load_msh(cfg.io.mesh)
    from importlib.resources import files
    path = files("dgviv").joinpath("data/cylinder.msh")
    return meshmod.load_msh(str(path))


def _outdir(cfg):
    os.makedirs(cfg.io.output_dir, exist_ok=True)
    return cfg.io.output_dir


def _convergence_mesh(family, nx):
    if family == "m1":
        return meshmod.generate_structured(nx, nx, rect=(0, 0, 1, 1))
    if family == "m2":
        return meshmod.generate_structured(nx, nx, rect=(0, 0, 1, 1),
                                           skew_layer=True)
    raise configmod.ConfigError(f"unknown mesh family {family!r}")


def march_to_steady(ev, u, source, dt, max_iters, stall_tol):
    """March the forced problem until the residual norm stalls; returns
    (state, iterations, final residual norm)."""

    def rhs(state, t):
        return ev.apply_inverse_mass(ev.residual(state, t) + source)

    prev = None
    check = 50
    for it in range(max_iters):
        u = time_fsi.rk_step(u, 0.0, dt, rhs)
        if (it + 1) % check == 0:
            rn = float(np.abs(rhs(u, 0.0)).max())
            if prev is not None and abs(rn - prev) <= stall_tol * max(1.0, rn):
                return u, it + 1, rn
            prev = rn
    return u, max_iters, float(np.abs(rhs(u, 0.0)).max())


def run_convergence(cfg, n_threads=1):
    """Manufactured-solution study over (p, h) for both IP variants."""
    out = _outdir(cfg)
    gas = _gas(cfg)
    mc = cfg.manufactured
    case = verify.ManufacturedCase(kappa=mc.kappa, C2=mc.C2)

    def exact(x, y, t=0.0):
        return verify.manufactured_state(x, y, case)

    summary = {}
    for theta, label in ((0.0, "iip"), (1.0, "sip")):
        rows, sigma_max = [], 0.0
        rates = {}
        for p in mc.orders:
            tables = refelem.build_tables(p, cfg.discretization.p_f)
            errs, hs = [], []
            for nx in mc.refinements:
                mesh = _convergence_mesh(mc.mesh_family, nx)
                pcfg = penalty.PenaltyConfig(
                    theta=theta, C_1=cfg.discretization.C_1,
                    C_CFL=cfg.time.C_CFL, dt_max=cfg.time.dt_max)
                ev = dg_core.ResidualEvaluator(mesh, tables, gas, pcfg,
                                               freestream=exact,
                                               n_threads=n_threads)
                u = ev.interpolate(exact)
                src = ev.volume_source(
                    lambda x, y, t: verify.manufactured_source(x, y, case, gas))
                dt = cfg.time.dt
                if dt is None:
                    lam = penalty.lambda_rayleigh(mesh, tables, u, gas, pcfg)
                    dt = penalty.timestep(lam, pcfg)
                u, iters, resid = march_to_steady(
                    ev, u, src, dt, mc.max_iters, mc.stall_tol)
                l2, linf = verify.error_norms(ev, u, exact)
                sigma_max = max(sigma_max,
                                float(ev.sigmas(u, (0.0, 0.0)).max()))
                h = 1.0 / nx
                rows.append((p, h, l2, linf))
                errs.append(l2)
                hs.append(h)
                print(f"[{label}] p={p} h=1/{nx} iters={iters} "
                      f"L2={l2:.4e} Linf={linf:.4e}")
            rates[p] = verify.convergence_rate(errs, hs)
        csv_path = os.path.join(out, f"convergence_{label}.csv")
        verify.write_convergence_csv(csv_path, rows)
        report.plot_convergence(rows, os.path.join(out, f"convergence_{label}.png"))
        summary[label] = {"rates": {str(k): v for k, v in rates.items()},
                          "sigma_max": sigma_max}
    with open(os.path.join(out, "convergence_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def _setup_flow(cfg, n_threads):
    gas = _gas(cfg, with_re=True)
    fs = _freestream(cfg, gas)
    mesh = _load_mesh(cfg)
    tables = refelem.build_tables(cfg.discretization.p, cfg.discretization.p_f)
    pcfg = _pconfig(cfg)
    ev = dg_core.ResidualEvaluator(mesh, tables, gas, pcfg, freestream=fs,
                                   n_threads=n_threads)
    u0 = np.broadcast_to(fs.conservative(gas),
                         (mesh.n_elements, tables.n_p, 4)).copy()
    return gas, fs, mesh, tables, pcfg, ev, u0


def _flow_summary(cfg, fs, result):
    series = result.series
    speed = float(np.hypot(*fs.v))
    window = series[series[:, 0] >= cfg.time.transient_skip]
    if len(window) < 16:
        window = series
    summary = {"t_final": float(series[-1, 0]) if len(series) else 0.0,
               "steps": int(len(series))}
    if len(window) >= 16:
        freq, mag = verify.dft_spectrum(window[:, 0], window[:, 1])
        modes = verify.dominant_modes(freq, mag, k=2)
        f_prim = modes[0][0] if modes else 0.0
        summary.update({
            "f_prim": f_prim,
            "Strouhal": verify.strouhal(f_prim, cfg.body.D, speed),
            "CL_max": float(np.abs(window[:, 1]).max()),
            "CD_mean": float(window[:, 2].mean()),
            "A_max": float(np.abs(window[:, 3]).max()),
            "modes": modes,
        })
    return summary


def _run_flow(cfg, n_threads, with_motion):
    out = _outdir(cfg)
    gas, fs, mesh, tables, pcfg, ev, u0 = _setup_flow(cfg, n_threads)
    name = "viv" if with_motion else "cylinder"

    def force_fn(u, v_w):
        F = verify.aero_forces(ev, u, fs, D=cfg.body.D, v_w=v_w)
        return F.F_x, F.F_y

    osc = None
    mass = 1.0
    if with_motion and cfg.viv.motion_enabled:
        speed = float(np.hypot(*fs.v))
        setup = time_fsi.structural_coefficients(
            cfg.viv.U_star, cfg.viv.m_star, cfg.viv.xi,
            speed, cfg.body.D, fs.rho)
        osc = time_fsi.OscillatorState(M_r=setup.M_r, C_r=setup.C_r,
                                       K_r=setup.K_r)
        mass = setup.mass

    series_path = os.path.join(out, f"{name}_series.csv")
    if os.path.exists(series_path):
        os.remove(series_path)
    ckpt = os.path.join(out, f"{name}.ckpt")
    speed = float(np.hypot(*fs.v))
    result = time_fsi.couple_run(
        ev, u0, force_fn, n_steps=cfg.time.n_steps, dt=cfg.time.dt,
        osc=osc, mass=mass, ref_rho=fs.rho, ref_v=speed, ref_D=cfg.body.D,
        series_path=series_path, checkpoint_path=ckpt,
        checkpoint_every=cfg.time.checkpoint_interval,
        motion_enabled=with_motion and cfg.viv.motion_enabled)

    vtk_io.write_vtk(ev, result.u, os.path.join(out, f"{name}_final.vtk"))
    if len(result.series):
        report.plot_series(result.series, os.path.join(out, f"{name}_series.png"))
    summary = _flow_summary(cfg, fs, result)
    if with_motion and len(result.series) >= 16:
        window = result.series[result.series[:, 0] >= cfg.time.transient_skip]
        if len(window) < 16:
            window = result.series
        freq, mag = verify.dft_spectrum(window[:, 0], window[:, 3])
        verify.write_spectrum_csv(os.path.join(out, "viv_spectrum.csv"),
                                  freq, mag)
        report.plot_spectrum(freq, mag, os.path.join(out, "viv_spectrum.png"),
                             peaks=verify.dominant_modes(freq, mag, 2))
    with open(os.path.join(out, f"{name}_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def run_cylinder(cfg, n_threads=1):
    return _run_flow(cfg, n_threads, with_motion=False)


def run_viv(cfg, n_threads=1):
    return _run_flow(cfg, n_threads, with_motion=True)


def run_penalty_report(cfg, n_threads=1):
    out = _outdir(cfg)
    gas, fs, mesh, tables, pcfg, ev, u0 = _setup_flow(cfg, n_threads)
    sig = ev.sigmas(u0, (0.0, 0.0))
    path = os.path.join(out, "penalty_sigma.csv")
    with open(path, "w") as fh:
        fh.write("face,sigma\n")
        for i, s in enumerate(sig):
            fh.write(f"{i},{float(s)!r}\n")
    report.plot_face_values(sig, os.path.join(out, "penalty_sigma.png"),
                            r"$\sigma_e$")
    summary = {"sigma_max": float(sig.max()), "sigma_min": float(sig.min()),
               "n_faces": int(mesh.n_faces)}
    with open(os.path.join(out, "penalty_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def run_cfl_report(cfg, n_threads=1):
    out = _outdir(cfg)
    gas, fs, mesh, tables, pcfg, ev, u0 = _setup_flow(cfg, n_threads)
    lam_e = penalty.lambda_rayleigh_elements(mesh, tables, u0, gas, pcfg)
    lamt_e = penalty.lambda_tilde_elements(mesh, tables, u0, gas, pcfg)
    path = os.path.join(out, "cfl_elements.csv")
    with open(path, "w") as fh:
        fh.write("element,lambda,lambda_tilde\n")
        for i in range(mesh.n_elements):
            fh.write(f"{i},{float(lam_e[i])!r},{float(lamt_e[i])!r}\n")
    report.plot_face_values(lam_e, os.path.join(out, "cfl_lambda.png"),
                            r"$\Lambda_K$")
    lam, lamt = float(lam_e.max()), float(lamt_e.max())
    summary = {"Lambda": lam, "Lambda_tilde": lamt,
               "dt": penalty.timestep(lam, pcfg),
               "dt_tilde": penalty.timestep(lamt, pcfg)}
    with open(os.path.join(out, "cfl_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


_COMMANDS = {
    "convergence": run_convergence,
    "cylinder": run_cylinder,
    "viv": run_viv,
    "penalty-report": run_penalty_report,
    "cfl-report": run_cfl_report,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dgviv",
        description="Interior-penalty RKDG compressible Navier-Stokes "
                    "solver with 1-DOF fluid-structure coupling.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--dt", type=float, default=None,
                        help="override the CFL-estimated time step")
        sp.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    cfg = configmod.load_config(args.config)
    if args.dt is not None:
        cfg.time.dt = args.dt
    summary = _COMMANDS[args.command](cfg, n_threads=args.threads)
    print(json.dumps(summary, indent=2))
    return 0
