"""Batch command-line front end.

Each subcommand writes CSV files (17 significant digits), an optional SVG
and a ``manifest.txt`` that can be fed back through ``--config``.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from . import chain, estimator, sde, svg
from .config import RunConfig, manifest_text, parse_config
from .errors import GridEmpty, NonPositive, SqlsimError, TypeMismatch
from .model import validate_params

FIG1_STEPS_PER_WINDOW = 32
FIG1_CHAIN_PER_WINDOW = 100


def _num(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return "%.17g" % float(v)


def write_csv(path, header, columns):
    """Columns are equal-length sequences; written row-major."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_num(v) for v in row) + "\n")


def write_kv(path, items):
    with open(path, "w", newline="") as fh:
        fh.write("key,value\n")
        for k, v in items:
            fh.write(f"{k},{_num(v) if not isinstance(v, str) else v}\n")


# -- resolution -----------------------------------------------------------

_DEFAULT_TRAJ = {"simulate-discrete": 2, "simulate-sde": 2, "filter": 2, "force-detect": 1000, "figure1": 1000}


def resolve(cfg: RunConfig) -> RunConfig:
    """Fill mode-dependent defaults so the manifest records every value used."""
    base = validate_params(cfg.params.replace(tau=None, sigma=None))
    t_star = an.crossing_time(base)
    ch = {}
    if cfg.t_final is None:
        ch["t_final"] = (2.5 if cfg.mode == "figure1" else 2.0) * t_star
    t_final = ch.get("t_final", cfg.t_final)
    if cfg.n_trajectories is None:
        ch["n_trajectories"] = _DEFAULT_TRAJ.get(cfg.mode, 1)
    if cfg.decimate is None:
        ch["decimate"] = 1
    if cfg.step_h is None:
        if cfg.mode == "figure1":
            ch["step_h"] = 1.0 / (FIG1_STEPS_PER_WINDOW * cfg.bandwidth_B)
        else:
            ch["step_h"] = t_final / sde.DEFAULT_STEPS
    if cfg.mode in ("simulate-discrete", "figure1") and cfg.tau is None and cfg.sigma is None:
        ch["tau"] = 1.0 / (FIG1_CHAIN_PER_WINDOW * cfg.bandwidth_B) if cfg.mode == "figure1" else t_final / 2**16
    if cfg.force_alpha == "alpha_min":
        ch["force_alpha"] = float(an.alpha_min_at_D(base.coupling_D, t_final, base))
    cfg = cfg.replace(**ch)
    if cfg.mode in ("simulate-discrete", "figure1"):
        p = validate_params(cfg.params)
        cfg = cfg.replace(tau=p.tau, sigma=p.sigma, coupling_D=p.coupling_D)
    else:
        validate_params(cfg.params)
    return cfg


# -- modes ----------------------------------------------------------------


def _continuous(cfg):
    return validate_params(cfg.params.replace(tau=None, sigma=None))


def _run_simulate_discrete(cfg, out):
    params = validate_params(cfg.params)
    n_steps = max(1, math.ceil(cfg.t_final / params.tau * (1 - 1e-12)))
    st = chain.stationary_widths(params)
    cols = [[] for _ in range(7)]
    var = []
    for k in range(cfg.n_trajectories):
        traj, rec = chain.simulate_chain(params, n_steps, cfg.seed, trajectory_index=k)
        sel = slice(None, None, cfg.decimate)
        for c, v in zip(cols, (rec.times[sel], traj.x[1:][sel], traj.p[1:][sel], traj.premeasure_x[sel],
                               rec.outcomes[sel], rec.innovations_true[sel], np.full(len(rec.times[sel]), k))):
            c.append(v)
        var.append(float(np.var(rec.innovations_true)))
        if k == 0:
            first = (rec.times, traj.x[1:])
    write_csv(out / "chain.csv",
              ["time_s", "x_m", "p_kgms", "premeasure_x_m", "xi_m", "innovation_m", "trajectory_id"],
              [np.concatenate(c) for c in cols])
    write_kv(out / "chain_summary.csv", [
        ("tau_s", params.tau), ("sigma_m2", params.sigma), ("contraction_C", st.contraction_C),
        ("delta_post_m2", st.delta), ("epsilon_post", st.epsilon), ("n_steps", n_steps),
        ("innovation_variance_theory_m2", 0.5 * params.sigma * st.contraction_C),
        ("innovation_variance_sample_m2", float(np.mean(var))),
    ])
    if cfg.svg:
        svg.line_plot(out / "chain.svg", [(first[0], first[1], "x_r (trajectory 0)")],
                      title="Discrete measurement chain", xlabel="time (s)", ylabel="x (m)")


def _run_simulate_sde(cfg, out):
    params = _continuous(cfg)
    tr = sde.integrate_ensemble(params, cfg.t_final, cfg.step_h, cfg.n_trajectories, cfg.seed, cfg.decimate)
    n, m = tr.x.shape
    write_csv(out / "sde.csv", ["time_s", "x_m", "p_kgms", "xi_integral_ms", "trajectory_id"],
              [np.tile(tr.times, n), tr.x.ravel(), tr.p.ravel(), tr.xi_integral.ravel(), np.repeat(np.arange(n), m)])
    if cfg.svg:
        xr = an.xrms_analytic(tr.times, params)
        series = [(tr.times, tr.x[k], f"x(t) trajectory {k}") for k in range(min(n, 4))]
        series += [(tr.times, xr, "+x_rms"), (tr.times, -xr, "-x_rms")]
        svg.line_plot(out / "sde.svg", series, title="Backaction diffusion", xlabel="time (s)", ylabel="x (m)")


def _run_filter(cfg, out):
    params = _continuous(cfg)
    times, res = estimator.filter_ensemble(params, cfg.t_final, cfg.step_h, cfg.n_trajectories, cfg.seed, cfg.decimate)
    n, m = res["x"].shape
    e_an = estimator.error_oscillator_analytic(times, params)
    sig, _ = an.signal_noise(params.force_alpha, params.coupling_D, times, params)
    write_csv(out / "filter.csv",
              ["time_s", "x_m", "x_hat_m", "p_kgms", "p_hat_kgms", "e_m", "e_analytic_m",
               "eta_integral_ms", "sigma_signal_ms", "trajectory_id"],
              [np.tile(times, n), res["x"].ravel(), res["x_hat"].ravel(), res["p"].ravel(), res["p_hat"].ravel(),
               res["e"].ravel(), np.tile(e_an, n), res["eta_integral"].ravel(), np.tile(sig, n),
               np.repeat(np.arange(n), m)])
    if cfg.svg:
        svg.line_plot(out / "filter.svg",
                      [(times, res["e"][0], "e = x - x_hat (trajectory 0)"), (times, e_an, "analytic e(t)")],
                      title="Estimation error", xlabel="time (s)", ylabel="e (m)")


def _run_force_detect(cfg, out):
    params = _continuous(cfg)
    stat, signed = estimator.force_trials(params, cfg.t_final, cfg.step_h, cfg.n_trajectories, cfg.seed)
    write_csv(out / "force_detect.csv", ["trial_id", "statistic", "decision", "eta_integral_ms"],
              [np.arange(stat.size), stat, stat >= 1.0, signed])
    sig, N = an.signal_noise(params.force_alpha, params.coupling_D, cfg.t_final, params)
    snr = float(sig / N)
    write_kv(out / "force_detect_summary.csv", [
        ("force_alpha_N", params.force_alpha), ("t_s", cfg.t_final), ("coupling_D", params.coupling_D),
        ("snr_analytic", snr), ("mean_statistic", float(stat.mean())),
        ("folded_normal_mean_oracle", an.folded_normal_mean(snr)),
        ("detection_rate", float(np.mean(stat >= 1.0))),
        ("detection_rate_oracle", 0.5 * (math.erfc((1 - snr) / math.sqrt(2)) + math.erfc((1 + snr) / math.sqrt(2)))),
    ])


def _run_sql_report(cfg, out):
    rep = an.sql_report(_continuous(cfg), cfg.t_final)
    items = rep.items()
    write_kv(out / "report.csv", items + [("note", rep.notes[0])])
    if not cfg.quiet:
        for k, v in items:
            print(f"{k} = {v:.6g}")


def _parse_grid(key, text, default):
    if text is None:
        return np.array([default])
    text = text.strip()
    if text.startswith("log:"):
        try:
            a, b, n = text[4:].split(":")
            vals = np.logspace(float(a), float(b), int(n))
        except ValueError:
            raise TypeMismatch(f"{key}: expected log:START:STOP:NUM", key=key) from None
    else:
        parts = [s for s in text.split(",") if s.strip()]
        try:
            vals = np.array([float(s) for s in parts])
        except ValueError:
            raise TypeMismatch(f"{key}: malformed number in {text!r}", key=key) from None
    if vals.size == 0:
        raise GridEmpty(f"{key} is empty", key=key)
    return vals


def sweep_table(params, masses, Ds, Bs, t):
    """Closed-form quantities on the Cartesian grid (mass, D, B), vectorized."""
    M, D, B = (a.ravel() for a in np.meshgrid(masses, Ds, Bs, indexing="ij"))
    hbar = params.hbar
    w0 = np.sqrt(hbar / (M * D))
    br = an._u_minus_sin(w0 * t) / w0
    with np.errstate(divide="ignore"):
        amin = np.where(br > 0, hbar * np.sqrt(t / (2 * D)) / np.where(br > 0, br, 1.0), np.inf)
    _, g = an.optimize_eta()
    return {
        "mass_kg": M, "coupling_D_m2s": D, "bandwidth_B_hz": B,
        "noise_floor_m": an.noise_floor(D, B), "t_star_s": an.t_star(D, B, M, hbar),
        "x_rms_at_t_m": hbar / (M * np.sqrt(6 * D)) * t**1.5, "omega0_rad_s": w0,
        "alpha_min_at_D_N": amin, "alpha_min_sql_N": np.sqrt(hbar * M / (2 * t**3)) / g,
        "sensitivity_bound": an.sensitivity_bound(M, hbar),
    }


def _run_sweep(cfg, out):
    params = _continuous(cfg)
    grids = [_parse_grid("mass_grid", cfg.mass_grid, params.mass),
             _parse_grid("D_grid", cfg.D_grid, params.coupling_D),
             _parse_grid("B_grid", cfg.B_grid, params.bandwidth_B)]
    for name, g in zip(("mass_grid", "D_grid", "B_grid"), grids):
        if np.any(~(g > 0)):
            raise NonPositive(name, float(g[~(g > 0)][0]))
    table = sweep_table(params, *grids, cfg.t_final)
    write_csv(out / "sweep.csv", list(table), list(table.values()))


def _run_figure1(cfg, out):
    params = _continuous(cfg)
    floor = float(an.noise_floor(params.coupling_D, params.bandwidth_B))
    t_star = an.crossing_time(params)
    h = cfg.step_h

    # (a) two realizations plus a statistics ensemble from a separate seed
    reals = [sde.integrate(params, cfg.t_final, h, seed=cfg.seed + i) for i in range(2)]
    N = int(round(1.0 / (params.bandwidth_B * h)))
    idx = np.arange(N, reals[0].times.size, N)
    times = reals[0].times[idx]
    signals = [sde.band_limited_signal(r, params.bandwidth_B)[1][: idx.size] for r in reals]
    ens = sde.integrate_ensemble(params, cfg.t_final, h, cfg.n_trajectories, seed=cfg.seed + 2, decimate=N)
    st = an.ensemble_stats(ens)
    ens_xrms = st.xrms[1 : idx.size + 1]
    xr = an.xrms_analytic(times, params)
    write_csv(out / "figure1a.csv",
              ["time_s", "x_rms_analytic_m", "ensemble_x_rms_m", "x_0_m", "x_1_m", "signal_0_m", "signal_1_m",
               "noise_floor_m", "t_star_s"],
              [times, xr, ens_xrms, reals[0].x[idx], reals[1].x[idx], signals[0], signals[1],
               np.full(times.size, floor), np.full(times.size, t_star)])

    # (b) discrete chain and matched filter: innovations are the bare meter noise
    cp = validate_params(cfg.params)
    C = chain.stationary_widths(cp).contraction_C
    n_steps = max(1, math.ceil(cfg.t_final / cp.tau * (1 - 1e-12)))
    cols, mism, var = [], 0.0, []
    for i in range(2):
        _, rec = chain.simulate_chain(cp, n_steps, cfg.seed + i)
        *_, eta = estimator.run_filter_discrete(rec, cp, C)
        mism = max(mism, float(np.max(np.abs(eta - rec.innovations_true))))
        var.append(float(np.var(eta)))
        filt = chain.boxcar_filter(chain.MeasurementRecord(rec.outcomes, eta, rec.times, rec.tau), params.bandwidth_B)
        cols.append((filt.times, filt.outcomes, filt.innovations_true))
    band = math.sqrt(C * params.coupling_D * params.bandwidth_B / 2.0)
    write_csv(out / "figure1b.csv", ["time_s", "xi_0_m", "eta_0_m", "xi_1_m", "eta_1_m"],
              [cols[0][0], cols[0][1], cols[0][2], cols[1][1], cols[1][2]])
    write_kv(out / "figure1_summary.csv", [
        ("noise_floor_m", floor), ("t_star_s", t_star),
        ("empirical_t_star_s", an.empirical_crossing_time(st.times, st.xrms, floor)),
        ("n_ensemble", cfg.n_trajectories), ("chain_tau_s", cp.tau), ("contraction_C", C),
        ("eta_variance_theory_m2", 0.5 * cp.sigma * C), ("eta_variance_sample_m2", float(np.mean(var))),
        ("eta_max_abs_deviation_m", mism), ("eta_band_m", band),
    ])
    if cfg.svg:
        svg.line_plot(out / "figure1a.svg",
                      [(times, signals[0], "signal, realization 1"), (times, signals[1], "signal, realization 2"),
                       (times, reals[0].x[idx], "x(t), realization 1"), (times, reals[1].x[idx], "x(t), realization 2"),
                       (times, xr, "+x_rms(t)"), (times, -xr, "-x_rms(t)")],
                      title="Backaction diffusion against record noise", xlabel="time (s)", ylabel="position (m)",
                      hlines=[(floor, "+sqrt(DB/2)"), (-floor, "-sqrt(DB/2)")], vlines=[(t_star, "t*")])
        svg.line_plot(out / "figure1b.svg",
                      [(cols[0][0], cols[0][1], "xi_r, realization 1"), (cols[0][0], cols[0][2], "eta_r, realization 1"),
                       (cols[1][0], cols[1][1], "xi_r, realization 2"), (cols[1][0], cols[1][2], "eta_r, realization 2")],
                      title="Subtracting the estimated position", xlabel="time (s)", ylabel="position (m)",
                      hlines=[(band, "+sqrt(CDB/2)"), (-band, "-sqrt(CDB/2)")])


_RUNNERS = {
    "simulate-discrete": _run_simulate_discrete,
    "simulate-sde": _run_simulate_sde,
    "filter": _run_filter,
    "force-detect": _run_force_detect,
    "sql-report": _run_sql_report,
    "sweep": _run_sweep,
    "figure1": _run_figure1,
}


def run(cfg: RunConfig) -> Path:
    """Resolve ``cfg``, run its mode and write outputs; returns the output directory."""
    cfg = resolve(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(manifest_text(cfg))
    _RUNNERS[cfg.mode](cfg, out)
    return out


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        out = run(cfg)
    except SqlsimError as exc:
        print(f"sqlsim: error kind={exc.kind} exit={exc.exit_code} message={str(exc)!r}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sqlsim: error kind=IOError exit=4 message={str(exc)!r}", file=sys.stderr)
        return 4
    if not cfg.quiet:
        print(f"sqlsim: {cfg.mode} done, outputs in {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
