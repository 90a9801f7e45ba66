"""Command-line front end.

Subcommands:
  equilibrium  print the static rest state and its residual
  simulate     one road realization -> trajectory / excitation /
               phase-space CSVs and animation frames
  ensemble     Monte Carlo ensemble -> summary statistics, confidence
               bands, PDFs, exceedance probability, convergence curve
  psd          long single run -> Bartlett PSD of x2 and spectral slope

Every data file gets a .meta.json provenance sidecar, and a fully
resolved config echo is written next to the outputs, so any file can be
regenerated byte-for-byte from its directory contents.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import __version__, analysis, integrator, model, montecarlo, road
from . import config as cfgmod
from ._io import (write_columns_csv, write_json, write_ndjson,
                  write_rows_csv, write_sidecar)

_ANIMATION_FRAME_S = 0.1
_EQ_RESIDUAL_LIMIT = 1e-8


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH",
                   help="JSON config file (defaults used when omitted)")
    p.add_argument("--seed", type=int, metavar="U64",
                   help="override the ensemble master seed")
    p.add_argument("--out", metavar="DIR",
                   help="override the output directory")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for ensemble execution")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="towersprayer",
        description="Stochastic dynamics of a tower sprayer on a random road.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium",
                       help="report the static equilibrium state")
    _add_common(p)

    p = sub.add_parser("simulate", help="single-realization trajectory files")
    _add_common(p)
    p.add_argument("--realization", type=int, default=0, metavar="I",
                   help="realization index within the master-seed stream")
    p.add_argument("--a-corr", dest="a_corr", metavar="LIST",
                   help="comma list of correlation lengths (m) to sweep")
    p.add_argument("--v-kmh", dest="v_kmh", metavar="LIST",
                   help="comma list of vehicle speeds (km/h) to sweep")

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble outputs")
    _add_common(p)

    p = sub.add_parser("psd", help="long-run power spectral density of x2")
    _add_common(p)
    return ap


class _Writer:
    """Binds provenance metadata so every output file gets a sidecar."""

    def __init__(self, cfg: cfgmod.RunConfig, out_dir: str):
        self.cfg = cfg
        self.dir = out_dir
        self.sha = cfgmod.config_hash(cfg)
        self.seed = cfg.ensemble.master_seed
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    def echo(self):
        doc = cfgmod.resolved_dict(self.cfg)
        doc["config_sha256"] = self.sha
        doc["code_version"] = __version__
        write_json(self.path("config_echo.json"), doc)

    def columns(self, name: str, header, cols, extra=None) -> str:
        p = self.path(name)
        write_columns_csv(p, header, cols)
        write_sidecar(p, self.sha, self.seed, __version__, extra)
        return p

    def rows(self, name: str, header, rows, extra=None) -> str:
        p = self.path(name)
        write_rows_csv(p, header, rows)
        write_sidecar(p, self.sha, self.seed, __version__, extra)
        return p

    def ndjson(self, name: str, records, extra=None) -> str:
        p = self.path(name)
        write_ndjson(p, records)
        write_sidecar(p, self.sha, self.seed, __version__, extra)
        return p

    def json(self, name: str, obj, extra=None) -> str:
        p = self.path(name)
        write_json(p, obj)
        write_sidecar(p, self.sha, self.seed, __version__, extra)
        return p


def cmd_equilibrium(cfg: cfgmod.RunConfig, args) -> int:
    p = cfg.physical
    s = model.static_equilibrium(p)
    resid = float(np.linalg.norm(model.rhs(p, s, None)))
    w = _Writer(cfg, cfg.output_dir)
    w.echo()
    print(f"y1   = {s.y1:.6g} m")
    print(f"phi1 = {s.phi1:.6g} rad")
    print(f"phi2 = {s.phi2:.6g} rad")
    print(f"rhs residual norm = {resid:.6g}")
    if resid > _EQ_RESIDUAL_LIMIT:
        print(f"FAIL: residual exceeds {_EQ_RESIDUAL_LIMIT:g}", file=sys.stderr)
        return 1
    return 0


def _parse_sweep(text: str | None, flag: str):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise cfgmod.ConfigError(f"bad {flag} list {text!r}: {err}") from err
    if not vals:
        raise cfgmod.ConfigError(f"{flag} list is empty")
    return vals


def _phase_space_columns(p: model.PhysicalParams, traj: integrator.Trajectory):
    s = traj.states
    y1, f1, f2 = s[:, 0], s[:, 1], s[:, 2]
    y1d, f1d, f2d = s[:, 3], s[:, 4], s[:, 5]
    x2d = -p.L1 * np.cos(f1) * f1d - p.L2 * np.cos(f2) * f2d
    y2d = y1d - p.L1 * np.sin(f1) * f1d - p.L2 * np.sin(f2) * f2d
    return [traj.grid, traj.x2, x2d, traj.y2, y2d,
            y1, y1d, f1, f1d, f2, f2d]


def _animation_records(p: model.PhysicalParams, traj: integrator.Trajectory,
                       frame_s: float):
    dt = traj.grid[1] - traj.grid[0]
    stride = max(1, int(round(frame_s / dt)))
    exc = traj.excitation_log
    for i in range(0, len(traj.grid), stride):
        y1 = traj.states[i, 0]
        f1 = traj.states[i, 1]
        xm = -p.L1 * math.sin(f1)
        ym = y1 + p.L1 * math.cos(f1)
        rec = {
            "t": float(traj.grid[i]),
            "trailer": [[-p.B1 * math.cos(f1), y1 - p.B1 * math.sin(f1)],
                        [p.B2 * math.cos(f1), y1 + p.B2 * math.sin(f1)]],
            "link": [[0.0, y1], [xm, ym]],
            "tower": [[xm, ym], [float(traj.x2[i]), float(traj.y2[i])]],
            "road": ([float(exc[i, 0]), float(exc[i, 1])]
                     if exc is not None else [0.0, 0.0]),
        }
        yield rec


def _simulate_one(cfg: cfgmod.RunConfig, out_dir: str, index: int) -> int:
    p = cfg.physical
    basis, _ = road.basis_for(cfg.road)
    stream = montecarlo.realization_stream(cfg.ensemble.master_seed, index)
    r = road.sample_realization(basis, cfg.road, stream)
    rhs_fn = model.make_rhs(p)
    q0 = model.static_equilibrium(p).as_array()
    traj = integrator.integrate(rhs_fn, q0, r, cfg.integ)

    w = _Writer(cfg, out_dir)
    w.echo()
    exc = traj.excitation_log
    extra = {"realization_index": index,
             "spawn_key": list(r.seed_info[1]),
             "n_modes": r.n_modes}
    w.columns(
        "trajectory.csv",
        ["t", "y1", "phi1", "phi2", "y1_dot", "phi1_dot", "phi2_dot",
         "x2", "y2", "ye1", "ye2"],
        [traj.grid] + [traj.states[:, j] for j in range(6)]
        + [traj.x2, traj.y2, exc[:, 0], exc[:, 1]],
        extra)
    w.columns("excitation.csv",
              ["t", "ye1", "ye2", "ye1_dot", "ye2_dot"],
              [traj.grid, exc[:, 0], exc[:, 1], exc[:, 2], exc[:, 3]],
              extra)
    w.columns("phase_space.csv",
              ["t", "x2", "x2_dot", "y2", "y2_dot", "y1", "y1_dot",
               "phi1", "phi1_dot", "phi2", "phi2_dot"],
              _phase_space_columns(p, traj), extra)
    w.ndjson("animation.ndjson",
             _animation_records(p, traj, _ANIMATION_FRAME_S), extra)
    print(f"{out_dir}: {len(traj.grid)} rows, "
          f"{traj.stats.n_accepted} accepted / {traj.stats.n_rejected} "
          f"rejected steps")
    return 0


def cmd_simulate(cfg: cfgmod.RunConfig, args) -> int:
    a_vals = _parse_sweep(args.a_corr, "--a-corr")
    v_vals = _parse_sweep(args.v_kmh, "--v-kmh")
    combos = []
    for a in (a_vals or [None]):
        for v in (v_vals or [None]):
            parts = []
            rp = cfg.road
            if a is not None:
                rp = dataclasses.replace(rp, a_corr_m=a)
                parts.append(f"a_corr_{a:g}")
            if v is not None:
                rp = dataclasses.replace(rp, v_kmh=v)
                parts.append(f"v_kmh_{v:g}")
            combos.append((rp, "_".join(parts)))
    rc = 0
    for rp, sub in combos:
        eff = dataclasses.replace(cfg, road=rp)
        out_dir = os.path.join(cfg.output_dir, sub) if sub else cfg.output_dir
        rc |= _simulate_one(eff, out_dir, args.realization)
    return rc


def _grid_index(grid: np.ndarray, t: float) -> int:
    dt = grid[1] - grid[0]
    i = int(round((t - grid[0]) / dt))
    if not (0 <= i < len(grid)) or abs(grid[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise cfgmod.ConfigError(
            f"pdf instant {t} s does not lie on the output grid")
    return i


def cmd_ensemble(cfg: cfgmod.RunConfig, args) -> int:
    ens_cfg = montecarlo.EnsembleConfig(
        n_s=cfg.ensemble.n_s, master_seed=cfg.ensemble.master_seed,
        physical=cfg.physical, road=cfg.road, integ=cfg.integ,
        keep_trajectories=cfg.ensemble.keep_trajectories)
    e = montecarlo.run_ensemble(ens_cfg, n_threads=max(1, args.threads),
                                failure_policy=cfg.ensemble.failure_policy)
    w = _Writer(cfg, cfg.output_dir)
    w.echo()
    if e.n_completed == 0:
        print("error: every realization failed", file=sys.stderr)
        return 3

    degenerate = e.n_completed < 2
    cols = [e.grid]
    header = ["t"]
    for ch in montecarlo.CHANNELS:
        header += [f"mean_{ch}", f"std_{ch}"]
        cols.append(e.mean(ch))
        cols.append(np.zeros_like(e.grid) if degenerate else e.std(ch))
    w.columns("ensemble_summary.csv", header, cols)

    report = {
        "n_requested": ens_cfg.n_s,
        "n_completed": e.n_completed,
        "failures": [[int(i), reason] for i, reason in e.failures],
        "conv_final": float(e.conv_curve[-1]),
        "confidence": cfg.analysis.confidence,
    }

    if e.kept:
        for ch in montecarlo.CHANNELS:
            if degenerate:
                m = e.channel_matrix(ch)[0]
                band = [e.grid, m, np.zeros_like(m), m, m]
            else:
                bs = analysis.ensemble_statistics(e, ch, cfg.analysis.confidence)
                band = [bs.grid, bs.mean, bs.std, bs.lower, bs.upper]
            w.columns(f"band_{ch}.csv", ["t", "mean", "std", "lo", "hi"], band)

        ps = analysis.large_vibration_probability(
            e, cfg.analysis.threshold_fraction)
        w.columns("probability_x2.csv", ["t", "P"], [ps.grid, ps.prob])
        report["probability"] = {
            "threshold_fraction": ps.fraction,
            "threshold_m": ps.threshold,
            "time_average": ps.time_average,
            "peak": ps.peak,
        }

        if e.n_completed >= 30:
            pdf_rows = []
            x2 = e.channel_matrix("x2")
            for t_inst in cfg.analysis.pdf_instants_s:
                i = _grid_index(e.grid, t_inst)
                col = x2[:, i]
                if col.std(ddof=1) == 0.0:
                    continue
                est = analysis.pdf_estimate(col, normalized=True, t=t_inst)
                tag = f"{t_inst:g}"
                pdf_rows += [(x, d, tag) for x, d in
                             zip(est.abscissa, est.density)]
            avg = analysis.time_averaged_pdf(e, "x2")
            pdf_rows += [(x, d, "time-averaged") for x, d in
                         zip(avg.abscissa, avg.density)]
            w.rows("pdf_x2.csv", ["x", "density", "t_tag"], pdf_rows)

    w.columns("conv_curve.csv", ["n", "conv"],
              [np.arange(1, e.n_completed + 1), e.conv_curve])

    failed = {i for i, _ in e.failures}
    orig_indices = [i for i in range(ens_cfg.n_s) if i not in failed]
    records = []
    for j, (entropy, spawn_key) in enumerate(e.seeds):
        records.append({
            "index": orig_indices[j],
            "entropy": int(entropy),
            "spawn_key": list(spawn_key),
            "sq_integral": float(e.sq_integrals[j]),
            "extremes": {ch: [float(e.extremes[ch][j, 0]),
                              float(e.extremes[ch][j, 1])]
                         for ch in montecarlo.CHANNELS},
        })
    w.ndjson("realizations.ndjson", records)
    w.json("ensemble_report.json", report)

    print(f"{cfg.output_dir}: {e.n_completed}/{ens_cfg.n_s} realizations, "
          f"conv({e.n_completed}) = {report['conv_final']:.6g}")
    if "probability" in report:
        pr = report["probability"]
        print(f"P(|x2| > {pr['threshold_m']:.4g} m): "
              f"time average {pr['time_average']:.4f}, peak {pr['peak']:.4f}")
    if e.failures:
        print(f"warning: {len(e.failures)} realization(s) skipped",
              file=sys.stderr)
    return 0


def cmd_psd(cfg: cfgmod.RunConfig, args) -> int:
    horizon = cfg.analysis.psd_horizon_s
    rp = cfg.road
    if horizon != rp.T_s:
        if rp.N_KL is not None:
            # keep the modal density (cutoff frequency) of the reference
            # horizon when stretching the process
            n_eff = int(math.ceil(rp.N_KL * horizon / rp.T_s))
            rp = dataclasses.replace(rp, T_s=horizon, N_KL=n_eff)
        else:
            rp = dataclasses.replace(rp, T_s=horizon)
    integ = dataclasses.replace(cfg.integ, t0=0.0, tf=horizon)

    basis, n_active = road.basis_for(rp)
    stream = montecarlo.realization_stream(cfg.ensemble.master_seed, 0)
    r = road.sample_realization(basis, rp, stream)
    q0 = model.static_equilibrium(cfg.physical).as_array()
    traj = integrator.integrate(model.make_rhs(cfg.physical), q0, r, integ)

    fs = 1.0 / integ.dt_out
    try:
        psd = analysis.psd_periodogram(traj.x2, fs, cfg.analysis.psd_segment_s)
        fit = analysis.spectral_slope(psd, *cfg.analysis.slope_band_hz)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    w = _Writer(cfg, cfg.output_dir)
    w.echo()
    w.columns("psd_x2.csv", ["f", "power"], [psd.freqs, psd.power],
              {"n_segments": psd.n_segments,
               "segment_s": psd.segment_length})
    w.json("slope_report.json", {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "band_hz": [fit.f_lo, fit.f_hi],
        "n_bins": fit.n_bins,
        "n_segments": psd.n_segments,
        "segment_s": psd.segment_length,
        "horizon_s": horizon,
        "fs_hz": fs,
        "n_modes": n_active,
        "tau_achieved": road.tau_achieved(basis, n_active),
    })
    print(f"{cfg.output_dir}: slope {fit.slope:.4f} over "
          f"[{fit.f_lo:g}, {fit.f_hi:g}] Hz, r^2 = {fit.r_squared:.6f}")
    return 0


_COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "psd": cmd_psd,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        cfg = cfgmod.with_overrides(cfg, args.seed, args.out)
        return _COMMANDS[args.command](cfg, args)
    except cfgmod.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except integrator.IntegrationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
