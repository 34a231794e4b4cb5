"""Experiment runners behind the command line.

Every trial draws its users and path gains from its own substream of the
base seed, so results do not depend on how trials are spread over workers.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .analog import assign_users, conjugate_steering, gain_profile
from .baselines import Scenario, digital_stage, ttd_analog, ttd_gain_profile
from .channel import UserGeometry, channel_set, draw_path_gains
from .config import ScenarioConfig
from .geometry import ArrayLayout, nominal_layout, validate_layout
from .layout_optimizer import TRACE_COLUMNS, optimize_layout

CONVERGENCE_COLUMNS = ("iteration",) + TRACE_COLUMNS + ("norm_min_gain", "norm_mean_gain")
GAIN_COLUMNS = {"fpa": "gain_fpa", "fpa_ttd": "gain_ttd", "hsc_hbf": "gain_ma"}
RATE_COLUMNS = ("sweep_value", "scheme", "trial", "sum_rate")
SUMMARY_COLUMNS = ("sweep_value", "scheme", "n", "mean", "ci95")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_resolved_config(cfg: ScenarioConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def resolve_threads(threads: int | None) -> int:
    env = os.environ.get("SQUINTLAB_THREADS")
    if env:
        threads = int(env)
    return max(1, int(threads or 1))


# -- random drops -------------------------------------------------------------


def trial_rng(cfg: ScenarioConfig, trial: int) -> np.random.Generator:
    seq = np.random.SeedSequence(cfg.seeds.base).spawn(trial + 1)[trial]
    return np.random.default_rng(seq)


def draw_users(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[UserGeometry, ...]:
    """Fixed users, or uniform drops rejecting pairs closer than ``min_separation`` in both angles."""
    u = cfg.users
    if u.placement == "fixed":
        return tuple(UserGeometry(*map(float, p)) for p in u.fixed)
    while True:
        users = tuple(
            UserGeometry(rng.uniform(*u.range), rng.uniform(*u.azimuth), rng.uniform(*u.elevation))
            for _ in range(u.count)
        )
        clash = any(
            abs(a.azimuth - b.azimuth) < u.min_separation and abs(a.elevation - b.elevation) < u.min_separation
            for i, a in enumerate(users)
            for b in users[i + 1 :]
        )
        if not clash:
            return users


def base_layout(cfg: ScenarioConfig) -> ArrayLayout:
    a = cfg.array
    return nominal_layout(
        a.n_ph, a.n_pv, a.n_tiles, a.n_elements, cfg.band.waveband().wavelength, d_min=a.d_min, panel_side=a.panel_side
    )


# -- single-user experiments --------------------------------------------------


def run_convergence(cfg: ScenarioConfig, out_dir) -> dict:
    """Per-iteration gain trace of the layout optimizer (first user of trial 0)."""
    band = cfg.band.waveband()
    layout = base_layout(cfg)
    users = draw_users(cfg, trial_rng(cfg, 0))[:1]
    assignment = assign_users(layout, band, users)
    new_layout, trace = optimize_layout(layout, band, users, assignment, cfg.algorithm.sca)
    scale = layout.n_sub
    rows = [
        (i,) + r.as_tuple() + (r.min_J / scale, r.sum_J / (band.n_subcarriers * scale)) for i, r in enumerate(trace)
    ]
    out = Path(out_dir)
    path = write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, rows)
    new_layout.to_json(out / "layout.json")
    write_resolved_config(cfg, out / "convergence.config.json")
    return {
        "outputs": [str(path)],
        "iterations": len(trace),
        "initial_norm_min_gain": rows[0][-2],
        "final_norm_min_gain": rows[-1][-2],
        "final_norm_mean_gain": rows[-1][-1],
        "layout_ok": validate_layout(new_layout).ok,
    }


def gain_curves(cfg: ScenarioConfig, schemes=None) -> tuple[np.ndarray, dict]:
    """Normalized per-subcarrier gains of each scheme for the first user of trial 0."""
    schemes = cfg.schemes if schemes is None else schemes
    band = cfg.band.waveband()
    layout = base_layout(cfg)
    users = draw_users(cfg, trial_rng(cfg, 0))[:1]
    assignment = assign_users(layout, band, users)
    p, u = assignment.panels[0], users[0]
    curves = {}
    if "fpa" in schemes:
        curves["fpa"] = gain_profile(layout, band, u, p) / layout.n_sub
    if "fpa_ttd" in schemes:
        curves["fpa_ttd"] = ttd_gain_profile(layout, band, u, p, cfg.algorithm.ttd_branches) / layout.n_sub
    if "hsc_hbf" in schemes:
        opt, _ = optimize_layout(layout, band, users, assignment, cfg.algorithm.sca)
        curves["hsc_hbf"] = gain_profile(opt, band, u, p) / layout.n_sub
    return band.frequencies, curves


def run_gain_vs_frequency(cfg: ScenarioConfig, out_dir) -> dict:
    freqs, curves = gain_curves(cfg)
    order = [s for s in ("fpa", "fpa_ttd", "hsc_hbf") if s in curves]
    cols = ("f_l",) + tuple(GAIN_COLUMNS[s] for s in order)
    rows = [(f,) + tuple(curves[s][i] for s in order) for i, f in enumerate(freqs)]
    out = Path(out_dir)
    path = write_csv(out / "gain_vs_frequency.csv", cols, rows)
    write_resolved_config(cfg, out / "gain_vs_frequency.config.json")
    return {"outputs": [str(path)], **{f"min_{GAIN_COLUMNS[s]}": float(curves[s].min()) for s in order}}


# -- multi-user rate experiments ----------------------------------------------


@dataclass(frozen=True)
class _TrialJob:
    cfg: ScenarioConfig
    trial: int
    axis: str
    values: tuple


def _trial_rates(job: _TrialJob) -> dict:
    """Sum rate of every scheme at every sweep value for one trial."""
    cfg, alg = job.cfg, job.cfg.algorithm
    rng = trial_rng(cfg, job.trial)
    users = draw_users(cfg, rng)
    gains = draw_path_gains(rng, cfg.band.n_subcarriers, len(users), frequency_flat=cfg.users.frequency_flat_gains)
    layout = base_layout(cfg)
    out = {}
    bands = [(v, cfg.band.waveband(float(v))) for v in job.values] if job.axis == "bandwidth" else [(None, cfg.band.waveband())]
    for bw_value, band in bands:
        assignment = assign_users(layout, band, users)
        scenario = Scenario(
            layout, band, users, gains, cfg.snr_db, alg.wmmse_iters, alg.wmmse_tol, alg.ttd_branches, assignment
        )
        for scheme in cfg.schemes:
            if scheme == "fpa":
                lay, analog = layout, conjugate_steering(layout, band, assignment, users)
            elif scheme == "fpa_ttd":
                lay, analog = layout, ttd_analog(layout, band, assignment, users, alg.ttd_branches)
            else:
                lay, _ = optimize_layout(layout, band, users, assignment, alg.sca)
                analog = conjugate_steering(lay, band, assignment, users)
            h = channel_set(lay, band, users, gains).vectors
            snrs = job.values if job.axis == "snr" else (cfg.snr_db,)
            for snr in snrs:
                _, rates = digital_stage(analog, h, scenario, float(snr))
                key = bw_value if job.axis == "bandwidth" else (snr if job.axis == "snr" else None)
                out[(key, scheme)] = rates.total
    return out


def run_trials(cfg: ScenarioConfig, axis: str, values, threads: int = 1) -> dict:
    """``{(sweep_value, scheme): array of per-trial sum rates}`` in trial order."""
    jobs = [_TrialJob(cfg, t, axis, tuple(values)) for t in range(cfg.seeds.count)]
    threads = resolve_threads(threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(range(len(jobs)), pool.map(_trial_rates, jobs)))
    else:
        results = {j.trial: _trial_rates(j) for j in jobs}
    merged = {}
    for t in sorted(results):
        for key, val in results[t].items():
            merged.setdefault(key, []).append(val)
    return {k: np.array(v) for k, v in merged.items()}


def ci95(x) -> float:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return math.nan
    return float(stats.t.ppf(0.975, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x)))


def _rate_experiment(cfg, out_dir, axis, values, name, threads) -> dict:
    rates = run_trials(cfg, axis, values, threads)
    keys = [(v, s) for v in values for s in cfg.schemes]
    rows = [(v, s, t, r) for v, s in keys for t, r in enumerate(rates[(v, s)])]
    summary = [(v, s, len(rates[(v, s)]), float(rates[(v, s)].mean()), ci95(rates[(v, s)])) for v, s in keys]
    out = Path(out_dir)
    p1 = write_csv(out / f"{name}.csv", RATE_COLUMNS, rows)
    p2 = write_csv(out / f"{name}_summary.csv", SUMMARY_COLUMNS, summary)
    write_resolved_config(cfg, out / f"{name}.config.json")
    means = {f"{s}@{v}": m for v, s, _, m, _ in summary}
    return {"outputs": [str(p1), str(p2)], "means": means}


def _sweep_values(cfg, axis, default):
    if cfg.sweep.axis == axis and cfg.sweep.values:
        return tuple(float(v) for v in cfg.sweep.values)
    return default


def run_rate_vs_snr(cfg: ScenarioConfig, out_dir, threads: int = 1) -> dict:
    values = _sweep_values(cfg, "snr", (float(cfg.snr_db),))
    return _rate_experiment(cfg, out_dir, "snr", values, "rate_vs_snr", threads)


def run_rate_vs_bandwidth(cfg: ScenarioConfig, out_dir, threads: int = 1) -> dict:
    values = _sweep_values(cfg, "bandwidth", (float(cfg.band.bandwidth),))
    return _rate_experiment(cfg, out_dir, "bandwidth", values, "rate_vs_bandwidth", threads)


def run_optimize_layout(cfg: ScenarioConfig, out_dir) -> dict:
    """Optimize the layout for the users of trial 0; persist layout, trace and channels.

    The channel dump holds trial 0's channels on the optimized layout.
    """
    band = cfg.band.waveband()
    layout = base_layout(cfg)
    rng = trial_rng(cfg, 0)
    users = draw_users(cfg, rng)
    gains = draw_path_gains(rng, cfg.band.n_subcarriers, len(users), frequency_flat=cfg.users.frequency_flat_gains)
    assignment = assign_users(layout, band, users)
    new_layout, trace = optimize_layout(layout, band, users, assignment, cfg.algorithm.sca)
    out = Path(out_dir)
    p1 = write_csv(out / "trace.csv", TRACE_COLUMNS, [r.as_tuple() for r in trace])
    p2 = out / "layout.json"
    new_layout.to_json(p2)
    p3 = channel_set(new_layout, band, users, gains).dump(out / "channels.csv")
    write_resolved_config(cfg, out / "optimize_layout.config.json")
    return {"outputs": [str(p1), str(p2), str(p3)], "layout_ok": validate_layout(new_layout).ok, "assignment": list(assignment.panels)}
