"""End-to-end precoding pipelines: fixed layout, fixed layout + ideal TTD, and movable tiles.

The true-time-delay baseline is an idealized stand-in: each assigned panel
splits its tiles into contiguous branches and every branch gets a lossless,
unquantized delay that aligns the branch's mean path length with the
shortest branch mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analog import AnalogPrecoder, Assignment, assign_users, conjugate_steering, residual_gain
from .channel import C0, UserGeometry, Waveband, channel_set, path_length
from .digital import RateReport, sinr, spectral_efficiency, wmmse_batch
from .exceptions import ConfigurationError
from .geometry import ArrayLayout
from .layout_optimizer import SCAConfig, optimize_layout


@dataclass(frozen=True)
class Scenario:
    """One channel realization plus link settings (transmit power is 1)."""

    layout: ArrayLayout
    band: Waveband
    users: tuple[UserGeometry, ...]
    gains: np.ndarray
    snr_db: float = 10.0
    wmmse_iters: int = 100
    wmmse_tol: float = 1e-6
    ttd_branches: int = 8
    assignment: Assignment | None = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)


@dataclass(frozen=True)
class PrecoderPair:
    analog: AnalogPrecoder
    digital: np.ndarray  # (L, n_rf, K)


@dataclass(frozen=True)
class PipelineResult:
    precoders: PrecoderPair
    rates: RateReport
    layout: ArrayLayout
    assignment: Assignment
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class TtdConfig:
    """Contiguous tile-to-branch partition with one delay per branch."""

    branches: tuple[np.ndarray, ...]
    delays: np.ndarray

    def tile_delays(self) -> np.ndarray:
        out = np.empty(sum(len(b) for b in self.branches))
        for g, tiles in enumerate(self.branches):
            out[tiles] = self.delays[g]
        return out


def ttd_delays(layout: ArrayLayout, panel: int, user: UserGeometry, n_branches: int = 8) -> TtdConfig:
    """Branch delays aligning each branch's mean path length to the nearest branch."""
    if n_branches < 1:
        raise ConfigurationError("need at least one TTD branch")
    n_branches = min(n_branches, layout.n_tiles)
    branches = tuple(np.array_split(np.arange(layout.n_tiles), n_branches))
    d = path_length(layout.panel_element_yz(panel), user).reshape(layout.n_tiles, -1)
    means = np.array([d[b].mean() for b in branches])
    return TtdConfig(branches, (means - means.min()) / C0)


def ttd_gain_profile(layout: ArrayLayout, band: Waveband, user: UserGeometry, panel: int, n_branches: int = 8):
    """Per-subcarrier gain of a conjugate-steered panel behind ideal branch delays."""
    cfg = ttd_delays(layout, panel, user, n_branches)
    d = path_length(layout.panel_element_yz(panel), user)
    tau = np.repeat(cfg.tile_delays(), layout.n_elements_per_tile)
    return residual_gain(band.residual_wavenumbers, d - C0 * tau)


def ttd_analog(layout: ArrayLayout, band: Waveband, assignment: Assignment, users, n_branches: int = 8) -> AnalogPrecoder:
    """Frequency-dependent analog precoder (L, n_rf, n_sub) with branch delays."""
    base = conjugate_steering(layout, band, assignment, users).columns
    cols = np.broadcast_to(base, (band.n_subcarriers,) + base.shape).copy()
    offsets = band.frequencies - band.center_frequency
    for k, p in enumerate(assignment.panels):
        tau = np.repeat(ttd_delays(layout, p, users[k], n_branches).tile_delays(), layout.n_elements_per_tile)
        cols[:, p, :] *= np.exp(-2j * np.pi * np.outer(offsets, tau))
    return AnalogPrecoder(cols)


def digital_stage(analog: AnalogPrecoder, channels: np.ndarray, scenario: Scenario, snr_db: float | None = None):
    """WMMSE on the effective channels; returns ``(D, RateReport)``."""
    snr = scenario.snr_db if snr_db is None else snr_db
    noise = 10.0 ** (-snr / 10.0)
    hbar = analog.effective_channels(channels)
    res = wmmse_batch(hbar, 1.0 / analog.n_sub, noise, max_iter=scenario.wmmse_iters, tol=scenario.wmmse_tol)
    gamma = sinr(hbar, res.precoders, noise)
    band = scenario.band
    return res.precoders, spectral_efficiency(gamma, band.n_subcarriers, band.cp_length)


def _assignment(scenario: Scenario, layout: ArrayLayout) -> Assignment:
    if scenario.assignment is not None:
        return scenario.assignment
    return assign_users(layout, scenario.band, scenario.users)


def fpa_pipeline(scenario: Scenario) -> PipelineResult:
    """Phase-shifter-only hybrid precoding on the fixed layout."""
    layout, band, users = scenario.layout, scenario.band, scenario.users
    assignment = _assignment(scenario, layout)
    analog = conjugate_steering(layout, band, assignment, users)
    h = channel_set(layout, band, users, scenario.gains).vectors
    D, rates = digital_stage(analog, h, scenario)
    return PipelineResult(PrecoderPair(analog, D), rates, layout, assignment)


def ttd_pipeline(scenario: Scenario) -> PipelineResult:
    """Fixed layout with ideal true-time-delay branches on every assigned panel."""
    layout, band, users = scenario.layout, scenario.band, scenario.users
    assignment = _assignment(scenario, layout)
    analog = ttd_analog(layout, band, assignment, users, scenario.ttd_branches)
    h = channel_set(layout, band, users, scenario.gains).vectors
    D, rates = digital_stage(analog, h, scenario)
    return PipelineResult(PrecoderPair(analog, D), rates, layout, assignment)


def hsc_hbf_pipeline(scenario: Scenario, cfg: SCAConfig = SCAConfig()) -> PipelineResult:
    """Movable-tile design: optimize assigned panels, then conjugate steering and WMMSE."""
    band, users = scenario.band, scenario.users
    assignment = _assignment(scenario, scenario.layout)
    layout, trace = optimize_layout(scenario.layout, band, users, assignment, cfg)
    analog = conjugate_steering(layout, band, assignment, users)
    h = channel_set(layout, band, users, scenario.gains).vectors
    D, rates = digital_stage(analog, h, scenario)
    return PipelineResult(PrecoderPair(analog, D), rates, layout, assignment, trace)
