"""Block-diagonal phase-shifter precoder and layout-dependent array gain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import C0, UserGeometry, Waveband, path_length, residual_wavenumber
from .exceptions import ConfigurationError
from .geometry import ArrayLayout


@dataclass(frozen=True)
class Assignment:
    """``panels[k]`` is the flat panel (RF chain) index serving user ``k``."""

    panels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(int(p) for p in self.panels))
        if len(set(self.panels)) != len(self.panels):
            raise ConfigurationError(f"assignment is not injective: {self.panels}")

    def __len__(self):
        return len(self.panels)

    def user_of(self, panel: int) -> int | None:
        try:
            return self.panels.index(panel)
        except ValueError:
            return None


def assign_users(layout: ArrayLayout, band: Waveband, users) -> Assignment:
    """Greedy one-to-one RF-chain selection.

    Users are served in index order; each takes the remaining panel with the
    largest uncompensated coherent response ``|sum_e b_e(f_c)|`` and ties go
    to the lower panel index.
    """
    if len(users) > layout.n_panels:
        raise ConfigurationError(f"{len(users)} users exceed {layout.n_panels} RF chains")
    k_c = 2 * np.pi * band.center_frequency / C0
    free = list(range(layout.n_panels))
    chosen = []
    for u in users:
        scores = [abs(np.exp(-1j * k_c * path_length(layout.panel_element_yz(p), u)).sum()) for p in free]
        best = free[int(np.argmax(scores))]
        chosen.append(best)
        free.remove(best)
    return Assignment(tuple(chosen))


@dataclass(frozen=True)
class AnalogPrecoder:
    """Per-panel phase-shifter vectors.

    ``columns`` is ``(n_panels, n_sub)`` for a frequency-flat precoder, or
    ``(L, n_panels, n_sub)`` when every subcarrier sees its own analog
    response (true-time-delay baseline).
    """

    columns: np.ndarray

    @property
    def wideband(self) -> bool:
        return self.columns.ndim == 3

    @property
    def n_panels(self) -> int:
        return self.columns.shape[-2]

    @property
    def n_sub(self) -> int:
        return self.columns.shape[-1]

    def matrix(self, l: int | None = None) -> np.ndarray:
        """Dense ``(N, n_panels)`` block-diagonal matrix (0-based ``l`` if wideband)."""
        cols = self.columns[l] if self.wideband else self.columns
        P, S = cols.shape
        A = np.zeros((P * S, P), dtype=complex)
        for p in range(P):
            A[p * S : (p + 1) * S, p] = cols[p]
        return A

    def effective_channels(self, h: np.ndarray) -> np.ndarray:
        """``A^H h`` for channels ``h`` of shape (L, K, N) -> (L, K, n_panels)."""
        L, K, N = h.shape
        blocks = h.reshape(L, K, self.n_panels, self.n_sub)
        if self.wideband:
            return np.einsum("lps,lkps->lkp", self.columns.conj(), blocks)
        return np.einsum("ps,lkps->lkp", self.columns.conj(), blocks)


def conjugate_steering(layout: ArrayLayout, band: Waveband, assignment: Assignment, users) -> AnalogPrecoder:
    """Match each assigned panel to its user's center-frequency steering phases.

    With channels written as ``h = beta * exp(-j 2 pi f d / c0)`` the
    co-phasing weight is ``exp(-j 2 pi f_c d / c0)``, so that
    ``h^H a = conj(beta) * N_sub`` at ``f_c``.  Unassigned panels get all-ones.
    """
    k_c = 2 * np.pi * band.center_frequency / C0
    cols = np.ones((layout.n_panels, layout.n_sub), dtype=complex)
    for k, p in enumerate(assignment.panels):
        cols[p] = np.exp(-1j * k_c * path_length(layout.panel_element_yz(p), users[k]))
    return AnalogPrecoder(cols)


def gain_profile(layout: ArrayLayout, band: Waveband, u: UserGeometry, panel: int) -> np.ndarray:
    """Per-subcarrier gain ``J_l`` (shape (L,)) of a conjugate-steered panel."""
    d = path_length(layout.panel_element_yz(panel), u)
    return residual_gain(band.residual_wavenumbers, d)


def residual_gain(kappa: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``|sum_e exp(j kappa_l d_e)|`` for each residual wavenumber ``kappa_l``."""
    # the common phase is irrelevant; centering d keeps the exponent small
    d = d - d.mean()
    return np.abs(np.exp(1j * np.outer(kappa, d)).sum(axis=1))


def per_subcarrier_gain(layout: ArrayLayout, band: Waveband, l: int, u: UserGeometry, panel: int) -> float:
    kappa = residual_wavenumber(band, l)
    d = path_length(layout.panel_element_yz(panel), u)
    return float(residual_gain(np.array([kappa]), d)[0])


def average_gain(
    layout: ArrayLayout, band: Waveband, u: UserGeometry, panel: int, *, normalized: bool = False
) -> float:
    g = gain_profile(layout, band, u, panel).mean()
    return float(g / layout.n_sub) if normalized else float(g)
