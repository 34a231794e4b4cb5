"""Tile-wise successive convex approximation of the wideband focusing layout.

Each tile of a user's panel is updated in turn while the others stay fixed.
An inner iteration evaluates the per-subcarrier gains, keeps the near-worst
subcarriers, builds concave quadratic models of their squared gains around
the current translation, linearizes the tile-spacing constraints and solves
the resulting 2-D max-min problem.  A trust-region safeguard only accepts
steps that do not lower the true band-wide minimum gain.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analog import Assignment
from .channel import UserGeometry, Waveband, residual_wavenumber
from .exceptions import ConfigurationError, SingularityError
from .geometry import LAYOUT_TOL, ArrayLayout, feasible_translation_box
from .subproblem import HalfPlane, SurrogateModel, solve_tile_subproblem

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "user",
    "panel",
    "tile",
    "inner_iter",
    "min_J",
    "sum_J",
    "delta_y",
    "delta_z",
    "accepted",
    "trust_radius",
)


@dataclass(frozen=True)
class SCAConfig:
    """Algorithm settings.  ``trust_radius=None`` means one center wavelength."""

    v_max: int = 20
    eps: float = 1e-3
    eps_j: float = 0.01
    n_outer: int = 10
    trust_radius: float | None = None
    subproblem_tol: float = 1e-6
    eps_j_mode: str = "absolute"
    max_shrinks: int = 10

    def __post_init__(self):
        if self.v_max < 0 or self.n_outer < 0 or self.max_shrinks < 0:
            raise ConfigurationError("iteration budgets must be nonnegative")
        if not (self.eps > 0 and self.subproblem_tol > 0 and self.eps_j >= 0):
            raise ConfigurationError("tolerances must be positive (eps_j >= 0)")
        if self.trust_radius is not None and not self.trust_radius > 0:
            raise ConfigurationError("trust radius must be positive")
        if self.eps_j_mode not in ("absolute", "relative"):
            raise ConfigurationError(f"unknown eps_j_mode {self.eps_j_mode!r}")


@dataclass(frozen=True)
class TraceRow:
    user: int
    panel: int
    tile: int
    inner_iter: int
    min_J: float
    sum_J: float
    delta_y: float
    delta_z: float
    accepted: bool
    trust_radius: float
    sweep: int = field(default=0, compare=False)

    def as_tuple(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


# -- per-tile primitives ------------------------------------------------------


def _tile_terms(deltas, offsets, center, focus, user_range, kappa, d_ref):
    """Phasor sums ``T[t, l] = sum_i exp(j kappa_l (d_ti - d_ref))`` for every tile."""
    pts = center + deltas[:, None, :] + offsets[None]
    d = _distances(pts, focus, user_range)
    return np.exp(1j * (d - d_ref)[..., None] * kappa).sum(axis=1)


def _distances(pts, focus, user_range):
    # |user - (0, y, z)|^2 = r^2 + |p|^2 - 2 p.focus
    arg = user_range**2 + np.sum(pts * pts, axis=-1) - 2 * pts @ focus
    return np.sqrt(np.maximum(arg, 0.0))


def _derivatives(delta, offsets, center, focus, user_range, kappa, rest, d_ref):
    """Value, gradient and Hessian of ``Q = |rest + T(delta)|^2`` for each ``kappa``."""
    pts = center + delta + offsets  # (E, 2)
    d = _distances(pts, focus, user_range)
    if np.any(d <= 0):
        raise SingularityError("user coincides with an array element")
    g = (pts - focus) / d[:, None]  # grad of d_i
    hd = (np.eye(2)[None] - g[:, :, None] * g[:, None, :]) / d[:, None, None]
    e = np.exp(1j * np.outer(kappa, d - d_ref))  # (n, E)
    S = rest + e.sum(axis=1)
    dS = 1j * kappa[:, None] * (e @ g)  # (n, 2)
    d2S = 1j * kappa[:, None, None] * np.einsum("ne,eab->nab", e, hd) - (kappa**2)[:, None, None] * np.einsum(
        "ne,ea,eb->nab", e, g, g
    )
    Q = np.abs(S) ** 2
    grad = 2 * np.real(np.conj(S)[:, None] * dS)
    hess = 2 * np.real(dS[:, :, None] * np.conj(dS)[:, None, :] + np.conj(S)[:, None, None] * d2S)
    return Q, grad, 0.5 * (hess + hess.transpose(0, 2, 1))


def _panel_context(layout: ArrayLayout, panel: int, u: UserGeometry):
    center = np.asarray(layout.panels[panel].center, dtype=float)
    return center, layout.intra_tile.offsets, u.yz_focus, u.range, float(np.linalg.norm(u.position - np.r_[0.0, center]))


def squared_gain(layout: ArrayLayout, band: Waveband, l: int, u: UserGeometry, panel: int, tile: int) -> float:
    """``Q_l = J_l^2`` of a conjugate-steered panel, as a function of tile ``tile``."""
    center, offsets, focus, r, d_ref = _panel_context(layout, panel, u)
    T = _tile_terms(layout.tile_translations[panel], offsets, center, focus, r, np.array([residual_wavenumber(band, l)]), d_ref)
    return float(np.abs(T.sum(axis=0)[0]) ** 2)


def gain_gradient_hessian(layout: ArrayLayout, band: Waveband, l: int, u: UserGeometry, panel: int, tile: int):
    """Analytic gradient (2,) and Hessian (2, 2) of ``Q_l`` w.r.t. one tile translation."""
    center, offsets, focus, r, d_ref = _panel_context(layout, panel, u)
    kappa = np.array([residual_wavenumber(band, l)])
    deltas = layout.tile_translations[panel]
    T = _tile_terms(deltas, offsets, center, focus, r, kappa, d_ref)
    rest = T.sum(axis=0) - T[tile]
    _, grad, hess = _derivatives(deltas[tile], offsets, center, focus, r, kappa, rest, d_ref)
    return grad[0], hess[0]


def concavify(hessian) -> np.ndarray:
    """Negative-semidefinite part of a symmetric 2x2 (or batched) matrix."""
    H = np.asarray(hessian, dtype=float)
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    lam, V = np.linalg.eigh(H)
    U = (V * np.minimum(lam, 0.0)[..., None, :]) @ np.swapaxes(V, -1, -2)
    # rebuilding a clamped (rank-deficient) matrix can leave an eigenvalue of
    # order eps*|lam| above zero; shift such cases by that residue plus a few ulps
    clamped = np.any(lam > 0, axis=-1)
    top = np.maximum(np.linalg.eigvalsh(U)[..., -1], 0.0)
    shift = np.where(clamped, 2 * top + 8 * np.finfo(float).eps * np.abs(lam).max(axis=-1), 0.0)
    U = U - shift[..., None, None] * np.eye(2)
    return np.where(clamped[..., None, None], U, H)


def near_worst_set(J, eps_j: float, *, relative: bool = False) -> np.ndarray:
    """0-based indices of subcarriers within ``eps_j`` of the worst gain."""
    J = np.asarray(J, dtype=float)
    jmin = J.min()
    thr = eps_j * abs(jmin) if relative else eps_j
    return np.flatnonzero(J - jmin <= thr)


def linearized_spacing(ref, other, d_min: float, rng: np.random.Generator | None = None) -> HalfPlane:
    """Inner (conservative) linearization of ``|x - other| >= d_min`` at ``ref``."""
    ref, other = np.asarray(ref, float), np.asarray(other, float)
    diff = ref - other
    norm = float(np.hypot(*diff))
    if norm == 0.0:
        rng = np.random.default_rng(0) if rng is None else rng
        ang = rng.uniform(0, 2 * np.pi)
        n = np.array([math.cos(ang), math.sin(ang)])
        log.warning("coincident tile translations %s; using random normal %s", ref, n)
    else:
        n = diff / norm
    return HalfPlane(n, d_min + float(n @ other))


def build_surrogate(delta, kappa, rest, ctx) -> SurrogateModel:
    center, offsets, focus, r, d_ref = ctx
    Q, grad, hess = _derivatives(np.asarray(delta, float), offsets, center, focus, r, kappa, rest, d_ref)
    return SurrogateModel(np.asarray(delta, float), Q, grad, concavify(hess))


# -- Algorithm driver ---------------------------------------------------------


def _tile_feasible(deltas, tile, x, d_min, lower, upper) -> bool:
    if np.any(x < lower - LAYOUT_TOL) or np.any(x > upper + LAYOUT_TOL):
        return False
    others = np.delete(deltas, tile, axis=0)
    if len(others) == 0:
        return True
    return bool(np.all(np.linalg.norm(others - x, axis=1) - d_min >= -LAYOUT_TOL))


def optimize_panel(
    layout: ArrayLayout,
    band: Waveband,
    u: UserGeometry,
    panel: int,
    cfg: SCAConfig = SCAConfig(),
    *,
    user_index: int = 0,
):
    """Run the tile-wise SCA on one panel; returns ``(tile_translations, trace)``."""
    ctx = _panel_context(layout, panel, u)
    center, offsets, focus, r, d_ref = ctx
    kappa = band.residual_wavenumbers
    deltas = np.array(layout.tile_translations[panel], dtype=float)
    lower, upper = feasible_translation_box(layout, panel)
    radius0 = band.wavelength if cfg.trust_radius is None else cfg.trust_radius
    relative = cfg.eps_j_mode == "relative"

    T = _tile_terms(deltas, offsets, center, focus, r, kappa, d_ref)
    S = T.sum(axis=0)
    J = np.abs(S)
    trace = [TraceRow(user_index, panel, -1, 0, J.min(), J.sum(), math.nan, math.nan, True, radius0, 0)]

    for sweep in range(cfg.n_outer):
        for t in range(layout.n_tiles):
            for v in range(1, cfg.v_max + 1):
                jmin = J.min()
                active = near_worst_set(J, cfg.eps_j, relative=relative)
                # Q is even in kappa, so mirrored subcarriers share one model
                kact = np.unique(np.abs(kappa[active]))
                rest = S[np.searchsorted(kappa, kact)] - T[t][np.searchsorted(kappa, kact)]
                model = build_surrogate(deltas[t], kact, rest, ctx)
                planes = []
                for o in range(layout.n_tiles):
                    if o != t:
                        hp = linearized_spacing(deltas[t], deltas[o], layout.d_min)
                        # an accepted iterate may sit LAYOUT_TOL inside the bound; keep it feasible
                        planes.append(HalfPlane(hp.normal, min(hp.offset, float(hp.normal @ deltas[t]))))

                radius = radius0
                accepted = False
                moved = 0.0
                for _ in range(cfg.max_shrinks + 1):
                    lo = np.maximum(lower, deltas[t] - radius)
                    hi = np.minimum(upper, deltas[t] + radius)
                    x, _eta = solve_tile_subproblem(model, lo, hi, planes, tol=cfg.subproblem_tol)
                    if np.array_equal(x, deltas[t]):
                        break
                    if _tile_feasible(deltas, t, x, layout.d_min, lower, upper):
                        Tt = np.exp(1j * (_distances(center + x + offsets, focus, r) - d_ref)[:, None] * kappa).sum(axis=0)
                        S_new = S - T[t] + Tt
                        J_new = np.abs(S_new)
                        if J_new.min() >= jmin:
                            moved = float(np.linalg.norm(x - deltas[t]))
                            deltas[t], T[t], S, J = x, Tt, S_new, J_new
                            accepted = True
                            break
                    radius *= 0.5
                trace.append(
                    TraceRow(
                        user_index, panel, t, v, J.min(), J.sum(), deltas[t, 0], deltas[t, 1], accepted, radius, sweep
                    )
                )
                if moved <= cfg.eps:
                    break
    return deltas, trace


def optimize_layout(
    layout: ArrayLayout,
    band: Waveband,
    users,
    assignment: Assignment,
    cfg: SCAConfig = SCAConfig(),
):
    """Optimize every assigned panel for its user; returns ``(layout, trace)``."""
    deltas = np.array(layout.tile_translations)
    trace = []
    for k, p in enumerate(assignment.panels):
        deltas[p], rows = optimize_panel(layout, band, users[k], p, cfg, user_index=k)
        trace.extend(rows)
    return layout.with_translations(deltas), trace
