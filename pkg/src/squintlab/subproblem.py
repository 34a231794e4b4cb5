"""Native solver for the per-tile convex subproblem.

maximize  min_l  q_l(x)   over a convex polygon in the y-z plane,

where every ``q_l`` is a concave quadratic.  The polygon is built by clipping
an axis-aligned box with half-planes ``n . x >= b``.  A single distinct
quadratic is maximized exactly (interior stationary point or the best edge
point); several quadratics are handled by golden-section search over ``y``
on the concave marginal ``max_z min_l q_l(y, z)``, whose inner slice problem
is solved exactly by enumerating peaks, pairwise crossings and endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import SubproblemError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HalfPlane:
    """Constraint ``normal . x >= offset``."""

    normal: np.ndarray
    offset: float

    def slack(self, x) -> np.ndarray:
        return np.asarray(x) @ self.normal - self.offset


@dataclass(frozen=True)
class SurrogateModel:
    """Concave quadratic models ``q_l(x) = v_l + g_l.(x-c) + 0.5 (x-c)' U_l (x-c)``."""

    center: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    curvatures: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "gradients", np.asarray(self.gradients, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "curvatures", np.asarray(self.curvatures, dtype=float).reshape(-1, 2, 2))

    @property
    def n_models(self) -> int:
        return len(self.values)

    def evaluate(self, x) -> np.ndarray:
        """Model values, shape ``x.shape[:-1] + (n_models,)``."""
        s = np.asarray(x, dtype=float) - self.center
        lin = s @ self.gradients.T
        quad = np.einsum("...a,lab,...b->...l", s, self.curvatures, s)
        return self.values + lin + 0.5 * quad

    def objective(self, x) -> np.ndarray:
        return self.evaluate(x).min(axis=-1)

    def distinct(self) -> "SurrogateModel":
        """Drop exact duplicate models (mirror subcarriers give identical ones)."""
        packed = np.column_stack([self.values, self.gradients, self.curvatures.reshape(-1, 4)])
        _, keep = np.unique(packed, axis=0, return_index=True)
        keep = np.sort(keep)
        return SurrogateModel(self.center, self.values[keep], self.gradients[keep], self.curvatures[keep])


# -- polygon ----------------------------------------------------------------


def clip_polygon(vertices: np.ndarray, plane: HalfPlane, tol: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by one half-plane."""
    if len(vertices) == 0:
        return vertices
    out = []
    s = vertices @ plane.normal - plane.offset
    n = len(vertices)
    for i in range(n):
        p, q = vertices[i], vertices[(i + 1) % n]
        sp, sq = s[i], s[(i + 1) % n]
        p_in, q_in = sp >= -tol, sq >= -tol
        if p_in:
            out.append(p)
        if p_in != q_in and sp != sq:
            out.append(p + (q - p) * (sp / (sp - sq)))
    if not out:
        return np.empty((0, 2))
    out = np.array(out)
    # collapse near-duplicate consecutive vertices
    keep = [0]
    for i in range(1, len(out)):
        if np.max(np.abs(out[i] - out[keep[-1]])) > tol:
            keep.append(i)
    if len(keep) > 1 and np.max(np.abs(out[keep[-1]] - out[keep[0]])) <= tol:
        keep.pop()
    return out[keep]


def build_polygon(lower, upper, planes, tol: float) -> np.ndarray:
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)
    if np.any(lo > hi + tol):
        return np.empty((0, 2))
    hi = np.maximum(hi, lo)
    poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for plane in planes:
        poly = clip_polygon(poly, plane, tol)
        if len(poly) == 0:
            break
    return poly


# -- single concave quadratic -------------------------------------------------


def _segment_max(model: SurrogateModel, a: np.ndarray, b: np.ndarray):
    """Exact maximizer of the single model on segment [a, b]."""
    d = b - a
    g = model.gradients[0]
    U = model.curvatures[0]
    s0 = a - model.center
    slope = d @ (g + U @ s0)
    curv = d @ U @ d
    if curv < 0:
        tau = min(max(-slope / curv, 0.0), 1.0)
    else:
        tau = 1.0 if slope > 0 else 0.0
    return a + tau * d


def _single_model_max(model: SurrogateModel, poly: np.ndarray) -> np.ndarray:
    candidates = [v for v in poly]
    n = len(poly)
    for i in range(n):
        candidates.append(_segment_max(model, poly[i], poly[(i + 1) % n]))
    U, g = model.curvatures[0], model.gradients[0]
    step, *_ = np.linalg.lstsq(U, -g, rcond=1e-12)
    if np.allclose(U @ step, -g, rtol=1e-10, atol=1e-12 * (1 + np.abs(g).max())):
        candidates.append(model.center + step)
    cand = np.array(candidates)
    inside = _inside(poly, cand)
    cand = cand[inside] if inside.any() else cand[: len(poly)]
    vals = model.objective(cand)
    return cand[int(np.argmax(vals))]


def _inside(poly: np.ndarray, pts: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    if len(poly) < 3:
        # degenerate polygon: point or segment
        if len(poly) == 1:
            return np.all(np.abs(pts - poly[0]) <= tol, axis=1)
        a, b = poly[0], poly[1]
        d = b - a
        t = np.clip(((pts - a) @ d) / (d @ d), 0.0, 1.0)
        return np.linalg.norm(a + t[:, None] * d - pts, axis=1) <= tol
    edges = np.roll(poly, -1, axis=0) - poly
    rel = pts[:, None, :] - poly[None, :, :]
    cross = edges[None, :, 0] * rel[..., 1] - edges[None, :, 1] * rel[..., 0]
    scale = np.linalg.norm(edges, axis=1)[None, :]
    area = 0.5 * np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    sign = 1.0 if area >= 0 else -1.0
    return np.all(sign * cross >= -tol * scale, axis=1)


# -- several quadratics ---------------------------------------------------------


def _slice_bounds(poly: np.ndarray, y: float):
    """z-interval of the polygon intersected with the vertical line at ``y``."""
    zs = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        lo, hi = min(p[0], q[0]), max(p[0], q[0])
        if lo <= y <= hi:
            if q[0] == p[0]:
                zs.extend([p[1], q[1]])
            else:
                zs.append(p[1] + (q[1] - p[1]) * (y - p[0]) / (q[0] - p[0]))
    if not zs:
        near = poly[np.argmin(np.abs(poly[:, 0] - y))]
        return near[1], near[1]
    return min(zs), max(zs)


def _slice_max(model: SurrogateModel, y: float, zlo: float, zhi: float):
    """Exact ``max_z min_l q_l(y, z)`` on ``[zlo, zhi]``."""
    cy, cz = model.center
    dy = y - cy
    U = model.curvatures
    a = 0.5 * U[:, 1, 1]
    b = model.gradients[:, 1] + U[:, 0, 1] * dy
    c = model.values + model.gradients[:, 0] * dy + 0.5 * U[:, 0, 0] * dy * dy
    lo, hi = zlo - cz, zhi - cz
    cands = [np.array([lo, hi])]
    neg = a < 0
    if neg.any():
        cands.append(-b[neg] / (2 * a[neg]))
    i, j = np.triu_indices(len(a), k=1)
    if len(i):
        da, db, dc = a[i] - a[j], b[i] - b[j], c[i] - c[j]
        quad = np.abs(da) > 1e-300
        disc = db * db - 4 * da * dc
        ok = quad & (disc >= 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        # numerically stable quadratic roots
        qq = -0.5 * (db + np.copysign(sq, db))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(ok, qq / np.where(quad, da, 1.0), np.nan)
            r2 = np.where(ok & (qq != 0), dc / np.where(qq != 0, qq, 1.0), np.nan)
            lin = ~quad & (db != 0)
            r3 = np.where(lin, -dc / np.where(db != 0, db, 1.0), np.nan)
        cands.extend([r1, r2, r3])
    z = np.concatenate(cands)
    z = z[np.isfinite(z)]
    z = np.clip(z, lo, hi)
    vals = (a[None, :] * z[:, None] ** 2 + b[None, :] * z[:, None] + c[None, :]).min(axis=1)
    k = int(np.argmax(vals))
    return vals[k], z[k] + cz


def _multi_model_max(model: SurrogateModel, poly: np.ndarray, xtol: float) -> np.ndarray:
    ylo, yhi = poly[:, 0].min(), poly[:, 0].max()
    best = [-np.inf, None]

    def marginal(y):
        zlo, zhi = _slice_bounds(poly, y)
        val, z = _slice_max(model, y, zlo, zhi)
        if val > best[0]:
            best[0], best[1] = val, np.array([y, z])
        return val

    marginal(ylo)
    marginal(yhi)
    a, b = ylo, yhi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = marginal(x1), marginal(x2)
    while b - a > xtol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = marginal(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = marginal(x1)
    return best[1]


def solve_tile_subproblem(
    surrogate: SurrogateModel,
    lower,
    upper,
    planes=(),
    *,
    tol: float = 1e-6,
    geom_tol: float = 1e-14,
):
    """Maximize the smallest surrogate over box ``[lower, upper]`` and half-planes.

    Returns ``(x, eta)`` with ``eta = sqrt(max(min_l q_l(x), 0))``.  Among
    (near-)ties the expansion point is preferred so flat models do not move
    the tile.
    """
    poly = build_polygon(lower, upper, planes, geom_tol)
    if len(poly) == 0:
        raise SubproblemError(
            f"empty feasible region: box {np.asarray(lower)}..{np.asarray(upper)}, {len(planes)} half-planes"
        )
    model = surrogate.distinct()
    if len(poly) == 1:
        x = poly[0]
    elif model.n_models == 1:
        x = _single_model_max(model, poly)
    else:
        width = max(np.ptp(poly[:, 0]), np.ptp(poly[:, 1]))
        x = _multi_model_max(model, poly, max(tol * width, 1e-15))
    value = float(model.objective(x))
    c = model.center
    if _inside(poly, c[None, :], tol=geom_tol * 10)[0]:
        v0 = float(model.objective(c))
        if v0 >= value - 1e-12 * (1.0 + abs(value)):
            x, value = c.copy(), v0
    return np.asarray(x, dtype=float), math.sqrt(max(value, 0.0))
