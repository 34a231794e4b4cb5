"""Element / tile / panel geometry of the hierarchical movable-antenna array.

All coordinates live in the y-z plane (x = 0).  The canonical element
ordering used everywhere in the package is lexicographic in
``(panel, tile, element)``, where panels are themselves ordered
lexicographically in their grid index ``(m, n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, InfeasibleBoxError, LayoutError

#: Tolerance (meters) under which containment/spacing margins count as satisfied.
LAYOUT_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def tile_pitch(s: int, wavelength: float) -> float:
    """Tile-center spacing keeping elements of distinct tiles >= wavelength/2 apart.

    The bound is rotation-free: two tiles whose centers are at least this far
    apart cannot bring any pair of their elements closer than half a
    wavelength, whatever direction separates them.
    """
    return (math.sqrt(2.0) * (s - 1) + 1.0) / 2.0 * wavelength


@dataclass(frozen=True)
class IntraTileLayout:
    """Fixed ``s x s`` element grid shared by every tile."""

    side_count: int
    element_spacing: float
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.side_count < 1:
            raise ConfigurationError(f"tile side count must be >= 1, got {self.side_count}")
        if not self.element_spacing > 0:
            raise ConfigurationError("element spacing must be positive")
        s = self.side_count
        ticks = (np.arange(s) - (s - 1) / 2.0) * self.element_spacing
        yy, zz = np.meshgrid(ticks, ticks, indexing="ij")
        object.__setattr__(self, "offsets", _frozen(np.stack([yy.ravel(), zz.ravel()], axis=1)))

    @property
    def n_elements(self) -> int:
        return self.side_count**2


@dataclass(frozen=True)
class PanelSpec:
    m: int
    n: int
    center: tuple[float, float]
    side: float

    @property
    def center_3d(self) -> np.ndarray:
        return np.array([0.0, self.center[0], self.center[1]])


@dataclass(frozen=True)
class ArrayLayout:
    """Complete array geometry; ``tile_translations`` is the optimization variable.

    ``tile_translations`` has shape ``(n_panels, n_tiles, 2)`` and holds each
    tile center relative to its panel center.
    """

    panels: tuple[PanelSpec, ...]
    tile_translations: np.ndarray
    intra_tile: IntraTileLayout
    d_min: float

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        deltas = _frozen(self.tile_translations)
        if deltas.ndim != 3 or deltas.shape[0] != len(self.panels) or deltas.shape[2] != 2:
            raise ConfigurationError(
                f"tile_translations must have shape (n_panels, n_tiles, 2), got {deltas.shape}"
            )
        object.__setattr__(self, "tile_translations", deltas)

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def n_tiles(self) -> int:
        return self.tile_translations.shape[1]

    @property
    def n_elements_per_tile(self) -> int:
        return self.intra_tile.n_elements

    @property
    def n_sub(self) -> int:
        return self.n_tiles * self.n_elements_per_tile

    @property
    def n_elements(self) -> int:
        return self.n_panels * self.n_sub

    @property
    def panel_centers(self) -> np.ndarray:
        return np.array([p.center for p in self.panels], dtype=float)

    def with_translations(self, tile_translations) -> "ArrayLayout":
        return ArrayLayout(self.panels, tile_translations, self.intra_tile, self.d_min)

    def with_tile(self, panel: int, tile: int, delta) -> "ArrayLayout":
        deltas = np.array(self.tile_translations)
        deltas[panel, tile] = delta
        return self.with_translations(deltas)

    def panel_element_yz(self, panel: int) -> np.ndarray:
        """(n_sub, 2) absolute y-z coordinates of one panel's elements."""
        c = np.asarray(self.panels[panel].center)
        pts = c + self.tile_translations[panel][:, None, :] + self.intra_tile.offsets[None, :, :]
        return pts.reshape(-1, 2)

    def element_yz(self) -> np.ndarray:
        """(N, 2) y-z coordinates of all elements, canonical order."""
        c = self.panel_centers[:, None, None, :]
        pts = c + self.tile_translations[:, :, None, :] + self.intra_tile.offsets[None, None]
        return pts.reshape(-1, 2)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "panels": [
                {"m": p.m, "n": p.n, "center_yz": list(p.center), "side": p.side}
                for p in self.panels
            ],
            "tile_translations": self.tile_translations.tolist(),
            "intra_tile": {"s": self.intra_tile.side_count, "spacing": self.intra_tile.element_spacing},
            "d_min": self.d_min,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayLayout":
        try:
            panels = tuple(
                PanelSpec(int(p["m"]), int(p["n"]), tuple(map(float, p["center_yz"])), float(p["side"]))
                for p in data["panels"]
            )
            intra = IntraTileLayout(int(data["intra_tile"]["s"]), float(data["intra_tile"]["spacing"]))
            return cls(panels, np.asarray(data["tile_translations"], dtype=float), intra, float(data["d_min"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed layout document: {exc!r}") from exc

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "ArrayLayout":
        path = Path(source)
        text = path.read_text() if path.exists() else str(source)
        return cls.from_dict(json.loads(text))


def element_positions(layout: ArrayLayout) -> np.ndarray:
    """(N, 3) element coordinates in canonical ``(m, n, t, i)`` order."""
    report = validate_layout(layout)
    if not report.ok:
        raise LayoutError(report)
    yz = layout.element_yz()
    return np.column_stack([np.zeros(len(yz)), yz])


@dataclass(frozen=True)
class Violation:
    kind: str  # "containment" or "spacing"
    panel: int
    tile: int
    other: int  # element index for containment, partner tile for spacing
    margin: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "ok"
        worst = min(self.violations, key=lambda v: v.margin)
        return f"{len(self.violations)} violation(s); worst {worst.kind} margin {worst.margin:.3e} m"


def containment_margins(layout: ArrayLayout, panel: int) -> np.ndarray:
    """(n_tiles, n_elements) signed distance of each element to its panel boundary."""
    spec = layout.panels[panel]
    rel = layout.tile_translations[panel][:, None, :] + layout.intra_tile.offsets[None]
    return np.min(spec.side / 2.0 - np.abs(rel), axis=-1)


def validate_layout(layout: ArrayLayout, tol: float = LAYOUT_TOL) -> ValidationReport:
    """Report every containment and tile-spacing violation with its signed margin."""
    found = []
    for p in range(layout.n_panels):
        margins = containment_margins(layout, p)
        for t, i in zip(*np.nonzero(margins < -tol)):
            found.append(Violation("containment", p, int(t), int(i), float(margins[t, i])))
        deltas = layout.tile_translations[p]
        dist = np.linalg.norm(deltas[:, None, :] - deltas[None, :, :], axis=-1)
        for t, u in zip(*np.triu_indices(layout.n_tiles, k=1)):
            margin = dist[t, u] - layout.d_min
            if margin < -tol:
                found.append(Violation("spacing", p, int(t), int(u), float(margin)))
    return ValidationReport(tuple(found))


def _grid_shape(n_tiles: int) -> tuple[int, int]:
    """Most square (rows, cols) factorization with cols >= rows."""
    rows = int(math.isqrt(n_tiles))
    while n_tiles % rows:
        rows -= 1
    return rows, n_tiles // rows


def nominal_layout(
    n_ph: int,
    n_pv: int,
    n_tiles: int,
    n_elements: int,
    wavelength: float,
    *,
    d_min: float | None = None,
    panel_side: float | None = None,
) -> ArrayLayout:
    """Fixed-position reference layout; also the initial point of the optimizer.

    Tiles sit on a centered grid of pitch ``tile_pitch`` (square when
    ``n_tiles`` is a perfect square, otherwise the most square factorization,
    wider along y).  Panels tile a centered grid of pitch equal to the panel side.
    """
    if min(n_ph, n_pv, n_tiles, n_elements) < 1:
        raise ConfigurationError("array dimensions must be positive")
    s = math.isqrt(n_elements)
    if s * s != n_elements:
        raise ConfigurationError(f"elements per tile must be a perfect square, got {n_elements}")
    if not wavelength > 0:
        raise ConfigurationError("wavelength must be positive")
    pitch = tile_pitch(s, wavelength)
    side = 2.0 * math.sqrt(n_tiles * n_elements) * wavelength if panel_side is None else float(panel_side)
    intra = IntraTileLayout(s, wavelength / 2.0)

    rows, cols = _grid_shape(n_tiles)
    ys = (np.arange(cols) - (cols - 1) / 2.0) * pitch
    zs = (np.arange(rows) - (rows - 1) / 2.0) * pitch
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    tiles = np.stack([yy.ravel(), zz.ravel()], axis=1)

    panels = tuple(
        PanelSpec(
            m + 1,
            n + 1,
            ((m - (n_ph - 1) / 2.0) * side, (n - (n_pv - 1) / 2.0) * side),
            side,
        )
        for m in range(n_ph)
        for n in range(n_pv)
    )
    layout = ArrayLayout(
        panels,
        np.broadcast_to(tiles, (len(panels), n_tiles, 2)),
        intra,
        pitch if d_min is None else float(d_min),
    )
    report = validate_layout(layout)
    if not report.ok:
        raise ConfigurationError(f"nominal layout does not fit its panel: {report.summary()}")
    return layout


def feasible_translation_box(layout: ArrayLayout, panel: int, tile: int | None = None):
    """Bounds ``(lower, upper)`` on a tile translation keeping all its elements in the panel.

    The tile is rigid, so containment of every element in the square panel
    region reduces to an axis-aligned box on the translation.
    """
    half = layout.panels[panel].side / 2.0
    offsets = layout.intra_tile.offsets
    lower = -half - offsets.min(axis=0)
    upper = half - offsets.max(axis=0)
    if np.any(lower > upper):
        raise InfeasibleBoxError(
            f"tile footprint {np.ptp(offsets, axis=0)} exceeds panel side {2 * half} (panel {panel})"
        )
    return lower, upper
