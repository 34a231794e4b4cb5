"""Wideband line-of-sight near-field channel with exact spherical wavefronts."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .geometry import ArrayLayout

C0 = 299_792_458.0


@dataclass(frozen=True)
class UserGeometry:
    """User location in spherical coordinates around the array origin."""

    range: float
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not self.range > 0:
            raise ConfigurationError(f"user range must be positive, got {self.range}")
        for name in ("azimuth", "elevation"):
            angle = getattr(self, name)
            if not -math.pi < angle <= math.pi:
                raise ConfigurationError(f"{name} {angle} outside (-pi, pi]")

    @property
    def position(self) -> np.ndarray:
        return user_position(self)

    @property
    def yz_focus(self) -> np.ndarray:
        """Projection of the user onto the array plane."""
        cp = math.cos(self.elevation)
        return np.array([self.range * cp * math.sin(self.azimuth), self.range * math.sin(self.elevation)])


@dataclass(frozen=True)
class Waveband:
    center_frequency: float
    bandwidth: float
    n_subcarriers: int
    cp_length: int | None = None

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ConfigurationError("need at least one subcarrier")
        if not 0 <= self.bandwidth < 2 * self.center_frequency:
            raise ConfigurationError("bandwidth must satisfy 0 <= B < 2 fc")
        if self.cp_length is None:
            object.__setattr__(self, "cp_length", self.n_subcarriers // 8)
        elif self.cp_length < 0:
            raise ConfigurationError("cyclic prefix length must be nonnegative")

    @property
    def wavelength(self) -> float:
        return C0 / self.center_frequency

    @property
    def frequencies(self) -> np.ndarray:
        l = np.arange(1, self.n_subcarriers + 1)
        return self.center_frequency + self.bandwidth / (2 * self.n_subcarriers) * (2 * l - 1 - self.n_subcarriers)

    @property
    def residual_wavenumbers(self) -> np.ndarray:
        """2 pi (f_l - f_c) / c0 per subcarrier (rad/m), exactly odd about f_c."""
        L = self.n_subcarriers
        steps = 2 * np.arange(1, L + 1) - 1 - L
        return 2 * np.pi * (self.bandwidth / (2 * L)) * steps / C0


def subcarrier_frequency(band: Waveband, l: int) -> float:
    """Center frequency of subcarrier ``l`` (1-based)."""
    if not 1 <= l <= band.n_subcarriers:
        raise IndexError(f"subcarrier {l} outside 1..{band.n_subcarriers}")
    L = band.n_subcarriers
    return band.center_frequency + band.bandwidth / (2 * L) * (2 * l - 1 - L)


def residual_wavenumber(band: Waveband, l: int) -> float:
    subcarrier_frequency(band, l)  # range check
    return float(band.residual_wavenumbers[l - 1])


def user_position(u: UserGeometry) -> np.ndarray:
    cp = math.cos(u.elevation)
    return np.array(
        [
            u.range * cp * math.cos(u.azimuth),
            u.range * cp * math.sin(u.azimuth),
            u.range * math.sin(u.elevation),
        ]
    )


def path_length(element_yz, u: UserGeometry) -> np.ndarray:
    """Exact distance from user ``u`` to elements at ``element_yz`` (..., 2)."""
    yz = np.asarray(element_yz, dtype=float)
    y, z = yz[..., 0], yz[..., 1]
    r = u.range
    arg = r * r + y * y + z * z - 2 * r * (y * math.cos(u.elevation) * math.sin(u.azimuth) + z * math.sin(u.elevation))
    # rounding only; a genuinely negative radicand would mean broken inputs
    assert np.all(arg >= -1e-18 * max(r * r, 1.0)), "negative squared path length"
    return np.sqrt(np.maximum(arg, 0.0))


def steering_vector(layout: ArrayLayout, band: Waveband, l: int, u: UserGeometry) -> np.ndarray:
    """Unit-modulus spherical-wave response of the whole array on subcarrier ``l``."""
    d = path_length(layout.element_yz(), u)
    return np.exp(-2j * np.pi * subcarrier_frequency(band, l) / C0 * d)


def steering_matrix(layout: ArrayLayout, band: Waveband, u: UserGeometry) -> np.ndarray:
    """(L, N) steering vectors for all subcarriers."""
    d = path_length(layout.element_yz(), u)
    return np.exp(-2j * np.pi * band.frequencies[:, None] / C0 * d[None, :])


def draw_path_gains(rng: np.random.Generator, L: int, K: int, *, frequency_flat: bool = False) -> np.ndarray:
    """(L, K) i.i.d. CN(0, 1) gains; optionally one gain per user shared across subcarriers."""
    rows = 1 if frequency_flat else L
    g = (rng.standard_normal((rows, K)) + 1j * rng.standard_normal((rows, K))) / math.sqrt(2.0)
    return np.broadcast_to(g, (L, K)).copy()


def channel_vector(layout: ArrayLayout, band: Waveband, l: int, u: UserGeometry, beta: complex) -> np.ndarray:
    return beta * steering_vector(layout, band, l, u)


@dataclass(frozen=True)
class ChannelSet:
    """Channels ``h[l, k]`` (shape (L, K, N)) with their path gains (L, K)."""

    vectors: np.ndarray
    gains: np.ndarray

    @property
    def shape(self):
        return self.vectors.shape

    def to_rows(self) -> np.ndarray:
        """(L*K, N) matrix, subcarrier-major rows, canonical element columns."""
        L, K, N = self.vectors.shape
        return self.vectors.reshape(L * K, N)

    def dump(self, path) -> Path:
        """Write the channel matrix to ``.npy`` (binary) or CSV with complex entries."""
        path = Path(path)
        rows = self.to_rows()
        if path.suffix == ".npy":
            np.save(path, rows)
        else:
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["l", "k"] + [f"e{j}" for j in range(rows.shape[1])])
                L, K, _ = self.vectors.shape
                for idx, row in enumerate(rows):
                    writer.writerow([idx // K + 1, idx % K + 1] + [repr(complex(v)) for v in row])
        return path


def channel_set(layout: ArrayLayout, band: Waveband, users, gains: np.ndarray) -> ChannelSet:
    gains = np.asarray(gains, dtype=complex)
    if gains.shape != (band.n_subcarriers, len(users)):
        raise ConfigurationError(f"gains shape {gains.shape} != (L, K)")
    vecs = np.stack([steering_matrix(layout, band, u) for u in users], axis=1)
    return ChannelSet(vecs * gains[:, :, None], gains)
