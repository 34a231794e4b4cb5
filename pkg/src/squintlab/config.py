"""Scenario configuration: declarative JSON/TOML files mapped onto dataclasses."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .channel import Waveband
from .exceptions import ConfigurationError
from .layout_optimizer import SCAConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

SCHEMES = ("hsc_hbf", "fpa", "fpa_ttd")
SWEEP_AXES = ("none", "snr", "bandwidth", "subcarrier")


@dataclass(frozen=True)
class ArrayConfig:
    n_ph: int = 2
    n_pv: int = 2
    n_tiles: int = 16
    n_elements: int = 4
    d_min: float | None = None
    panel_side: float | None = None

    @property
    def n_rf(self) -> int:
        return self.n_ph * self.n_pv


@dataclass(frozen=True)
class BandConfig:
    fc: float = 100e9
    bandwidth: float = 20e9
    n_subcarriers: int = 64
    cp_length: int | None = None

    def waveband(self, bandwidth: float | None = None) -> Waveband:
        return Waveband(self.fc, self.bandwidth if bandwidth is None else bandwidth, self.n_subcarriers, self.cp_length)


@dataclass(frozen=True)
class UsersConfig:
    count: int = 4
    placement: str = "uniform"  # "uniform" or "fixed"
    fixed: tuple = ()
    range: tuple = (5.0, 15.0)
    azimuth: tuple = (-math.pi / 3, math.pi / 3)
    elevation: tuple = (-math.pi / 3, math.pi / 3)
    min_separation: float = 0.05
    frequency_flat_gains: bool = False


@dataclass(frozen=True)
class SeedsConfig:
    count: int = 50
    base: int = 2025


@dataclass(frozen=True)
class AlgorithmConfig:
    sca: SCAConfig = field(default_factory=SCAConfig)
    wmmse_iters: int = 100
    wmmse_tol: float = 1e-6
    ttd_branches: int = 8


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "none"
    values: tuple = ()


@dataclass(frozen=True)
class ScenarioConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    band: BandConfig = field(default_factory=BandConfig)
    users: UsersConfig = field(default_factory=UsersConfig)
    snr_db: float = 10.0
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    schemes: tuple = SCHEMES

    def validate(self) -> "ScenarioConfig":
        a, b, u = self.array, self.band, self.users
        if min(a.n_ph, a.n_pv, a.n_tiles, a.n_elements) < 1:
            raise ConfigurationError("array counts must be positive")
        if math.isqrt(a.n_elements) ** 2 != a.n_elements:
            raise ConfigurationError(f"n_elements must be a perfect square, got {a.n_elements}")
        if u.count < 1:
            raise ConfigurationError("need at least one user")
        if u.count > a.n_rf:
            raise ConfigurationError(f"{u.count} users exceed {a.n_rf} RF chains")
        if u.placement not in ("uniform", "fixed"):
            raise ConfigurationError(f"unknown placement {u.placement!r}")
        if u.placement == "fixed":
            if len(u.fixed) != u.count or any(len(p) != 3 for p in u.fixed):
                raise ConfigurationError("fixed placement needs one (range, azimuth, elevation) per user")
        for name in ("range", "azimuth", "elevation"):
            lo, hi = getattr(u, name)
            if not lo <= hi:
                raise ConfigurationError(f"users.{name} bounds out of order")
        if not u.range[0] > 0:
            raise ConfigurationError("user ranges must be positive")
        if any(abs(x) > math.pi for x in (*u.azimuth, *u.elevation)):
            raise ConfigurationError("angle bounds must lie in [-pi, pi]")
        if self.seeds.count < 1:
            raise ConfigurationError("seeds.count must be >= 1")
        if self.sweep.axis not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {self.sweep.axis!r}")
        bad = set(self.schemes) - set(SCHEMES)
        if bad or not self.schemes:
            raise ConfigurationError(f"unknown schemes {sorted(bad)}; choose from {SCHEMES}")
        if self.algorithm.wmmse_iters < 1 or not self.algorithm.wmmse_tol > 0:
            raise ConfigurationError("invalid WMMSE settings")
        b.waveband()  # band sanity
        for v in self.sweep.values if self.sweep.axis == "bandwidth" else ():
            b.waveband(float(v))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, *, seed: int | None = None, schemes=None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seeds=replace(cfg.seeds, base=int(seed)))
        if schemes:
            cfg = replace(cfg, schemes=tuple(schemes))
        return cfg.validate()


def _build(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must be a table/object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(f"unknown keys in {path}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key == "sca":
            kwargs[key] = _build(SCAConfig, value, f"{path}.sca")
        elif isinstance(value, list):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    nested = {
        "array": ArrayConfig,
        "band": BandConfig,
        "users": UsersConfig,
        "seeds": SeedsConfig,
        "algorithm": AlgorithmConfig,
        "sweep": SweepConfig,
    }
    unknown = set(data) - set(nested) - {"snr_db", "schemes"}
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {k: _build(cls, data.get(k), k) for k, cls in nested.items()}
    if "snr_db" in data:
        kwargs["snr_db"] = float(data["snr_db"])
    if "schemes" in data:
        kwargs["schemes"] = tuple(data["schemes"])
    return ScenarioConfig(**kwargs).validate()


def load_config(path) -> ScenarioConfig:
    """Read a ``.json`` or ``.toml`` scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)


def shipped_config(name: str = "default") -> Path:
    """Path of a config bundled with the package (``default``, ``single_user_64``...)."""
    path = Path(__file__).parent / "configs" / f"{name}.json"
    if not path.is_file():
        raise ConfigurationError(f"no shipped config named {name!r}")
    return path
