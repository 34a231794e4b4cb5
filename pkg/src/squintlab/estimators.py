"""scikit-learn style wrappers around the functional core.

``TileLayoutOptimizer`` learns a tile layout from user positions and
transforms positions into normalized per-subcarrier gains.
``WMMSEPrecoder`` learns per-subcarrier digital precoders from effective
channels.  Both keep hyper-parameters in ``__init__`` and learned state in
trailing-underscore attributes, so ``get_params``/``clone`` work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analog import assign_users, gain_profile
from .channel import UserGeometry, Waveband
from .digital import sinr, spectral_efficiency, wmmse_batch
from .geometry import nominal_layout
from .layout_optimizer import SCAConfig, optimize_layout


def _users(X) -> tuple[UserGeometry, ...]:
    X = check_array(X, dtype=float, ensure_min_features=3)
    if X.shape[1] != 3:
        raise ValueError(f"expected (range, azimuth, elevation) columns, got {X.shape[1]}")
    return tuple(UserGeometry(*row) for row in X)


class TileLayoutOptimizer(TransformerMixin, BaseEstimator):
    """Optimize the tile translations of a nominal multi-panel array.

    ``fit(X)`` takes one row ``(range, azimuth, elevation)`` per user.
    """

    def __init__(
        self,
        n_ph=1,
        n_pv=1,
        n_tiles=16,
        n_elements=4,
        center_frequency=100e9,
        bandwidth=20e9,
        n_subcarriers=64,
        v_max=20,
        n_outer=10,
        eps=1e-3,
        eps_j=0.01,
        trust_radius=None,
    ):
        self.n_ph = n_ph
        self.n_pv = n_pv
        self.n_tiles = n_tiles
        self.n_elements = n_elements
        self.center_frequency = center_frequency
        self.bandwidth = bandwidth
        self.n_subcarriers = n_subcarriers
        self.v_max = v_max
        self.n_outer = n_outer
        self.eps = eps
        self.eps_j = eps_j
        self.trust_radius = trust_radius

    def _band(self) -> Waveband:
        return Waveband(self.center_frequency, self.bandwidth, self.n_subcarriers)

    def fit(self, X, y=None):
        users = _users(X)
        band = self._band()
        layout = nominal_layout(self.n_ph, self.n_pv, self.n_tiles, self.n_elements, band.wavelength)
        cfg = SCAConfig(
            v_max=self.v_max, n_outer=self.n_outer, eps=self.eps, eps_j=self.eps_j, trust_radius=self.trust_radius
        )
        self.initial_layout_ = layout
        self.assignment_ = assign_users(layout, band, users)
        self.layout_, self.trace_ = optimize_layout(layout, band, users, self.assignment_, cfg)
        self.band_ = band
        self.users_ = users
        return self

    def transform(self, X):
        """Normalized gains (n_users, L) on the panel each row's user was assigned to.

        Rows beyond the fitted users reuse the panel of the matching fitted row index.
        """
        check_is_fitted(self, "layout_")
        users = _users(X)
        panels = self.assignment_.panels
        return np.stack(
            [
                gain_profile(self.layout_, self.band_, u, panels[k % len(panels)]) / self.layout_.n_sub
                for k, u in enumerate(users)
            ]
        )

    def score(self, X, y=None):
        """Mean over users of the worst-subcarrier normalized gain."""
        return float(self.transform(X).min(axis=1).mean())


class WMMSEPrecoder(BaseEstimator):
    """Per-subcarrier WMMSE on effective channels ``H`` of shape (L, K, n_rf)."""

    def __init__(self, power=1.0, snr_db=10.0, max_iter=100, tol=1e-6, cp_length=0):
        self.power = power
        self.snr_db = snr_db
        self.max_iter = max_iter
        self.tol = tol
        self.cp_length = cp_length

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @staticmethod
    def _check(H):
        H = np.asarray(H)
        if H.ndim == 2:
            H = H[None]
        if H.ndim != 3:
            raise ValueError(f"expected (L, K, n_rf) channels, got shape {H.shape}")
        return H.astype(complex)

    def fit(self, H, y=None):
        H = self._check(H)
        res = wmmse_batch(H, self.power, self.noise_var, max_iter=self.max_iter, tol=self.tol)
        self.precoders_ = res.precoders
        self.history_ = res.history
        self.n_iter_ = res.iterations
        return self

    def predict(self, H):
        """Per-user SINRs (L, K) of the fitted precoders on channels ``H``."""
        check_is_fitted(self, "precoders_")
        return sinr(self._check(H), self.precoders_, self.noise_var)

    def score(self, H, y=None):
        """Sum spectral efficiency in bits/s/Hz."""
        gamma = self.predict(H)
        return spectral_efficiency(gamma, gamma.shape[0], self.cp_length).total
