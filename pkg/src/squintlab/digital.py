"""Per-subcarrier WMMSE digital precoding and rate evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class WMMSEResult:
    """Precoders ``D`` (L, n_rf, K) and the per-iteration sum-rate history (n_iter+1, L)."""

    precoders: np.ndarray
    history: np.ndarray
    iterations: np.ndarray


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray  # (L, K), linear
    per_user: np.ndarray  # (K,), bits/s/Hz including the CP factor
    total: float  # bits/s/Hz including the CP factor
    objective: float  # sum_k sum_l log2(1 + sinr), no CP factor


def effective_channel(h, A) -> np.ndarray:
    """``A^H h``: the channel seen by the RF chains (so that ``h^H A = hbar^H``)."""
    h, A = np.asarray(h), np.asarray(A)
    if A.ndim != 2 or h.shape[-1] != A.shape[0]:
        raise ConfigurationError(f"channel length {h.shape[-1]} does not match analog precoder {A.shape}")
    return h @ A.conj()


def sinr(hbar, D, noise_var: float) -> np.ndarray:
    """SINR of every user; ``hbar`` is (..., K, n_rf), ``D`` is (..., n_rf, K)."""
    G = np.abs(np.conj(hbar) @ D) ** 2  # G[k, i] = |hbar_k^H d_i|^2
    sig = np.diagonal(G, axis1=-2, axis2=-1)
    interf = G.sum(axis=-1) - sig
    return sig / (interf + noise_var)


def _sum_rate(hbar, D, noise_var):
    return np.log2(1.0 + sinr(hbar, D, noise_var)).sum(axis=-1)


def _solve_multiplier(lam, m2, power, iters=200):
    """Smallest mu >= 0 with sum_i m2_i / (lam_i + mu)^2 <= power (vectorized over rows)."""
    def pw(mu):
        return np.sum(m2 / (lam + mu[:, None]) ** 2, axis=1)

    zero = np.zeros(len(lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        at_zero = np.where(m2 > 0, m2 / lam**2, 0.0).sum(axis=1)
    need = ~(at_zero <= power)
    mu = zero.copy()
    if need.any():
        lo = zero[need]
        hi = np.sqrt(m2[need].sum(axis=1) / power)
        l_, m_ = lam[need], m2[need]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            over = np.sum(m_ / (l_ + mid[:, None]) ** 2, axis=1) > power
            lo = np.where(over, mid, lo)
            hi = np.where(over, hi, mid)
            if np.all(hi - lo <= 1e-16 * hi):
                break
        mu[need] = hi
    return mu


def wmmse_batch(hbar, power: float, noise_var: float, *, max_iter: int = 100, tol: float = 1e-6) -> WMMSEResult:
    """Sum-rate WMMSE on each subcarrier independently.

    ``hbar`` has shape (L, K, n_rf).  ``power`` bounds ``||D_l||_F^2``.  The
    power multiplier is found by bisection on the eigen-decomposed normal
    matrix; subcarriers stop individually once the relative sum-rate change
    drops below ``tol``.
    """
    if not power > 0 or not noise_var > 0:
        raise ConfigurationError("power and noise variance must be positive")
    H = np.asarray(hbar, dtype=complex)
    L, K, P = H.shape
    norms = np.linalg.norm(H, axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.where(norms > 0, H / norms, 0.0) * np.sqrt(power / K)
    D = D.transpose(0, 2, 1).copy()  # (L, P, K)

    rate = _sum_rate(H, D, noise_var)
    history = [rate.copy()]
    active = np.ones(L, dtype=bool)
    iters = np.zeros(L, dtype=int)
    Hc = np.conj(H)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Ha, Hca, Da = H[idx], Hc[idx], D[idx]
        G = Hca @ Da  # (n, K, K)
        total = np.sum(np.abs(G) ** 2, axis=2) + noise_var
        s = np.diagonal(G, axis1=1, axis2=2)
        u = s / total
        w = 1.0 / np.maximum(1.0 - np.abs(s) ** 2 / total, 1e-300)
        coef = w * np.abs(u) ** 2
        Phi = np.einsum("nk,nkp,nkq->npq", coef, Ha, Hca)
        B = (Ha * (w * u)[:, :, None]).transpose(0, 2, 1)  # (n, P, K)
        lam, V = np.linalg.eigh(Phi)
        lam = np.maximum(lam, 0.0)
        M = np.conj(V.transpose(0, 2, 1)) @ B
        m2 = np.sum(np.abs(M) ** 2, axis=2)
        # components outside the range of Phi are numerical noise
        null = lam <= 1e-12 * np.maximum(lam.max(axis=1, keepdims=True), 1e-300)
        m2 = np.where(null, 0.0, m2)
        mu = _solve_multiplier(np.where(null, 1.0, lam), m2, power)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(null, 0.0, 1.0 / (lam + mu[:, None]))
        Dn = V @ (scale[:, :, None] * M)
        new_rate = _sum_rate(Ha, Dn, noise_var)
        D[idx] = Dn
        old = rate[idx]
        rate[idx] = new_rate
        iters[idx] += 1
        done = np.abs(new_rate - old) <= tol * np.maximum(np.abs(old), 1e-12)
        active[idx[done]] = False
        history.append(rate.copy())
    return WMMSEResult(D, np.array(history), iters)


def wmmse(hbar, power: float, noise_var: float, *, max_iter: int = 100, tol: float = 1e-6) -> np.ndarray:
    """WMMSE precoder ``D`` (n_rf, K) for a single subcarrier with channels ``hbar`` (K, n_rf)."""
    res = wmmse_batch(np.asarray(hbar)[None], power, noise_var, max_iter=max_iter, tol=tol)
    return res.precoders[0]


def spectral_efficiency(gamma, L: int, cp_length: int) -> RateReport:
    """Rates from SINRs ``gamma`` (L, K); the CP factor is ``1 / (L + L_CP)``."""
    gamma = np.asarray(gamma, dtype=float)
    per_l = np.log2(1.0 + gamma)
    factor = 1.0 / (L + cp_length)
    per_user = factor * per_l.sum(axis=0)
    return RateReport(gamma, per_user, float(per_user.sum()), float(per_l.sum()))
