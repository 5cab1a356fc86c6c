"""RZF precoding, effective gains, SINR, spectral and energy efficiency."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Precoder:
    matrix: np.ndarray  # (M, K), unit Frobenius norm
    regularization: float


@dataclass(frozen=True, eq=False)
class LinkReport:
    sinr: np.ndarray
    se: float
    ee: float
    bandwidth: float


def _rzf_unnormalized(h, kappa):
    """Unnormalized RZF for stacked channels ``h`` of shape (..., K, M)."""
    k, m = h.shape[-2:]
    hh = np.conj(np.swapaxes(h, -1, -2))  # (..., M, K)
    if k <= m:
        gram = h @ hh + kappa * np.eye(k)
        # hh @ inv(gram) == (inv(gram)^H @ h)^H and gram is Hermitian
        return np.conj(np.swapaxes(np.linalg.solve(gram, h), -1, -2))
    gram = hh @ h + kappa * np.eye(m)
    return np.linalg.solve(gram, hh)


def rzf_precoder(h_ris, noise_power, k_users=None):
    """Regularized zero-forcing precoder normalized to unit Frobenius norm.

    ``kappa = K * noise_power``; the ``K <= M`` (user-side inverse) form is
    used on the boundary ``K == M``.
    """
    h = np.atleast_2d(np.asarray(h_ris, dtype=complex))
    if not np.all(np.isfinite(h)):
        raise ValueError("channel must be finite")
    k = h.shape[0] if k_users is None else int(k_users)
    if k != h.shape[0]:
        raise ValueError("k_users disagrees with channel rows")
    kappa = k * noise_power
    omega = _rzf_unnormalized(h, kappa)
    norm = np.linalg.norm(omega)
    if not norm > 0 or not np.isfinite(norm):
        raise ValueError("RZF normalization is singular (zero channel)")
    return Precoder(omega / norm, kappa)


def rzf_batch(h, noise_power):
    """RZF for stacked channels ``(B, K, M)``.

    Returns ``(omega, ok)`` where ``omega`` is ``(B, M, K)`` and ``ok`` flags
    rows whose normalization was well defined; failed rows are zero.
    """
    h = np.asarray(h, dtype=complex)
    kappa = h.shape[-2] * noise_power
    omega = _rzf_unnormalized(h, kappa)
    norm = np.sqrt((np.abs(omega) ** 2).sum(axis=(-2, -1)))
    ok = np.isfinite(norm) & (norm > 0)
    safe = np.where(ok, norm, 1.0)
    omega = np.where(ok[:, None, None], omega / safe[:, None, None], 0.0)
    return omega, ok


def effective_gains(h_ris, precoder):
    """``zeta[k, j] = |h_{ris,k} omega_j|^2``."""
    omega = precoder.matrix if isinstance(precoder, Precoder) else precoder
    return np.abs(np.atleast_2d(h_ris) @ omega) ** 2


def effective_gains_batch(h, omega):
    return np.abs(h @ omega) ** 2


def sinr(zeta, p, noise_power):
    zeta = np.asarray(zeta, dtype=float)
    p = np.asarray(p, dtype=float)
    signal = np.diagonal(zeta) * p
    interference = zeta @ p - signal
    return signal / (interference + noise_power)


def spectral_efficiency(sinr_values):
    return float(np.sum(np.log2(1.0 + np.asarray(sinr_values, dtype=float))))


def energy_efficiency(se, bandwidth, total_power):
    if not total_power > 0:
        raise ValueError("total power must be positive")
    return bandwidth * se / total_power


def link_report(zeta, p, noise_power, total_power, bandwidth):
    g = sinr(zeta, p, noise_power)
    se = spectral_efficiency(g)
    return LinkReport(sinr=g, se=se, ee=energy_efficiency(se, bandwidth, total_power),
                      bandwidth=bandwidth)
