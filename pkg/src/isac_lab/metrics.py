"""Link metrics: user and eavesdropper SINR, secrecy rate, radar SCNR."""

from __future__ import annotations

import numpy as np

from .array import ArrayGeometry, steering_vector


def _columns(W):
    W = np.asarray(W, dtype=complex)
    return W[:, None] if W.ndim == 1 else W


def user_sinr(W, k: int, channels) -> float:
    """SINR of stream ``k`` at user ``k`` for beamformers ``W`` (columns)."""
    W = _columns(W)
    h = channels.user_channels[k]
    gains = np.abs(h.conj() @ W) ** 2
    interference = gains.sum() - gains[k]
    return float(gains[k] / (interference + channels.noise_power_user))


def user_sinr_cov(covariances, k: int, channels, h=None) -> float:
    """Covariance form of :func:`user_sinr`; ``h`` overrides the channel."""
    h = channels.user_channels[k] if h is None else h
    q = np.array([np.real(h.conj() @ R @ h) for R in covariances])
    return float(q[k] / (q.sum() - q[k] + channels.noise_power_user))


def eve_sinr(W_or_covs, k: int, eve_channel, noise_power: float) -> float:
    """SINR of stream ``k`` at the eavesdropper.

    Accepts beamformer columns (2-D array) or a list of covariance matrices.
    """
    g = np.asarray(eve_channel, dtype=complex)
    if isinstance(W_or_covs, (list, tuple)):
        q = np.array([np.real(g.conj() @ R @ g) for R in W_or_covs])
    else:
        q = np.abs(g.conj() @ _columns(W_or_covs)) ** 2
    return float(q[k] / (q.sum() - q[k] + noise_power))


def secrecy_rate(sinr_user: float, sinr_eve: float) -> float:
    """``max(0, log2(1 + sinr_user) - log2(1 + sinr_eve))`` in bit/s/Hz."""
    if sinr_user < 0 or sinr_eve < 0:
        raise ValueError("SINR values must be nonnegative")
    return max(0.0, float(np.log2(1 + sinr_user) - np.log2(1 + sinr_eve)))


def scnr(R_total, geometry: ArrayGeometry, target_angle: float, target_gain, clutter,
         noise_power: float) -> float:
    """Echo signal-to-clutter-plus-noise ratio at the radar receiver.

    ``|alpha|^2 a_t^H R a_t / (sum_c |alpha_c|^2 a_c^H R a_c + noise)``;
    ``clutter`` is a list of ``(angle, gain)`` pairs.
    """
    R = np.asarray(R_total, dtype=complex)

    def radiated(angle):
        a = steering_vector(geometry, angle)
        return float(np.real(a.conj() @ R @ a))

    signal = abs(target_gain) ** 2 * radiated(target_angle)
    clutter_power = sum(abs(g) ** 2 * radiated(ang) for ang, g in clutter)
    return signal / (clutter_power + noise_power)
