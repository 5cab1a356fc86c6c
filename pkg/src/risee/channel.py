"""
Near-field Rician channel synthesis.

The LoS part of every link is built element by element from exact
transmitter/receiver distances (spherical wavefronts), attenuated by the
free-space basic transmission loss. NLoS scattering is i.i.d. unit-variance
complex Gaussian scaled by the same per-element amplitude as the LoS term.
"""

from dataclasses import dataclass

import numpy as np

from .units import dbm_to_watt

#: -104 dBm thermal noise over 10 MHz plus a 10 dB noise figure.
DEFAULT_NOISE_DBM = -94.0
CHANNEL_DUMP_VERSION = 1


@dataclass(frozen=True)
class RicianParams:
    epsilon_h: float = 5.0
    epsilon_G: float = 5.0

    def __post_init__(self):
        if not (self.epsilon_h >= 0 and self.epsilon_G >= 0):
            raise ValueError("Rician factors must be non-negative")


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One channel realization.

    Attributes
    ----------
    incident : (N, M) complex
        FBS -> RIS matrix ``G``.
    reflected : (K, N) complex
        Row ``k`` is ``h_{r,k}``.
    noise_power : float
        Receiver noise power in watts, common to all users.
    realization_seed : int
    """
    incident: np.ndarray
    reflected: np.ndarray
    noise_power: float
    realization_seed: int = 0

    def __post_init__(self):
        G = np.asarray(self.incident, dtype=complex)
        h = np.atleast_2d(np.asarray(self.reflected, dtype=complex))
        if G.ndim != 2 or h.shape[1] != G.shape[0]:
            raise ValueError("incident/reflected dimensions disagree")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValueError("channel entries must be finite")
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        object.__setattr__(self, "incident", G)
        object.__setattr__(self, "reflected", h)

    @property
    def shape(self):
        """(N, M, K)"""
        return (self.incident.shape[0], self.incident.shape[1], self.reflected.shape[0])

    def reflecting_matrices(self):
        """``H_k = diag(h_{r,k}) G`` stacked as ``(K, N, M)``."""
        return self.reflected[:, :, None] * self.incident[None, :, :]


def pairwise_distance(a, b):
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def distance_matrix(rx, tx):
    """Distances between every receive point (rows) and transmit point (cols)."""
    rx = np.atleast_2d(np.asarray(rx, float))
    tx = np.atleast_2d(np.asarray(tx, float))
    return np.sqrt(((rx[:, None, :] - tx[None, :, :]) ** 2).sum(axis=-1))


def phase_response(distance, wavelength):
    if np.any(np.asarray(wavelength) <= 0):
        raise ValueError("wavelength must be positive")
    return 2.0 * np.pi * np.asarray(distance, dtype=float) / wavelength


def path_loss(distance, wavelength, exponent=2.0):
    """Linear power attenuation ``alpha`` of a LoS link.

    With the default exponent this is the free-space loss ``(4 pi d / lambda)^2``;
    other exponents keep the 1 m free-space intercept and scale as ``d**exponent``.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss undefined at zero distance")
    if exponent == 2.0:
        return (4.0 * np.pi * d / wavelength) ** 2
    return (4.0 * np.pi / wavelength) ** 2 * d ** exponent


def _los(dist, wavelength, exponent):
    if np.any(dist <= 0):
        raise ValueError("coincident transmit and receive elements")
    amp = 1.0 / np.sqrt(path_loss(dist, wavelength, exponent))
    return amp * np.exp(-1j * phase_response(dist, wavelength)), amp


def los_incident_matrix(fbs, ris, wavelength, exponent=2.0):
    """LoS FBS -> RIS matrix, shape ``(N, M)``."""
    dist = distance_matrix(ris.coordinates, fbs.coordinates)
    return _los(dist, wavelength, exponent)[0]


def los_reflected_vector(ris, ue, wavelength, exponent=2.0):
    """LoS RIS -> UE vector, length ``N``."""
    dist = distance_matrix(ris.coordinates, np.reshape(ue, (1, 3)))[:, 0]
    return _los(dist, wavelength, exponent)[0]


def rician_weights(factor):
    """(LoS weight, NLoS weight); the squares sum to one."""
    if factor < 0:
        raise ValueError("Rician factor must be non-negative")
    if np.isinf(factor):
        return 1.0, 0.0
    return np.sqrt(factor / (factor + 1.0)), np.sqrt(1.0 / (factor + 1.0))


def rician_combine(los, rician_factor, pathloss_amplitudes, rng):
    """Mix a LoS array with i.i.d. CN(0, 1) scattering of the same shape.

    The scattering draw is always consumed from ``rng`` so that the stream
    position does not depend on the Rician factor.
    """
    w_los, w_nlos = rician_weights(rician_factor)
    los = np.asarray(los, dtype=complex)
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    if w_nlos == 0.0:
        return los.copy()
    return w_los * los + w_nlos * np.asarray(pathloss_amplitudes) * nlos


def incident_phases(scenario):
    """Unwrapped LoS phases FBS -> RIS, ``(N, M)``."""
    return phase_response(distance_matrix(scenario.ris.coordinates, scenario.fbs.coordinates),
                          scenario.wavelength)


def reflected_phases(scenario):
    """Unwrapped LoS phases RIS -> UE, ``(K, N)``."""
    return phase_response(distance_matrix(scenario.ues, scenario.ris.coordinates),
                          scenario.wavelength)


def synthesize_channels(scenario, params, noise_power, rng, exponent=2.0, seed=0):
    """Draw one ``ChannelSet`` for ``scenario``.

    ``rng`` is consumed in a fixed order: the incident scattering first, then
    one reflected vector per user.
    """
    lam = scenario.wavelength
    dist_g = distance_matrix(scenario.ris.coordinates, scenario.fbs.coordinates)
    los_g, amp_g = _los(dist_g, lam, exponent)
    G = rician_combine(los_g, params.epsilon_G, amp_g, rng)

    dist_h = distance_matrix(scenario.ues, scenario.ris.coordinates)
    los_h, amp_h = _los(dist_h, lam, exponent)
    h = np.empty_like(los_h)
    for k in range(los_h.shape[0]):
        h[k] = rician_combine(los_h[k], params.epsilon_h, amp_h[k], rng)
    return ChannelSet(G, h, float(noise_power), int(seed))


def default_noise_power():
    return float(dbm_to_watt(DEFAULT_NOISE_DBM))


def save_channels(path, channels):
    """Write a ChannelSet to an ``.npz`` file (see README for the layout)."""
    n, m, k = channels.shape
    np.savez(path,
             format_version=np.int64(CHANNEL_DUMP_VERSION),
             header=np.array([n, m, k, channels.realization_seed], dtype=np.int64),
             noise_power=np.float64(channels.noise_power),
             incident=channels.incident,
             reflected=channels.reflected)


def load_channels(path):
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHANNEL_DUMP_VERSION:
            raise ValueError(f"unsupported channel dump version {version}")
        n, m, k, seed = (int(v) for v in data["header"])
        cs = ChannelSet(data["incident"], data["reflected"], float(data["noise_power"]), seed)
    if cs.shape != (n, m, k):
        raise ValueError("channel dump header does not match payload")
    return cs
