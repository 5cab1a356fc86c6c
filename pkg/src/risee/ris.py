"""
Discrete RIS phase codebooks, configurations, and cascaded channels.

A configuration is an integer state grid; state ``i`` of an ``R_b``-bit
element applies the phase ``2*pi/2**R_b * (i + 1/2)``.
"""

from dataclasses import dataclass

import numpy as np

from .channel import incident_phases, reflected_phases

MAX_RESOLUTION_BITS = 16
DEFAULT_WEIGHT_STD = 0.25


@dataclass(frozen=True, eq=False)
class PhaseCodebook:
    resolution_bits: int
    phases: np.ndarray

    @property
    def size(self):
        return self.phases.shape[0]

    @property
    def step(self):
        return 2.0 * np.pi / self.size


def phase_codebook(resolution_bits):
    if int(resolution_bits) != resolution_bits or not 1 <= resolution_bits <= MAX_RESOLUTION_BITS:
        raise ValueError(f"resolution must be an integer in [1, {MAX_RESOLUTION_BITS}]")
    n = 1 << int(resolution_bits)
    phases = 2.0 * np.pi / n * (np.arange(n) + 0.5)
    phases.setflags(write=False)
    return PhaseCodebook(int(resolution_bits), phases)


def quantize_phase(theta, codebook):
    """Index of the codeword circularly nearest to ``theta``; ties go to the lower index.

    Works element-wise on arrays.
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("phase must be finite")
    n = codebook.size
    # position on the circle in units of the codebook step, codeword i sits at u == i
    u = np.mod(theta, 2.0 * np.pi) / codebook.step - 0.5
    lo = np.floor(u)
    frac = u - lo
    lo_idx = np.mod(lo, n).astype(np.int64)
    hi_idx = np.mod(lo + 1, n).astype(np.int64)
    out = np.where(frac < 0.5, lo_idx, hi_idx)
    tie = frac == 0.5
    out = np.where(tie, np.minimum(lo_idx, hi_idx), out)
    return out if out.ndim else int(out)


class RisConfig:
    """Integer phase-state grid of a square RIS.

    Parameters
    ----------
    states : array_like of int, shape (n_side, n_side) or (N,)
        Flat input is reshaped row-major into a square.
    resolution_bits : int
    amplitude : float
        Common reflection amplitude ``beta`` in (0, 1].
    """

    __slots__ = ("states", "resolution_bits", "amplitude")

    def __init__(self, states, resolution_bits, amplitude=1.0):
        states = np.asarray(states)
        if states.ndim == 1:
            side = int(round(np.sqrt(states.size)))
            if side * side != states.size:
                raise ValueError("flat state vector length must be a perfect square")
            states = states.reshape(side, side)
        if states.ndim != 2 or states.shape[0] != states.shape[1]:
            raise ValueError("state grid must be square")
        if not np.issubdtype(states.dtype, np.integer):
            if not np.all(states == np.round(states)):
                raise ValueError("states must be integers")
        states = states.astype(np.int64)
        if int(resolution_bits) != resolution_bits or not 1 <= resolution_bits <= MAX_RESOLUTION_BITS:
            raise ValueError("invalid resolution")
        if states.size and (states.min() < 0 or states.max() >= (1 << int(resolution_bits))):
            raise ValueError("state out of range for resolution")
        if not 0.0 < amplitude <= 1.0:
            raise ValueError("amplitude must lie in (0, 1]")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "resolution_bits", int(resolution_bits))
        object.__setattr__(self, "amplitude", float(amplitude))

    def __setattr__(self, name, value):
        raise AttributeError("RisConfig is immutable")

    def __eq__(self, other):
        if not isinstance(other, RisConfig):
            return NotImplemented
        return (self.resolution_bits == other.resolution_bits
                and self.amplitude == other.amplitude
                and np.array_equal(self.states, other.states))

    def __hash__(self):
        return hash((self.states.tobytes(), self.states.shape, self.resolution_bits, self.amplitude))

    def __repr__(self):
        return f"RisConfig(N={self.n_elements}, Rb={self.resolution_bits})"

    @property
    def n_elements(self):
        return self.states.size

    @property
    def flat(self):
        return self.states.ravel()

    def to_text(self):
        lines = [f"{self.n_elements} {self.resolution_bits}"]
        lines += [" ".join(str(int(v)) for v in row) for row in self.states]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, amplitude=1.0):
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n, rb = int(rows[0][0]), int(rows[0][1])
        states = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64)
        if states.size != n:
            raise ValueError("element count in header does not match the grid")
        return cls(states, rb, amplitude)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path, amplitude=1.0):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), amplitude)


def flat_config(n_side, resolution_bits, amplitude=1.0):
    return RisConfig(np.zeros((n_side, n_side), dtype=np.int64), resolution_bits, amplitude)


def beamform_vector(config):
    book = phase_codebook(config.resolution_bits)
    return config.amplitude * np.exp(1j * book.phases[config.flat])


def cascade_tensor(channels):
    """``A[n, k*M + m] = h_{r,k}[n] * G[n, m]`` so that ``phi @ A`` gives all cascaded rows."""
    n, m, k = channels.shape
    return np.ascontiguousarray(channels.reflecting_matrices().transpose(1, 0, 2).reshape(n, k * m))


def cascaded_channel(config, channels):
    """``H_ris`` (K x M): row k is ``phi^T diag(h_{r,k}) G``."""
    n, m, k = channels.shape
    if config.n_elements != n:
        raise ValueError(f"configuration has {config.n_elements} elements, channel has {n}")
    phi = beamform_vector(config)
    return np.einsum("n,kn,nm->km", phi, channels.reflected, channels.incident)


def cascaded_channels(states, resolution_bits, tensor, k, m, amplitude=1.0):
    """Batched ``H_ris`` for flat state rows ``states`` (B, N); returns (B, K, M)."""
    book = phase_codebook(resolution_bits)
    phis = amplitude * np.exp(1j * book.phases[np.asarray(states)])
    return (phis @ tensor).reshape(-1, k, m)


def initial_phases(scenario, rng=None, uniform=True, weight_std=DEFAULT_WEIGHT_STD,
                   phase_in=None, phase_re=None):
    """Continuous knowledge-based start phases (length N, unwrapped).

    Averages the incident phase profiles over FBS antennas and the reflected
    profiles over users, each profile scaled by a Gaussian weight of mean 1
    (exactly 1 when ``uniform``). ``rng`` draws M incident weights, then K
    reflected weights.
    """
    if phase_in is None:
        phase_in = incident_phases(scenario)      # (N, M)
    if phase_re is None:
        phase_re = reflected_phases(scenario)     # (K, N)
    m = phase_in.shape[1]
    k = phase_re.shape[0]
    if uniform:
        r_in, r_re = np.ones(m), np.ones(k)
    else:
        r_in = rng.normal(1.0, weight_std, size=m)
        r_re = rng.normal(1.0, weight_std, size=k)
    return phase_in @ r_in / m + r_re @ phase_re / k


def initial_config(scenario, weights_rng=None, uniform=True, resolution_bits=1,
                   weight_std=DEFAULT_WEIGHT_STD, amplitude=1.0):
    theta = initial_phases(scenario, weights_rng, uniform, weight_std)
    states = quantize_phase(theta, phase_codebook(resolution_bits))
    return RisConfig(np.asarray(states).reshape(scenario.ris.shape), resolution_bits, amplitude)
