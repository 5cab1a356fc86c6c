"""
Scene geometry: RIS element grid, FBS antenna array, UE drops, and the
near-field region test.

Coordinates are plain ``(n, 3)`` float arrays in meters. The RIS lies in
the x=0 plane centred at the origin and spans y (columns) and z (rows);
the FBS array is a line along y. Element order is row-major everywhere.
"""

from dataclasses import dataclass, field

import numpy as np

from .units import wavelength as _wavelength


@dataclass(frozen=True, eq=False)
class ElementGrid:
    coordinates: np.ndarray  # (rows*cols, 3)
    spacing: float
    shape: tuple

    def __post_init__(self):
        coords = np.asarray(self.coordinates, dtype=float).reshape(-1, 3)
        if coords.shape[0] != self.shape[0] * self.shape[1]:
            raise ValueError("coordinate count does not match grid shape")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coordinates", coords)

    def __len__(self):
        return self.coordinates.shape[0]

    @property
    def center(self):
        return self.coordinates.mean(axis=0)


@dataclass(frozen=True, eq=False)
class Region:
    x_range: tuple
    y_range: tuple
    z_range: tuple

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"invalid region interval [{lo}, {hi}]")

    @property
    def bounds(self):
        return (tuple(self.x_range), tuple(self.y_range), tuple(self.z_range))

    @property
    def low(self):
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def high(self):
        return np.array([b[1] for b in self.bounds], dtype=float)

    def contains(self, points, atol=1e-12):
        points = np.atleast_2d(points)
        return bool(np.all(points >= self.low - atol) and np.all(points <= self.high + atol))

    def shrink(self, dx=0.0, dy=0.0, dz=0.0):
        """Region with each axis narrowed by the given margin on both sides."""
        out = []
        for (lo, hi), d in zip(self.bounds, (dx, dy, dz)):
            lo2, hi2 = lo + d, hi - d
            if lo2 > hi2:
                mid = 0.5 * (lo + hi)
                lo2 = hi2 = mid
            out.append((lo2, hi2))
        return Region(*out)


#: Deployment slab of Table I style setups (meters).
DEFAULT_REGION = Region((4.0, 6.0), (-8.0, 8.0), (-8.0, 8.0))


@dataclass(frozen=True, eq=False)
class Scenario:
    ris: ElementGrid
    fbs: ElementGrid
    ues: np.ndarray  # (K, 3)
    carrier_frequency: float
    wavelength: float = field(default=None)

    def __post_init__(self):
        lam = _wavelength(self.carrier_frequency)
        if self.wavelength is None:
            object.__setattr__(self, "wavelength", lam)
        elif abs(self.wavelength - lam) > 1e-9 * lam:
            raise ValueError("wavelength inconsistent with carrier frequency")
        ues = np.asarray(self.ues, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(ues)):
            raise ValueError("UE coordinates must be finite")
        ues.setflags(write=False)
        object.__setattr__(self, "ues", ues)

    @property
    def n_elements(self):
        return len(self.ris)

    @property
    def n_antennas(self):
        return len(self.fbs)

    @property
    def n_users(self):
        return self.ues.shape[0]


def build_ris_grid(n_side, spacing):
    """Square ``n_side`` x ``n_side`` RIS in the x=0 plane, centred at the origin.

    Row ``r`` maps to z and column ``c`` to y; flattening is row-major.
    """
    if int(n_side) != n_side or n_side < 1:
        raise ValueError("n_side must be a positive integer")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n_side = int(n_side)
    offsets = (np.arange(n_side) - (n_side - 1) / 2.0) * spacing
    zz, yy = np.meshgrid(offsets[::-1], offsets, indexing="ij")
    coords = np.column_stack([np.zeros(n_side * n_side), yy.ravel(), zz.ravel()])
    return ElementGrid(coords, float(spacing), (n_side, n_side))


def build_fbs_array(center, m, spacing):
    """Uniform linear array of ``m`` antennas along y centred at ``center``."""
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    m = int(m)
    center = np.asarray(center, dtype=float).reshape(3)
    offsets = (np.arange(m) - (m - 1) / 2.0) * spacing
    coords = np.tile(center, (m, 1))
    coords[:, 1] += offsets
    return ElementGrid(coords, float(spacing), (1, m))


def sample_positions(region, count, rng):
    """``count`` points drawn uniformly from ``region``; shape ``(count, 3)``."""
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    return rng.uniform(region.low, region.high, size=(int(count), 3))


def aperture_length(grid, mode="diagonal"):
    """Largest element-to-element distance of ``grid``.

    ``mode="side"`` returns the longest grid side instead, i.e.
    ``(max(rows, cols) - 1) * spacing``.
    """
    coords = grid.coordinates if isinstance(grid, ElementGrid) else np.asarray(grid, float)
    if coords.shape[0] == 0:
        raise ValueError("empty grid")
    if mode == "side":
        return (max(grid.shape) - 1) * grid.spacing
    if mode != "diagonal":
        raise ValueError(f"unknown aperture mode {mode!r}")
    best = 0.0
    for start in range(0, coords.shape[0], 512):
        block = coords[start:start + 512]
        d2 = ((block[:, None, :] - coords[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def fraunhofer_distance(aperture, wavelength):
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if aperture < 0:
        raise ValueError("aperture must be non-negative")
    return 2.0 * aperture ** 2 / wavelength


def near_field_criterion(ris_aperture, wavelength, r1, r2):
    """True when the cascaded FBS-RIS-UE path is inside the RIS Fresnel region."""
    if r1 <= 0 or r2 <= 0:
        raise ValueError("distances must be positive")
    return fraunhofer_distance(ris_aperture, wavelength) >= r1 * r2 / (r1 + r2)


def drop_scenario(n_side, m, k, carrier_frequency, rng, region=DEFAULT_REGION,
                  ris_spacing_wl=0.25, fbs_spacing_wl=0.5):
    """One random placement of the FBS array and ``k`` UEs inside ``region``.

    The FBS centre is drawn from the region shrunk by half the array length
    along y so that every antenna stays inside the region.
    """
    lam = _wavelength(carrier_frequency)
    ris = build_ris_grid(n_side, ris_spacing_wl * lam)
    half = 0.5 * (m - 1) * fbs_spacing_wl * lam
    center = sample_positions(region.shrink(dy=half), 1, rng)[0]
    fbs = build_fbs_array(center, m, fbs_spacing_wl * lam)
    ues = sample_positions(region, k, rng)
    return Scenario(ris=ris, fbs=fbs, ues=ues, carrier_frequency=carrier_frequency)
