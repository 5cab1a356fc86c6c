"""Unit conversions and physical constants shared across the package."""

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def wavelength(frequency_hz):
    """Free-space wavelength in meters for a carrier frequency in Hz."""
    if frequency_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / frequency_hz
