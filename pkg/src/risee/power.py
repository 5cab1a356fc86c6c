"""
Power consumption model of the FBS + RIS + UE system.

All values are in watts. ``PowerModel.from_table`` converts the usual
dBm / mW configuration keys once.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .units import dbm_to_watt


class ReconfigMethod(enum.Enum):
    PIN = "pin"
    VARACTOR = "varactor"
    RF_SWITCH = "rf_switch"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"pin": cls.PIN, "varactor": cls.VARACTOR, "rf_switch": cls.RF_SWITCH,
                   "rfswitch": cls.RF_SWITCH, "switch": cls.RF_SWITCH}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown reconfiguration method {value!r}") from None


@dataclass(frozen=True)
class PowerModel:
    p_fbs: float = 1.0
    p_ue: float = 0.01
    p_controller: float = 10e-3
    p_dc_varactor: float = 4e-3
    p_dc_pin_switch: float = 0.01e-3
    p_pin: float = 1.25e-3
    p_switch: float = 0.5e-3
    amplifier_efficiency: float = 0.8
    p_t_max: float = float(dbm_to_watt(25.0))

    def __post_init__(self):
        for name in ("p_fbs", "p_ue", "p_controller", "p_dc_varactor", "p_dc_pin_switch",
                     "p_pin", "p_switch", "p_t_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.amplifier_efficiency <= 1.0:
            raise ValueError("amplifier efficiency must lie in (0, 1]")

    @property
    def xi(self):
        return 1.0 / self.amplifier_efficiency

    @classmethod
    def from_table(cls, p_fbs_dbm=30.0, p_ue_dbm=10.0, p_controller_mw=10.0,
                   p_dc_varactor_mw=4.0, p_dc_pin_switch_mw=0.01, p_pin_mw=1.25,
                   p_switch_mw=0.5, nu=0.8, p_t_max_dbm=25.0):
        return cls(p_fbs=float(dbm_to_watt(p_fbs_dbm)), p_ue=float(dbm_to_watt(p_ue_dbm)),
                   p_controller=p_controller_mw * 1e-3, p_dc_varactor=p_dc_varactor_mw * 1e-3,
                   p_dc_pin_switch=p_dc_pin_switch_mw * 1e-3, p_pin=p_pin_mw * 1e-3,
                   p_switch=p_switch_mw * 1e-3, amplifier_efficiency=nu,
                   p_t_max=float(dbm_to_watt(p_t_max_dbm)))

    def driver_power_per_element(self, method):
        method = ReconfigMethod.parse(method)
        return self.p_dc_varactor if method is ReconfigMethod.VARACTOR else self.p_dc_pin_switch


@dataclass(frozen=True)
class PowerBreakdown:
    fixed: float
    elem: float
    driver: float
    controller: float
    transmit_drain: float
    total: float


def popcount(states):
    """Number of set bits of each non-negative integer state."""
    s = np.asarray(states, dtype=np.uint64)
    count = np.zeros(s.shape, dtype=np.int64)
    while np.any(s):
        count += (s & np.uint64(1)).astype(np.int64)
        s = s >> np.uint64(1)
    return count


def _states_and_bits(config):
    return np.asarray(config.states), config.resolution_bits


def element_power(config, method, model):
    """Power dissipated by the reconfigurable elements themselves."""
    method = ReconfigMethod.parse(method)
    states, rb = _states_and_bits(config)
    if method is ReconfigMethod.PIN:
        return model.p_pin * float(popcount(states).sum())
    if method is ReconfigMethod.VARACTOR:
        return 0.0
    return states.size * rb * model.p_switch


def element_power_batch(states, resolution_bits, method, model):
    """``element_power`` for flat state rows ``(B, N)``; returns ``(B,)``."""
    method = ReconfigMethod.parse(method)
    states = np.atleast_2d(states)
    if method is ReconfigMethod.PIN:
        return model.p_pin * popcount(states).sum(axis=1).astype(float)
    if method is ReconfigMethod.VARACTOR:
        return np.zeros(states.shape[0])
    return np.full(states.shape[0], states.shape[1] * resolution_bits * model.p_switch)


def driver_power(n_elements, method, model):
    return n_elements * model.driver_power_per_element(method)


def ris_power(config, method, model):
    """Controller + per-element drivers + element dissipation."""
    n = np.asarray(config.states).size
    return model.p_controller + driver_power(n, method, model) + element_power(config, method, model)


def fixed_power(k_users, ris_power, model):
    """Configuration-dependent but transmit-power-independent consumption."""
    if k_users < 1:
        raise ValueError("at least one user required")
    return model.p_fbs + ris_power + k_users * model.p_ue


def total_power(fixed, p, xi, elem=0.0, driver=0.0, controller=0.0):
    """Total consumption ``fixed + xi * sum(p)`` with its breakdown.

    ``elem``, ``driver`` and ``controller`` are carried into the breakdown
    for reporting only; they are already part of ``fixed``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("transmit powers must be non-negative")
    drain = xi * float(p.sum())
    return PowerBreakdown(fixed=fixed, elem=elem, driver=driver, controller=controller,
                          transmit_drain=drain, total=fixed + drain)


def breakdown(config, method, model, k_users, p):
    """Full breakdown for a configuration and a transmit power vector."""
    n = np.asarray(config.states).size
    elem = element_power(config, method, model)
    driver = driver_power(n, method, model)
    fixed = fixed_power(k_users, model.p_controller + driver + elem, model)
    return total_power(fixed, p, model.xi, elem=elem, driver=driver, controller=model.p_controller)
