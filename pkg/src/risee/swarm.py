"""
Integer particle swarm over discrete RIS configurations.

Every fitness evaluation runs the full downlink chain for the candidate
configuration: cascaded channel, RZF precoding, Dinkelbach-IQT power
allocation, and the configuration-dependent RIS power. The swarm is
synchronous: all particles move and are evaluated, then the global best is
refreshed.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import power as pw
from .link import effective_gains_batch, rzf_batch
from .palloc import Tolerances, allocate_power_batch
from .ris import (DEFAULT_WEIGHT_STD, RisConfig, cascade_tensor, cascaded_channels,
                  initial_phases, phase_codebook, quantize_phase)
from .channel import incident_phases, reflected_phases

#: (first step, last step, w, c1, c2, d1, d2)
DEFAULT_SCHEDULE = (
    (1, 65, 0.6, 1.0, 1.0, 0.6, 0.6),
    (66, 85, 0.4, 0.9, 1.1, 0.4, 0.4),
    (86, 100, 0.2, 0.8, 1.2, 0.1, 0.1),
)

DEFAULT_BANDWIDTH = 10e6


def velocity_bound(resolution_bits):
    return 1.0 if resolution_bits == 1 else 2.0 ** resolution_bits / 4.0


def scale_schedule(schedule, n_steps):
    """Stretch a schedule defined over ``schedule[-1][1]`` steps onto ``n_steps``."""
    total = schedule[-1][1]
    out = []
    prev = 0
    for i, (a, b, *coef) in enumerate(schedule):
        end = n_steps if i == len(schedule) - 1 else max(prev, int(round(b * n_steps / total)))
        if end > prev:
            out.append((prev + 1, end, *coef))
        prev = end
    return tuple(out)


@dataclass(frozen=True)
class SwarmParams:
    n_particles: int = 100
    n_steps: int = 100
    schedule: tuple = DEFAULT_SCHEDULE
    seed: int = 0
    weight_std: float = DEFAULT_WEIGHT_STD

    def __post_init__(self):
        if self.n_particles < 1 or self.n_steps < 0:
            raise ValueError("need at least one particle and a non-negative step count")
        if self.n_steps:
            expect = 1
            for a, b, *_ in self.schedule:
                if a != expect or b < a:
                    raise ValueError("schedule must cover steps contiguously from 1")
                expect = b + 1
            if expect - 1 < self.n_steps:
                raise ValueError("schedule does not cover every step")

    @classmethod
    def scaled(cls, n_particles=100, n_steps=100, seed=0, weight_std=DEFAULT_WEIGHT_STD):
        """Params whose schedule keeps the default proportions over ``n_steps``."""
        sched = scale_schedule(DEFAULT_SCHEDULE, n_steps) if n_steps else DEFAULT_SCHEDULE
        return cls(n_particles, n_steps, sched, seed, weight_std)


def step_params(step, params):
    """(w, c1, c2, d1, d2) in force at ``step`` (1-based)."""
    if not 1 <= step <= params.n_steps:
        raise ValueError(f"step {step} outside 1..{params.n_steps}")
    for a, b, *coef in params.schedule:
        if a <= step <= b:
            return tuple(coef)
    raise ValueError(f"no schedule entry for step {step}")


@dataclass(eq=False)
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    personal_best: np.ndarray
    personal_best_ee: float
    personal_best_alloc: np.ndarray


@dataclass(eq=False)
class SwarmResult:
    best_config: RisConfig
    best_ee: float
    best_alloc: np.ndarray
    trace: list            # running best EE; trace[0] is the best initial particle
    step0_ee: float        # uniform-weight starting configuration
    mean_trace: list = field(default_factory=list)
    best_outer_iters: int = 0
    evaluations: int = 0


class FitnessEvaluator:
    """Batched EE of candidate configurations on one channel realization.

    Identical rows within a batch are evaluated once.
    """

    def __init__(self, channels, power_model, method, resolution_bits,
                 tol=None, bandwidth=DEFAULT_BANDWIDTH, amplitude=1.0):
        self.channels = channels
        self.model = power_model
        self.method = pw.ReconfigMethod.parse(method)
        self.resolution_bits = int(resolution_bits)
        self.tol = tol or Tolerances()
        self.bandwidth = bandwidth
        self.amplitude = amplitude
        self.n, self.m, self.k = channels.shape
        self.tensor = cascade_tensor(channels)
        self.base_power = (power_model.p_fbs + power_model.p_controller
                           + pw.driver_power(self.n, self.method, power_model)
                           + self.k * power_model.p_ue)
        self.count = 0

    def fixed_power(self, states):
        return self.base_power + pw.element_power_batch(states, self.resolution_bits,
                                                        self.method, self.model)

    def __call__(self, states):
        """EE (bits/J), powers ``(B, K)`` and outer iteration counts for rows ``(B, N)``."""
        states = np.atleast_2d(np.asarray(states, dtype=np.int64))
        uniq, inverse = np.unique(states, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        ee, p, outer = self._evaluate(uniq)
        return ee[inverse], p[inverse], outer[inverse]

    def _evaluate(self, states):
        self.count += states.shape[0]
        h = cascaded_channels(states, self.resolution_bits, self.tensor, self.k, self.m,
                              self.amplitude)
        omega, ok = rzf_batch(h, self.channels.noise_power)
        zeta = effective_gains_batch(h, omega)
        zeta[~ok] = 0.0
        p, ee, outer, _ = allocate_power_batch(zeta, self.channels.noise_power,
                                               self.fixed_power(states), self.model.xi,
                                               self.bandwidth, self.model.p_t_max, self.tol)
        return ee, p, outer


def fitness(config, channels, power_model, method, tol=None, bandwidth=DEFAULT_BANDWIDTH):
    """(EE in bits/J, optimal power vector) of a single configuration."""
    ev = FitnessEvaluator(channels, power_model, method, config.resolution_bits, tol,
                          bandwidth, config.amplitude)
    ee, p, _ = ev(config.flat[None, :])
    return float(ee[0]), p[0]


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def velocity_update(velocity, position, personal_best, global_best, coefficients,
                    resolution_bits, rng):
    """New velocities for a stack of particles (rows).

    ``r1``/``r2`` are one uniform scalar per particle; the discard masks zero
    each element's attraction with probability ``d1``/``d2``.
    """
    w, c1, c2, d1, d2 = coefficients
    velocity = np.atleast_2d(velocity)
    position = np.atleast_2d(position)
    personal_best = np.atleast_2d(personal_best)
    n_p = velocity.shape[0]
    r1 = rng.random(n_p)[:, None]
    r2 = rng.random(n_p)[:, None]
    keep1 = rng.random(velocity.shape) >= d1
    keep2 = rng.random(velocity.shape) >= d2
    v = (w * velocity
         + c1 * r1 * keep1 * (personal_best - position)
         + c2 * r2 * keep2 * (np.asarray(global_best)[None, :] - position))
    bound = velocity_bound(resolution_bits)
    return np.clip(v, -bound, bound)


def position_update(position, velocity, resolution_bits):
    moved = round_half_away(np.asarray(position) + np.asarray(velocity)).astype(np.int64)
    return np.mod(moved, 1 << resolution_bits)


class Swarm:
    """Mutable swarm state; rows are particles, columns are RIS elements."""

    def __init__(self, positions, velocities, ee, alloc, outer):
        self.x = positions
        self.v = velocities
        self.ee = ee
        self.pm = positions.copy()
        self.pm_ee = ee.copy()
        self.pm_alloc = alloc.copy()
        best = int(np.argmax(ee))
        self.gm = positions[best].copy()
        self.gm_ee = float(ee[best])
        self.gm_alloc = alloc[best].copy()
        self.gm_outer = int(outer[best])

    def particles(self, shape):
        return [Particle(self.x[i].reshape(shape), self.v[i].reshape(shape),
                         self.pm[i].reshape(shape), float(self.pm_ee[i]), self.pm_alloc[i])
                for i in range(self.x.shape[0])]


def init_swarm(scenario, channels, params, power_model, method, resolution_bits,
               tol=None, bandwidth=DEFAULT_BANDWIDTH, rng=None, evaluator=None):
    """Build and evaluate the initial swarm.

    Particle 0 uses unit superposition weights (the step-0 configuration);
    the others draw Gaussian weights. Returns ``(swarm, evaluator, rng, step0_ee)``.
    """
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    ev = evaluator or FitnessEvaluator(channels, power_model, method, resolution_bits, tol,
                                       bandwidth)
    book = phase_codebook(resolution_bits)
    ph_in = incident_phases(scenario)
    ph_re = reflected_phases(scenario)
    n = scenario.n_elements
    x = np.empty((params.n_particles, n), dtype=np.int64)
    for i in range(params.n_particles):
        theta = initial_phases(scenario, rng, i == 0, params.weight_std, ph_in, ph_re)
        x[i] = quantize_phase(theta, book)
    bound = velocity_bound(resolution_bits)
    v = rng.uniform(-bound, bound, size=x.shape)
    ee, alloc, outer = ev(x)
    return Swarm(x, v, ee, alloc, outer), ev, rng, float(ee[0])


def optimize(scenario, channels, params, power_model, method, resolution_bits=1, tol=None,
             bandwidth=DEFAULT_BANDWIDTH, evaluator=None):
    """Run the integer PSO and return the best configuration found."""
    swarm, ev, rng, step0 = init_swarm(scenario, channels, params, power_model, method,
                                       resolution_bits, tol, bandwidth, evaluator=evaluator)
    trace = [swarm.gm_ee]
    mean_trace = [float(swarm.ee.mean())]
    for step in range(1, params.n_steps + 1):
        coef = step_params(step, params)
        swarm.v = velocity_update(swarm.v, swarm.x, swarm.pm, swarm.gm, coef, resolution_bits,
                                  rng)
        swarm.x = position_update(swarm.x, swarm.v, resolution_bits)
        ee, alloc, outer = ev(swarm.x)
        swarm.ee = ee
        better = ee > swarm.pm_ee
        swarm.pm[better] = swarm.x[better]
        swarm.pm_ee[better] = ee[better]
        swarm.pm_alloc[better] = alloc[better]
        best = int(np.argmax(ee))
        if ee[best] > swarm.gm_ee:
            swarm.gm = swarm.x[best].copy()
            swarm.gm_ee = float(ee[best])
            swarm.gm_alloc = alloc[best].copy()
            swarm.gm_outer = int(outer[best])
        trace.append(swarm.gm_ee)
        mean_trace.append(float(ee.mean()))
    config = RisConfig(swarm.gm.reshape(scenario.ris.shape), resolution_bits)
    return SwarmResult(best_config=config, best_ee=swarm.gm_ee, best_alloc=swarm.gm_alloc,
                       trace=trace, step0_ee=step0, mean_trace=mean_trace,
                       best_outer_iters=swarm.gm_outer, evaluations=ev.count)


def write_trace(path, result):
    """Convergence CSV: step 0 is the uniform-weight start, step 1 the initial swarm."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "best_ee", "mean_ee"])
        w.writerow([0, repr(result.step0_ee), repr(result.step0_ee)])
        for i, (b, m) in enumerate(zip(result.trace, result.mean_trace)):
            w.writerow([i + 1, repr(b), repr(m)])
