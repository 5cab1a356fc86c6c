"""
Reference configuration searches run on the same fitness as the swarm:
flat, random, greedy coordinate descent, exhaustive enumeration, and a
continuous PSO whose phases are quantized before every evaluation.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import power as pw
from .channel import incident_phases, reflected_phases
from .link import effective_gains_batch, rzf_batch, sinr, spectral_efficiency
from .palloc import Tolerances
from .ris import (RisConfig, cascade_tensor, cascaded_channels, initial_phases,
                  phase_codebook, quantize_phase)
from .swarm import DEFAULT_BANDWIDTH, FitnessEvaluator, SwarmParams, optimize

DEFAULT_EXHAUSTIVE_CAP = 2 ** 20
GREEDY_MAX_PASSES = 10

# constriction-factor PSO constants
CPSO_INERTIA = 0.7298
CPSO_ACCEL = 1.49618


@dataclass(frozen=True)
class RunContext:
    """Everything a search needs besides the scenario and channels."""
    power_model: pw.PowerModel
    method: pw.ReconfigMethod
    resolution_bits: int
    tol: Tolerances = field(default_factory=Tolerances)
    bandwidth: float = DEFAULT_BANDWIDTH
    scenario_id: str = ""
    drop_seed: int = 0
    p_t_max_dbm: float = 25.0

    def evaluator(self, channels):
        return FitnessEvaluator(channels, self.power_model, self.method, self.resolution_bits,
                                self.tol, self.bandwidth)


@dataclass
class ResultRow:
    scenario_id: str
    drop_seed: int
    method: str
    N: int
    R_b: int
    p_t_max_dbm: float
    optimizer_name: str
    ee_bits_per_joule: float
    se_bps_hz: float
    total_power_w: float
    p_elem_w: float
    sum_p_tx_w: float
    pso_steps: int
    palloc_outer_iters: int
    wall_time_s: float
    kind: str = "detail"
    status: str = "ok"
    config: RisConfig = field(default=None, repr=False, compare=False)


def make_row(ctx, channels, name, states, p, outer, steps, wall):
    """Assemble a ResultRow, recomputing SE and power from ``states`` and ``p``."""
    n, m, k = channels.shape
    config = RisConfig(np.asarray(states).reshape(-1), ctx.resolution_bits)
    hr = cascaded_channels(config.flat[None, :], ctx.resolution_bits, cascade_tensor(channels),
                           k, m)
    omega, ok = rzf_batch(hr, channels.noise_power)
    zeta = effective_gains_batch(hr, omega)[0] if ok[0] else np.zeros((k, k))
    se = spectral_efficiency(sinr(zeta, p, channels.noise_power))
    br = pw.breakdown(config, ctx.method, ctx.power_model, k, p)
    ee = ctx.bandwidth * se / br.total
    return ResultRow(scenario_id=ctx.scenario_id, drop_seed=int(ctx.drop_seed),
                     method=ctx.method.value, N=n, R_b=ctx.resolution_bits,
                     p_t_max_dbm=float(ctx.p_t_max_dbm), optimizer_name=name,
                     ee_bits_per_joule=float(ee), se_bps_hz=float(se),
                     total_power_w=float(br.total), p_elem_w=float(br.elem),
                     sum_p_tx_w=float(np.sum(p)), pso_steps=int(steps),
                     palloc_outer_iters=int(outer), wall_time_s=float(wall), config=config)


def baseline_flat(scenario, channels, ctx):
    t0 = time.perf_counter()
    states = np.zeros((1, scenario.n_elements), dtype=np.int64)
    _, p, outer = ctx.evaluator(channels)(states)
    return make_row(ctx, channels, "flat", states[0], p[0], outer[0], 0,
                    time.perf_counter() - t0)


def baseline_random(scenario, channels, rng, ctx, n_samples=1):
    """Best of ``n_samples`` uniformly random configurations (one by default)."""
    t0 = time.perf_counter()
    levels = 1 << ctx.resolution_bits
    states = rng.integers(0, levels, size=(n_samples, scenario.n_elements))
    ee, p, outer = ctx.evaluator(channels)(states)
    i = int(np.argmax(ee))
    return make_row(ctx, channels, "random", states[i], p[i], outer[i], 0,
                    time.perf_counter() - t0)


def greedy_search(n_elements, resolution_bits, evaluator, max_passes=GREEDY_MAX_PASSES):
    """Cyclic coordinate descent from the flat configuration.

    Each element is set to its best state given the others; an element only
    moves on strict improvement. Returns ``(states, ee, p, outer, passes)``.
    """
    levels = 1 << resolution_bits
    x = np.zeros(n_elements, dtype=np.int64)
    ee, p, outer = evaluator(x[None, :])
    best, best_p, best_outer = float(ee[0]), p[0], int(outer[0])
    passes = 0
    for passes in range(1, max_passes + 1):
        improved = False
        for n in range(n_elements):
            cand = np.repeat(x[None, :], levels, axis=0)
            cand[:, n] = np.arange(levels)
            ee, p, outer = evaluator(cand)
            j = int(np.argmax(ee))
            if ee[j] > best:
                x = cand[j]
                best, best_p, best_outer = float(ee[j]), p[j], int(outer[j])
                improved = True
        if not improved:
            break
    return x, best, best_p, best_outer, passes


def baseline_greedy(scenario, channels, ctx, max_passes=GREEDY_MAX_PASSES):
    t0 = time.perf_counter()
    x, _, p, outer, _ = greedy_search(scenario.n_elements, ctx.resolution_bits,
                                      ctx.evaluator(channels), max_passes)
    return make_row(ctx, channels, "greedy", x, p, outer, 0, time.perf_counter() - t0)


def enumerate_states(n_elements, resolution_bits, start, stop):
    """Rows ``start..stop-1`` of the mixed-radix enumeration (element 0 most significant)."""
    levels = 1 << resolution_bits
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n_elements), dtype=np.int64)
    for n in range(n_elements - 1, -1, -1):
        out[:, n] = idx % levels
        idx //= levels
    return out


def exhaustive_search(n_elements, resolution_bits, evaluator, cap=DEFAULT_EXHAUSTIVE_CAP,
                      chunk=4096):
    """Global optimum by enumeration. Returns ``(states, ee, p, outer, n_evaluated)``.

    Ties keep the first configuration in enumeration order.
    """
    total = (1 << resolution_bits) ** n_elements
    if total > cap:
        raise ValueError(f"exhaustive search needs {total} evaluations, above the cap of {cap}")
    best = (None, -np.inf, None, 0)
    for start in range(0, total, chunk):
        states = enumerate_states(n_elements, resolution_bits, start, min(total, start + chunk))
        ee, p, outer = evaluator(states)
        i = int(np.argmax(ee))
        if ee[i] > best[1]:
            best = (states[i].copy(), float(ee[i]), p[i].copy(), int(outer[i]))
    return (*best, total)


def baseline_exhaustive(scenario, channels, ctx, cap=DEFAULT_EXHAUSTIVE_CAP):
    t0 = time.perf_counter()
    x, _, p, outer, _ = exhaustive_search(scenario.n_elements, ctx.resolution_bits,
                                          ctx.evaluator(channels), cap)
    return make_row(ctx, channels, "exhaustive", x, p, outer, 0, time.perf_counter() - t0)


def cpso_search(scenario, evaluator, params, rng, vmax=np.pi / 2):
    """Continuous PSO over phases with constriction constants.

    Initial phases follow the same knowledge-based superposition as the
    integer swarm, left unquantized. Returns ``(states, ee, p, outer)``.
    """
    book = phase_codebook(evaluator.resolution_bits)
    two_pi = 2.0 * np.pi
    ph_in, ph_re = incident_phases(scenario), reflected_phases(scenario)
    theta = np.stack([np.mod(initial_phases(scenario, rng, i == 0, params.weight_std,
                                            ph_in, ph_re), two_pi)
                      for i in range(params.n_particles)])
    vel = rng.uniform(-vmax, vmax, size=theta.shape)

    def evaluate(t):
        s = quantize_phase(t, book)
        return (s, *evaluator(s))

    states, ee, p, outer = evaluate(theta)
    pm, pm_ee = theta.copy(), ee.copy()
    g = int(np.argmax(ee))
    gm, best = theta[g].copy(), (states[g].copy(), float(ee[g]), p[g].copy(), int(outer[g]))
    for _ in range(params.n_steps):
        r1 = rng.random(theta.shape)
        r2 = rng.random(theta.shape)
        # shortest signed angular differences keep the attraction on the circle
        dp = np.angle(np.exp(1j * (pm - theta)))
        dg = np.angle(np.exp(1j * (gm[None, :] - theta)))
        vel = np.clip(CPSO_INERTIA * vel + CPSO_ACCEL * r1 * dp + CPSO_ACCEL * r2 * dg,
                      -vmax, vmax)
        theta = np.mod(theta + vel, two_pi)
        states, ee, p, outer = evaluate(theta)
        better = ee > pm_ee
        pm[better], pm_ee[better] = theta[better], ee[better]
        g = int(np.argmax(ee))
        if ee[g] > best[1]:
            gm = theta[g].copy()
            best = (states[g].copy(), float(ee[g]), p[g].copy(), int(outer[g]))
    return best


def baseline_cpso(scenario, channels, params, rng, ctx):
    t0 = time.perf_counter()
    x, _, p, outer = cpso_search(scenario, ctx.evaluator(channels), params, rng)
    return make_row(ctx, channels, "cpso", x, p, outer, params.n_steps,
                    time.perf_counter() - t0)


def run_pso(scenario, channels, params, ctx):
    t0 = time.perf_counter()
    res = optimize(scenario, channels, params, ctx.power_model, ctx.method,
                   ctx.resolution_bits, ctx.tol, ctx.bandwidth, evaluator=ctx.evaluator(channels))
    return make_row(ctx, channels, "integer_pso", res.best_config.flat, res.best_alloc,
                    res.best_outer_iters, params.n_steps, time.perf_counter() - t0), res


__all__ = ["RunContext", "ResultRow", "make_row", "baseline_flat", "baseline_random",
           "baseline_greedy", "baseline_exhaustive", "baseline_cpso", "run_pso",
           "greedy_search", "exhaustive_search", "cpso_search", "enumerate_states",
           "SwarmParams"]
