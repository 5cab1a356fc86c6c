"""
Monte Carlo sweeps over (method, N, R_b, P_t^max) tuples.

Seeds
-----
Geometry and channels of drop ``d`` come from ``SeedSequence([master_seed, d])``,
so every tuple sees the same placements (common random numbers). Optimizer
randomness for tuple ``t`` and drop ``d`` comes from
``SeedSequence([master_seed, t, d])``; the random baseline uses
``SeedSequence([master_seed, t, d, 1])``.
"""

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import baselines as bl
from .channel import RicianParams, synthesize_channels
from .palloc import Tolerances
from .power import PowerModel, ReconfigMethod
from .scene import Region, drop_scenario
from .swarm import SwarmParams
from .units import dbm_to_watt

OPTIMIZERS = ("integer_pso", "flat", "random", "greedy", "exhaustive", "cpso")

DETAIL_COLUMNS = ("kind", "scenario_id", "drop_seed", "method", "N", "R_b", "p_t_max_dbm",
                  "optimizer_name", "ee_bits_per_joule", "se_bps_hz", "total_power_w",
                  "p_elem_w", "sum_p_tx_w", "pso_steps", "palloc_outer_iters", "status")
TIMING_COLUMNS = ("scenario_id", "drop_seed", "optimizer_name", "wall_time_s")

FULL_N_LIST = (100, 400, 900, 1600, 2500, 3600)
FULL_RB_LIST = tuple(range(1, 11))


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 8
    N: tuple = (100, 400, 900)
    K: int = 4
    carrier_frequency_hz: float = 5.25e9
    ris_spacing_wl: float = 0.25
    fbs_spacing_wl: float = 0.5
    R_b: tuple = (1,)
    region_x: tuple = (4.0, 6.0)
    region_y: tuple = (-8.0, 8.0)
    region_z: tuple = (-8.0, 8.0)
    epsilon_h: float = 5.0
    epsilon_G: float = 5.0
    p_fbs_dbm: float = 30.0
    p_ue_dbm: float = 10.0
    p_controller_mw: float = 10.0
    p_dc_varactor_mw: float = 4.0
    p_dc_pin_switch_mw: float = 0.01
    p_pin_mw: float = 1.25
    p_switch_mw: float = 0.5
    nu: float = 0.8
    p_t_max_dbm: tuple = (25.0,)
    bandwidth_hz: float = 10e6
    noise_dbm: float = -94.0
    path_loss_exponent: float = 2.0
    methods: tuple = ("pin", "varactor", "rf_switch")
    n_drops: int = 20
    master_seed: int = 0
    n_particles: int = 100
    n_steps: int = 100
    eps_outer: float = 1e-6
    eps_inner: float = 1e-8
    max_outer: int = 100
    max_inner: int = 5000
    optimizers: tuple = ("integer_pso",)
    random_samples: int = 1
    exhaustive_cap: int = bl.DEFAULT_EXHAUSTIVE_CAP

    def __post_init__(self):
        for name in ("N", "R_b", "p_t_max_dbm", "methods", "optimizers",
                     "region_x", "region_y", "region_z"):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        for n in self.N:
            side = math.isqrt(int(n))
            if side * side != n or n < 1:
                raise ValueError(f"N={n} is not a perfect square")
        if self.n_drops < 1:
            raise ValueError("n_drops must be at least 1")
        for m in self.methods:
            ReconfigMethod.parse(m)
        for o in self.optimizers:
            if o not in OPTIMIZERS:
                raise ValueError(f"unknown optimizer {o!r}; choose from {OPTIMIZERS}")

    @classmethod
    def full(cls, **overrides):
        """Full-scale setup: 200 drops, N up to 60x60, R_b 1..10."""
        base = dict(N=FULL_N_LIST, R_b=FULL_RB_LIST, n_drops=200)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        full = data.pop("full_scale", False)
        return cls.full(**data) if full else cls.from_mapping(data)

    def to_mapping(self):
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in dataclasses.fields(self)}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_mapping(), fh, sort_keys=False)

    # derived objects
    def power_model(self, p_t_max_dbm):
        return PowerModel.from_table(self.p_fbs_dbm, self.p_ue_dbm, self.p_controller_mw,
                                     self.p_dc_varactor_mw, self.p_dc_pin_switch_mw,
                                     self.p_pin_mw, self.p_switch_mw, self.nu, p_t_max_dbm)

    def region(self):
        return Region(self.region_x, self.region_y, self.region_z)

    def tolerances(self):
        return Tolerances(eps_outer=self.eps_outer, eps_inner=self.eps_inner,
                          max_outer=self.max_outer, max_inner=self.max_inner)

    def tuples(self):
        """(method, N, R_b, P_t^max) in sweep order."""
        return [(m, n, rb, pt) for n in self.N for rb in self.R_b for pt in self.p_t_max_dbm
                for m in self.methods]


def drop_seed(master_seed, drop):
    return int(np.random.SeedSequence([master_seed, drop]).generate_state(1)[0])


def make_drop(cfg, n, drop):
    """Scenario and channels for drop index ``drop`` at RIS size ``n``."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, drop]))
    scenario = drop_scenario(math.isqrt(n), cfg.M, cfg.K, cfg.carrier_frequency_hz, rng,
                             cfg.region(), cfg.ris_spacing_wl, cfg.fbs_spacing_wl)
    channels = synthesize_channels(scenario, RicianParams(cfg.epsilon_h, cfg.epsilon_G),
                                   float(dbm_to_watt(cfg.noise_dbm)), rng,
                                   cfg.path_loss_exponent, drop_seed(cfg.master_seed, drop))
    return scenario, channels


def _failed_row(ctx, n, name, err):
    nan = float("nan")
    return bl.ResultRow(ctx.scenario_id, int(ctx.drop_seed), ctx.method.value, n,
                        ctx.resolution_bits, float(ctx.p_t_max_dbm), name, nan, nan, nan, nan,
                        nan, 0, 0, 0.0, status=f"error: {type(err).__name__}: {err}")


def run_job(cfg, tuple_index, drop):
    """All selected optimizers on one (tuple, drop) pair."""
    method, n, rb, pt = cfg.tuples()[tuple_index]
    ctx = bl.RunContext(cfg.power_model(pt), ReconfigMethod.parse(method), rb,
                        cfg.tolerances(), cfg.bandwidth_hz, scenario_id=f"t{tuple_index:04d}",
                        drop_seed=drop_seed(cfg.master_seed, drop), p_t_max_dbm=pt)
    seq = np.random.SeedSequence([cfg.master_seed, tuple_index, drop])
    opt_seed = int(seq.generate_state(1)[0])
    params = SwarmParams.scaled(cfg.n_particles, cfg.n_steps, seed=opt_seed)
    rows = []
    try:
        scenario, channels = make_drop(cfg, n, drop)
    except Exception as err:  # noqa: BLE001 - recorded per row, sweep continues
        return [_failed_row(ctx, n, name, err) for name in cfg.optimizers]
    for name in cfg.optimizers:
        try:
            if name == "integer_pso":
                row, _ = bl.run_pso(scenario, channels, params, ctx)
            elif name == "flat":
                row = bl.baseline_flat(scenario, channels, ctx)
            elif name == "random":
                rng = np.random.default_rng(
                    np.random.SeedSequence([cfg.master_seed, tuple_index, drop, 1]))
                row = bl.baseline_random(scenario, channels, rng, ctx, cfg.random_samples)
            elif name == "greedy":
                row = bl.baseline_greedy(scenario, channels, ctx)
            elif name == "exhaustive":
                row = bl.baseline_exhaustive(scenario, channels, ctx, cfg.exhaustive_cap)
            else:
                row = bl.baseline_cpso(scenario, channels, params,
                                       np.random.default_rng(opt_seed), ctx)
        except Exception as err:  # noqa: BLE001
            row = _failed_row(ctx, n, name, err)
        row.config = None
        rows.append(row)
    return rows


def compare_small(side, n_drops, master_seed=0, method="rf_switch", p_t_max_dbm=25.0,
                  resolution_bits=1):
    """Integer PSO, exhaustive, greedy and random EE on small RIS drops (M=K=2).

    Returns a dict of per-drop EE arrays keyed by optimizer name.
    """
    cfg = ExperimentConfig(M=2, K=2, N=(side * side,), methods=(method,),
                           master_seed=master_seed)
    ctx = bl.RunContext(cfg.power_model(p_t_max_dbm), ReconfigMethod.parse(method),
                        resolution_bits, p_t_max_dbm=p_t_max_dbm)
    out = {k: [] for k in ("integer_pso", "exhaustive", "greedy", "random")}
    for d in range(n_drops):
        scenario, channels = make_drop(cfg, side * side, d)
        seq = np.random.SeedSequence([master_seed, side, d])
        pso, _ = bl.run_pso(scenario, channels, SwarmParams(seed=int(seq.generate_state(1)[0])),
                            ctx)
        rows = (pso, bl.baseline_exhaustive(scenario, channels, ctx),
                bl.baseline_greedy(scenario, channels, ctx),
                bl.baseline_random(scenario, channels, np.random.default_rng(seq.spawn(1)[0]),
                                   ctx))
        for row in rows:
            out[row.optimizer_name].append(row.ee_bits_per_joule)
    return {k: np.array(v) for k, v in out.items()}


def _run_job_packed(args):
    return run_job(*args)


MEAN_FIELDS = ("ee_bits_per_joule", "se_bps_hz", "total_power_w", "p_elem_w", "sum_p_tx_w",
               "palloc_outer_iters", "wall_time_s")


def summarize(rows):
    """One mean row per (scenario_id, optimizer_name) over successful drops."""
    groups = {}
    for r in rows:
        groups.setdefault((r.scenario_id, r.optimizer_name), []).append(r)
    out = []
    for (sid, name), members in groups.items():
        ok = [r for r in members if r.status == "ok"]
        first = members[0]
        means = {f: (float(np.mean([getattr(r, f) for r in ok])) if ok else float("nan"))
                 for f in MEAN_FIELDS}
        out.append(bl.ResultRow(
            scenario_id=sid, drop_seed=-1, method=first.method, N=first.N, R_b=first.R_b,
            p_t_max_dbm=first.p_t_max_dbm, optimizer_name=name,
            ee_bits_per_joule=means["ee_bits_per_joule"], se_bps_hz=means["se_bps_hz"],
            total_power_w=means["total_power_w"], p_elem_w=means["p_elem_w"],
            sum_p_tx_w=means["sum_p_tx_w"], pso_steps=first.pso_steps,
            palloc_outer_iters=int(round(means["palloc_outer_iters"])) if ok else 0,
            wall_time_s=means["wall_time_s"], kind="summary",
            status=f"ok {len(ok)}/{len(members)}"))
    return out


def run_sweep(cfg, workers=1):
    """Detail rows in (tuple, drop) order followed by the per-tuple summary rows."""
    jobs = [(cfg, t, d) for t in range(len(cfg.tuples())) for d in range(cfg.n_drops)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job_packed, jobs))
    else:
        results = [run_job(*j) for j in jobs]
    detail = [r for rows in results for r in rows]
    return detail + summarize(detail)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in columns])


def write_results(out_dir, rows):
    """Write detail.csv, summary.csv (deterministic) and timing.csv (wall clock)."""
    os.makedirs(out_dir, exist_ok=True)
    detail = [r for r in rows if r.kind == "detail"]
    summary = [r for r in rows if r.kind == "summary"]
    paths = {name: os.path.join(out_dir, f"{name}.csv") for name in ("detail", "summary", "timing")}
    write_csv(paths["detail"], detail, DETAIL_COLUMNS)
    write_csv(paths["summary"], summary, DETAIL_COLUMNS)
    write_csv(paths["timing"], detail, TIMING_COLUMNS)
    return paths


def check_row(row, bandwidth, rel=1e-9):
    """EE consistency ``ee == BW * se / total_power``."""
    if row.status != "ok" or row.kind != "detail":
        return True
    return math.isclose(row.ee_bits_per_joule, bandwidth * row.se_bps_hz / row.total_power_w,
                        rel_tol=rel, abs_tol=0.0)


def mean_ee(rows, **match):
    vals = [r.ee_bits_per_joule for r in rows
            if r.kind == "detail" and r.status == "ok"
            and all(getattr(r, k) == v for k, v in match.items())]
    return float(np.mean(vals)) if vals else float("nan")


__all__ = ["ExperimentConfig", "run_sweep", "run_job", "make_drop", "summarize", "write_results",
           "write_csv", "check_row", "mean_ee", "drop_seed", "compare_small", "OPTIMIZERS"]
