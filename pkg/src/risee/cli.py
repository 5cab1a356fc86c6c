"""Command line entry point: ``risee {sweep,validate,converge,oracle}``."""

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from .harness import (FULL_N_LIST, FULL_RB_LIST, ExperimentConfig, compare_small, make_drop,
                      run_sweep, write_results)
from .link import effective_gains, rzf_precoder
from .palloc import allocate_power
from .palloc import write_trace as write_alloc_trace
from .power import ReconfigMethod, fixed_power, ris_power
from .ris import cascaded_channel
from .swarm import SwarmParams, optimize, write_trace


def cmd_sweep(args):
    cfg = ExperimentConfig.load(args.config)
    if args.full:
        cfg = dataclasses.replace(cfg, N=FULL_N_LIST, R_b=FULL_RB_LIST, n_drops=200)
    if args.drops is not None:
        cfg = dataclasses.replace(cfg, n_drops=args.drops)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    rows = run_sweep(cfg, workers=args.workers)
    paths = write_results(args.out, rows)
    failed = sum(r.status != "ok" for r in rows if r.kind == "detail")
    for p in paths.values():
        print(p)
    if failed:
        print(f"{failed} detail rows failed; see the status column", file=sys.stderr)
        return 1
    return 0


def cmd_validate(args):
    """Small-scale comparison of integer PSO against exhaustive, greedy and random."""
    out_rows = []
    for side in args.sizes:
        res = compare_small(side, args.drops, args.seed, args.method, args.p_t_max_dbm)
        ratios = res["integer_pso"] / res["exhaustive"]
        line = {"side": side, "frac_ge_95": float(np.mean(ratios >= 0.95)),
                "min_ratio": float(ratios.min()),
                **{f"mean_{k}": float(v.mean()) for k, v in res.items()}}
        out_rows.append(line)
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in line.items()))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(out_rows[0]))
            w.writeheader()
            w.writerows(out_rows)
    return 0


def cmd_converge(args):
    """Swarm convergence traces (one CSV per method) and allocator traces."""
    os.makedirs(args.out, exist_ok=True)
    cfg = ExperimentConfig(N=(args.n,), R_b=(args.rb,), master_seed=args.seed)
    scenario, channels = make_drop(cfg, args.n, args.drop)
    for m in args.methods:
        method = ReconfigMethod.parse(m)
        params = SwarmParams.scaled(args.particles, args.steps, seed=args.seed)
        res = optimize(scenario, channels, params, cfg.power_model(cfg.p_t_max_dbm[0]), method,
                       args.rb)
        path = os.path.join(args.out, f"swarm_{method.value}.csv")
        write_trace(path, res)
        print(f"{path}: step0={res.step0_ee:.6g} final={res.best_ee:.6g}")
        # allocator trace on the swarm's best configuration
        model = cfg.power_model(cfg.p_t_max_dbm[0])
        h = cascaded_channel(res.best_config, channels)
        zeta = effective_gains(h, rzf_precoder(h, channels.noise_power))
        p_fixed = fixed_power(cfg.K, ris_power(res.best_config, method, model), model)
        st = allocate_power(zeta, channels.noise_power, p_fixed, model.xi, cfg.bandwidth_hz,
                            model.p_t_max, trace=True)
        path = os.path.join(args.out, f"palloc_{method.value}.csv")
        write_alloc_trace(path, st.trace)
        print(f"{path}: outer={st.outer_iter} eta={st.eta:.6g}")
    return 0


def grid_ee(zeta, noise, p_fixed, xi, bandwidth, p_t_max, points):
    """Best EE over a uniform grid of the simplex ``sum(p) <= p_t_max``."""
    k = zeta.shape[0]
    grid = np.linspace(0.0, p_t_max, points)
    rest = np.stack(np.meshgrid(*([grid] * (k - 1)), indexing="ij"), -1).reshape(-1, k - 1)
    best = -np.inf
    for first in grid:
        mesh = np.column_stack([np.full(rest.shape[0], first), rest])
        mesh = mesh[mesh.sum(1) <= p_t_max * (1 + 1e-12)]
        if not mesh.size:
            continue
        sig = np.diagonal(zeta)[None, :] * mesh
        se = np.log2(1 + sig / (mesh @ zeta.T - sig + noise)).sum(1)
        best = max(best, float((bandwidth * se / (p_fixed + xi * mesh.sum(1))).max()))
    return best


def cmd_oracle(args):
    """Allocator EE against a brute-force grid over the power simplex."""
    rng = np.random.default_rng(args.seed)
    model = ExperimentConfig().power_model(25.0)
    worst = 0.0
    for _ in range(args.instances):
        k = int(rng.integers(1, 4))
        zeta = rng.exponential(1e-9, size=(k, k))
        noise = 10 ** (-12.4)
        pf = 1.054
        st = allocate_power(zeta, noise, pf, model.xi, 1e7, model.p_t_max)
        ee_grid = grid_ee(zeta, noise, pf, model.xi, 1e7, model.p_t_max, args.points)
        worst = max(worst, (ee_grid - st.eta) / ee_grid)
    print(f"allocator: worst shortfall vs grid = {worst:.3e}")
    return 0 if worst <= 5e-3 else 1


def build_parser():
    p = argparse.ArgumentParser(
        prog="risee", description="Energy-efficiency simulator for RIS-assisted multiuser downlinks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a Monte Carlo sweep and write CSVs")
    s.add_argument("config", help="flat YAML config")
    s.add_argument("out", help="output directory")
    s.add_argument("--drops", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--full", action="store_true", help="full-scale N, R_b lists and 200 drops")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="small RIS comparison against exhaustive search")
    v.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    v.add_argument("--drops", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--method", default="rf_switch")
    v.add_argument("--p-t-max-dbm", type=float, default=25.0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("converge", help="write swarm convergence traces")
    c.add_argument("out")
    c.add_argument("--n", type=int, default=900)
    c.add_argument("--rb", type=int, default=3)
    c.add_argument("--methods", nargs="+", default=["pin", "varactor", "rf_switch"])
    c.add_argument("--particles", type=int, default=100)
    c.add_argument("--steps", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--drop", type=int, default=0)
    c.set_defaults(func=cmd_converge)

    o = sub.add_parser("oracle", help="brute-force allocator oracle")
    o.add_argument("--instances", type=int, default=20)
    o.add_argument("--points", type=int, default=201)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"risee: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
