import csv
import dataclasses

import numpy as np
import pytest

from risee import baselines as bl
from risee.cli import main
from risee.harness import (DETAIL_COLUMNS, ExperimentConfig, check_row, drop_seed, make_drop,
                           mean_ee, run_job, run_sweep, summarize, write_results)
from risee.power import PowerModel, ReconfigMethod
from risee.ris import flat_config, phase_codebook
from risee.swarm import FitnessEvaluator, SwarmParams, fitness

MODEL = PowerModel.from_table()
PIN, VAR, SW = ReconfigMethod.PIN, ReconfigMethod.VARACTOR, ReconfigMethod.RF_SWITCH
SMALL = ExperimentConfig(M=2, K=2, N=(4,))
QUICK = SwarmParams.scaled(n_particles=20, n_steps=20)

# upper 1% point of the chi-square law with 3 degrees of freedom
CHI2_3DOF_99 = 11.345


def ctx_for(method=SW, rb=1):
    return bl.RunContext(MODEL, method, rb)


class TestFlat:
    def test_zero_popcount(self):
        sc, ch = make_drop(SMALL, 16, 0)
        row = bl.baseline_flat(sc, ch, ctx_for(PIN))
        assert row.p_elem_w == 0.0
        assert row.config == flat_config(4, 1)
        assert row.ee_bits_per_joule == pytest.approx(
            fitness(flat_config(4, 1), ch, MODEL, PIN)[0], rel=1e-9)

    def test_deterministic(self):
        sc, ch = make_drop(SMALL, 16, 1)
        a = bl.baseline_flat(sc, ch, ctx_for(VAR))
        b = bl.baseline_flat(sc, ch, ctx_for(VAR))
        assert a.ee_bits_per_joule == b.ee_bits_per_joule

    def test_optimizer_beats_flat(self):
        wins = 0
        for d in range(20):
            sc, ch = make_drop(SMALL, 16, d)
            ctx = ctx_for(PIN)
            pso, _ = bl.run_pso(sc, ch, dataclasses.replace(QUICK, seed=d), ctx)
            wins += pso.ee_bits_per_joule >= bl.baseline_flat(sc, ch, ctx).ee_bits_per_joule
        assert wins >= 19


class TestRandom:
    def test_uniform_states(self):
        sc, ch = make_drop(SMALL, 4, 0)
        rng = np.random.default_rng(0)
        counts = np.zeros(4)
        ctx = ctx_for(SW, 2)
        for _ in range(2500):
            row = bl.baseline_random(sc, ch, rng, ctx)
            counts += np.bincount(row.config.flat, minlength=4)
        expected = counts.sum() / 4
        assert ((counts - expected) ** 2 / expected).sum() < CHI2_3DOF_99

    def test_within_exhaustive_range(self):
        sc, ch = make_drop(SMALL, 4, 2)
        ctx = ctx_for()
        ee_all = ctx.evaluator(ch)(bl.enumerate_states(4, 1, 0, 16))[0]
        rng = np.random.default_rng(5)
        seen = set()
        for _ in range(40):
            row = bl.baseline_random(sc, ch, rng, ctx)
            assert ee_all.min() * (1 - 1e-9) <= row.ee_bits_per_joule <= ee_all.max() * (1 + 1e-9)
            seen.add(tuple(row.config.flat))
        assert len(seen) > 8

    def test_deterministic(self):
        sc, ch = make_drop(SMALL, 16, 3)
        a = bl.baseline_random(sc, ch, np.random.default_rng(4), ctx_for(), n_samples=5)
        b = bl.baseline_random(sc, ch, np.random.default_rng(4), ctx_for(), n_samples=5)
        assert a.config == b.config and a.ee_bits_per_joule == b.ee_bits_per_joule


class TestGreedyExhaustive:
    def test_single_element(self):
        cfg = dataclasses.replace(SMALL, N=(1,))
        sc, ch = make_drop(cfg, 1, 0)
        ctx = ctx_for(PIN, 3)
        g = bl.baseline_greedy(sc, ch, ctx)
        e = bl.baseline_exhaustive(sc, ch, ctx)
        assert g.config == e.config
        assert g.ee_bits_per_joule == pytest.approx(e.ee_bits_per_joule, rel=1e-12)

    def test_ordering_on_drops(self):
        for d in range(20):
            sc, ch = make_drop(SMALL, 4, d)
            ctx = ctx_for()
            ex = bl.baseline_exhaustive(sc, ch, ctx).ee_bits_per_joule
            gr = bl.baseline_greedy(sc, ch, ctx).ee_bits_per_joule
            fl = bl.baseline_flat(sc, ch, ctx).ee_bits_per_joule
            pso = bl.run_pso(sc, ch, dataclasses.replace(QUICK, seed=d), ctx)[0].ee_bits_per_joule
            rd = bl.baseline_random(sc, ch, np.random.default_rng(d), ctx).ee_bits_per_joule
            top = ex * (1 + 1e-9)
            assert fl * (1 - 1e-12) <= gr <= top
            assert pso <= top and rd <= top and fl <= top

    def test_evaluation_counts(self):
        _, ch = make_drop(SMALL, 4, 0)
        for rb, total in ((1, 16), (2, 256)):
            ev = FitnessEvaluator(ch, MODEL, SW, rb)
            *_, n = bl.exhaustive_search(4, rb, ev)
            assert n == total and ev.count == total

    def test_enumeration_order(self):
        s = bl.enumerate_states(3, 1, 0, 8)
        assert s[1].tolist() == [0, 0, 1] and s[4].tolist() == [1, 0, 0]
        assert len({tuple(r) for r in bl.enumerate_states(2, 2, 0, 16)}) == 16

    def test_cap(self):
        _, ch = make_drop(SMALL, 16, 0)
        with pytest.raises(ValueError, match="cap"):
            bl.exhaustive_search(16, 2, FitnessEvaluator(ch, MODEL, SW, 2), cap=2 ** 20)


class TestCpso:
    def test_fine_codebook_agrees_with_integer_pso(self):
        cfg = dataclasses.replace(SMALL, N=(9,))
        for d in range(10):
            sc, ch = make_drop(cfg, 9, d)
            ctx = ctx_for(VAR, 10)
            p = SwarmParams(seed=d)
            pso, _ = bl.run_pso(sc, ch, p, ctx)
            cp = bl.baseline_cpso(sc, ch, p, np.random.default_rng(d), ctx)
            assert cp.ee_bits_per_joule == pytest.approx(pso.ee_bits_per_joule, rel=0.02)

    def test_deterministic_and_valid(self):
        sc, ch = make_drop(SMALL, 9, 0)
        p = SwarmParams.scaled(8, 6)
        a = bl.baseline_cpso(sc, ch, p, np.random.default_rng(1), ctx_for(PIN, 3))
        b = bl.baseline_cpso(sc, ch, p, np.random.default_rng(1), ctx_for(PIN, 3))
        assert a.config == b.config and a.ee_bits_per_joule == b.ee_bits_per_joule
        assert a.config.resolution_bits == 3 and a.config.flat.max() < 8
        assert phase_codebook(3).size == 8


class TestConfig:
    def test_table_defaults(self):
        c = ExperimentConfig()
        assert (c.M, c.K, c.carrier_frequency_hz, c.n_drops) == (8, 4, 5.25e9, 20)
        assert c.N == (100, 400, 900)
        assert c.power_model(25.0).p_t_max == pytest.approx(MODEL.p_t_max)

    def test_rejects(self):
        with pytest.raises(ValueError):
            ExperimentConfig(N=(99,))
        with pytest.raises(ValueError):
            ExperimentConfig(n_drops=0)
        with pytest.raises(ValueError):
            ExperimentConfig(optimizers=("annealing",))
        with pytest.raises(ValueError):
            ExperimentConfig.from_mapping({"bogus": 1})

    def test_yaml_roundtrip(self, tmp_path):
        c = ExperimentConfig(N=(16, 25), R_b=(1, 2), master_seed=7, optimizers=("flat",))
        c.save(tmp_path / "c.yaml")
        assert ExperimentConfig.load(tmp_path / "c.yaml") == c

    def test_full_flag(self, tmp_path):
        (tmp_path / "f.yaml").write_text("full_scale: true\nmaster_seed: 3\n")
        c = ExperimentConfig.load(tmp_path / "f.yaml")
        assert c.n_drops == 200 and max(c.N) == 3600 and c.R_b == tuple(range(1, 11))

    def test_resolution_grid(self):
        c = ExperimentConfig(N=(900,), R_b=tuple(range(1, 11)))
        t = c.tuples()
        assert len(t) == 30
        assert {(m, rb) for m, _, rb, _ in t} == {(m, rb) for m in ("pin", "varactor",
                                                                   "rf_switch")
                                                  for rb in range(1, 11)}

    def test_drop_seed_stable(self):
        assert drop_seed(0, 0) == drop_seed(0, 0)
        assert drop_seed(0, 1) != drop_seed(0, 0) != drop_seed(1, 0)


def tiny(**kw):
    base = dict(M=2, K=2, N=(4,), methods=("pin",), n_drops=1, n_particles=5, n_steps=4)
    base.update(kw)
    return ExperimentConfig(**base)


class TestSweep:
    def test_two_rows(self):
        rows = run_sweep(tiny())
        assert [r.kind for r in rows] == ["detail", "summary"]
        assert rows[1].ee_bits_per_joule == rows[0].ee_bits_per_joule
        assert rows[1].status == "ok 1/1"

    def test_rows_consistent(self):
        cfg = tiny(methods=("pin", "varactor", "rf_switch"), n_drops=2,
                   optimizers=("integer_pso", "flat", "random", "greedy", "exhaustive", "cpso"))
        rows = run_sweep(cfg)
        detail = [r for r in rows if r.kind == "detail"]
        assert len(detail) == 3 * 2 * 6
        assert all(r.status == "ok" for r in detail)
        assert all(check_row(r, cfg.bandwidth_hz) for r in detail)
        for m in cfg.methods:
            ex = mean_ee(rows, method=m, optimizer_name="exhaustive")
            for o in cfg.optimizers:
                assert mean_ee(rows, method=m, optimizer_name=o) <= ex * (1 + 1e-9)

    def test_common_random_numbers(self):
        cfg = tiny(methods=("pin", "rf_switch"))
        a = run_job(cfg, 0, 0)[0]
        b = run_job(cfg, 1, 0)[0]
        assert a.drop_seed == b.drop_seed

    def test_failure_recorded(self):
        rows = run_sweep(tiny(N=(16,), R_b=(2,), optimizers=("exhaustive", "flat"),
                              exhaustive_cap=100))
        detail = [r for r in rows if r.kind == "detail"]
        assert detail[0].status.startswith("error: ValueError")
        assert detail[1].status == "ok"
        summ = [r for r in rows if r.kind == "summary"]
        assert summ[0].status == "ok 0/1" and np.isnan(summ[0].ee_bits_per_joule)

    def test_identical_bytes(self, tmp_path):
        cfg = tiny(methods=("pin", "varactor"), n_drops=2, optimizers=("integer_pso", "random"))
        a = write_results(tmp_path / "a", run_sweep(cfg))
        b = write_results(tmp_path / "b", run_sweep(cfg, workers=2))
        for name in ("detail", "summary"):
            assert open(a[name], "rb").read() == open(b[name], "rb").read()

    def test_csv_layout(self, tmp_path):
        paths = write_results(tmp_path, run_sweep(tiny()))
        with open(paths["detail"], newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == DETAIL_COLUMNS and len(rows) == 2
        with open(paths["timing"], newline="") as fh:
            timing = list(csv.reader(fh))
        assert timing[0] == ["scenario_id", "drop_seed", "optimizer_name", "wall_time_s"]
        assert float(timing[1][3]) >= 0

    def test_summarize_means(self):
        rows = [r for r in run_sweep(tiny(n_drops=3)) if r.kind == "detail"]
        (s,) = summarize(rows)
        assert s.ee_bits_per_joule == pytest.approx(np.mean([r.ee_bits_per_joule for r in rows]))


class TestCli:
    def test_sweep(self, tmp_path, capsys):
        tiny().save(tmp_path / "c.yaml")
        assert main(["sweep", str(tmp_path / "c.yaml"), str(tmp_path / "out"),
                     "--drops", "2", "--seed", "4"]) == 0
        with open(tmp_path / "out" / "detail.csv", newline="") as fh:
            assert len(list(csv.reader(fh))) == 3
        assert "detail.csv" in capsys.readouterr().out

    def test_missing_config(self, tmp_path):
        assert main(["sweep", str(tmp_path / "nope.yaml"), str(tmp_path)]) == 2

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "--sizes", "2", "--drops", "2",
                     "--out", str(tmp_path / "v.csv")]) == 0
        assert "frac_ge_95" in capsys.readouterr().out
        assert (tmp_path / "v.csv").read_text().startswith("side,")

    def test_converge(self, tmp_path):
        assert main(["converge", str(tmp_path), "--n", "16", "--rb", "2", "--methods", "pin",
                     "--particles", "5", "--steps", "6"]) == 0
        lines = (tmp_path / "swarm_pin.csv").read_text().splitlines()
        assert len(lines) == 1 + 8
        assert (tmp_path / "palloc_pin.csv").read_text().startswith("n,t,eta,J,sum_p,rho")

    def test_oracle(self, capsys):
        assert main(["oracle", "--instances", "4", "--points", "61"]) == 0
        assert "worst shortfall" in capsys.readouterr().out
