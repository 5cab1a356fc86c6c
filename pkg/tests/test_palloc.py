import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risee.link import energy_efficiency, sinr, spectral_efficiency
from risee.palloc import (INNER_NOT_CONVERGED, THETA, BisectionError, Tolerances,
                          allocate_power, allocate_power_batch, dinkelbach_eta, gamma_update,
                          iqt_solve, lagrangian_gradient, objective_J, p_update, solve_rho,
                          write_trace, y_update)

from oracles import (BW, MODEL, NOISE, P_FIXED, central_diff, ee_points, lagrangian_ld,
                     random_gains, simplex_grid_ee)

XI, PMAX = MODEL.xi, MODEL.p_t_max


def instances(seed, count, users=(1, 2, 3, 4)):
    rng = np.random.default_rng(seed)
    for i in range(count):
        yield random_gains(rng, users[i % len(users)])


class TestObjective:
    def test_eta_zero_is_rate(self, rng):
        z = random_gains(rng, 3)
        p = np.array([0.05, 0.1, 0.02])
        se = spectral_efficiency(sinr(z, p, NOISE))
        assert objective_J(p, 0.0, z, NOISE, P_FIXED, XI, BW) == pytest.approx(BW * se)

    def test_zero_power(self, rng):
        z = random_gains(rng, 2)
        assert objective_J(np.zeros(2), 3e6, z, NOISE, P_FIXED, XI, BW) == pytest.approx(
            -3e6 * P_FIXED)

    def test_root_identity(self, rng):
        z = random_gains(rng, 3)
        p = np.array([0.1, 0.05, 0.08])
        eta = dinkelbach_eta(p, z, NOISE, P_FIXED, XI, BW)
        assert abs(objective_J(p, eta, z, NOISE, P_FIXED, XI, BW)) <= 1e-6 * BW

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            objective_J([-0.1], 0.0, [[1.0]], NOISE, P_FIXED, XI, BW)


class TestDinkelbachEta:
    def test_zero_power(self, rng):
        assert dinkelbach_eta(np.zeros(2), random_gains(rng, 2), NOISE, P_FIXED, XI, BW) == 0.0

    def test_unit_sinr(self):
        z = np.array([[2e-9]])
        p = NOISE / 2e-9
        assert dinkelbach_eta([p], z, NOISE, P_FIXED, XI, BW) == pytest.approx(
            BW / (P_FIXED + XI * p), rel=1e-12)

    def test_matches_composition(self):
        for z in instances(3, 20):
            k = z.shape[0]
            p = np.random.default_rng(k).uniform(0, PMAX / k, k)
            se = spectral_efficiency(sinr(z, p, NOISE))
            want = energy_efficiency(se, BW, P_FIXED + XI * p.sum())
            assert dinkelbach_eta(p, z, NOISE, P_FIXED, XI, BW) == pytest.approx(want, rel=1e-12)


class TestGammaY:
    @given(st.integers(1, 5), st.integers(0, 2 ** 31))
    @settings(max_examples=50, deadline=None)
    def test_gamma_is_sinr(self, k, seed):
        r = np.random.default_rng(seed)
        z = r.exponential(1e-9, (k, k))
        p = r.uniform(0, 0.1, k)
        np.testing.assert_allclose(gamma_update(p, z, NOISE), sinr(z, p, NOISE), rtol=1e-13)

    def test_zero_power(self, rng):
        z = random_gains(rng, 3)
        assert np.all(gamma_update(np.zeros(3), z, NOISE) == 0)
        assert np.all(y_update(np.zeros(3), np.zeros(3), z, NOISE) == 0)

    def test_symmetric_gamma(self):
        z = np.array([[3e-9, 1e-10], [1e-10, 3e-9]])
        g = gamma_update([0.1, 0.1], z, NOISE)
        assert g[0] == g[1]

    def test_single_user_y(self):
        z, p = 4e-9, 0.07
        g = gamma_update([p], [[z]], NOISE)
        want = np.sqrt(THETA * (1 + g[0]) * p * z) / (p * z + NOISE)
        assert y_update([p], g, [[z]], NOISE)[0] == pytest.approx(want, rel=1e-12)

    def test_y_stationary(self):
        # dG/dy_k = 0 at the closed-form y
        for z in instances(5, 12):
            k = z.shape[0]
            p = np.random.default_rng(k + 10).uniform(0.01, PMAX / k, k)
            g = gamma_update(p, z, NOISE)
            y = y_update(p, g, z, NOISE)
            f = lambda yy: lagrangian_ld(p, g, yy, 1.0, 0.0, z, NOISE, P_FIXED, XI, PMAX)  # noqa
            for kk in range(k):
                assert abs(central_diff(f, y, kk)) <= 1e-9


def update_inputs(seed, k=3):
    r = np.random.default_rng(seed)
    z = random_gains(r, k)
    p = r.uniform(0.01, PMAX / k, k)
    g = gamma_update(p, z, NOISE)
    return z, g, y_update(p, g, z, NOISE)


class TestPUpdate:
    def test_formula(self):
        z, g, y = update_inputs(0)
        eta, rho = 3e7, 0.4
        got = p_update(g, y, eta, rho, z, XI, BW)
        for k in range(3):
            den = rho + eta / BW * XI + sum(y[j] ** 2 * z[j, k] for j in range(3))
            assert got[k] == pytest.approx(y[k] ** 2 * THETA * (1 + g[k]) * z[k, k] / den ** 2,
                                           rel=1e-12)

    def test_strictly_decreasing_in_rho(self):
        z, g, y = update_inputs(1)
        ps = [p_update(g, y, 2e7, rho, z, XI, BW) for rho in (0.0, 0.1, 1.0, 10.0)]
        for a, b in zip(ps, ps[1:]):
            assert np.all(b < a)

    def test_zero_y(self):
        z, g, _ = update_inputs(2)
        assert np.all(p_update(g, np.zeros(3), 2e7, 0.0, z, XI, BW) == 0)

    def test_zero_denominator_rejected(self):
        with pytest.raises(ValueError):
            p_update([1.0], [0.0], 0.0, 0.0, [[1.0]], XI)


class TestSolveRho:
    def test_slack_gives_zero(self):
        z, g, y = update_inputs(3)
        assert solve_rho(g, y * 1e-6, 2e7, z, XI, PMAX, bandwidth=BW) == 0.0

    def test_double_overshoot(self):
        z, g, y = update_inputs(4)
        eta = 1e6
        s0 = p_update(g, y, eta, 0.0, z, XI, BW).sum()
        cap = s0 / 2
        rho = solve_rho(g, y, eta, z, XI, cap, tol=1e-12, bandwidth=BW)
        assert rho > 0
        assert p_update(g, y, eta, rho, z, XI, BW).sum() == pytest.approx(cap, rel=1e-12)
        assert p_update(g, y, eta, rho, z, XI, BW).sum() <= cap

    @given(st.integers(0, 2 ** 31), st.floats(0.05, 20.0))
    @settings(max_examples=40, deadline=None)
    def test_complementary_slackness(self, seed, frac):
        z, g, y = update_inputs(seed)
        s0 = p_update(g, y, 1e6, 0.0, z, XI, BW).sum()
        cap = s0 * frac
        rho = solve_rho(g, y, 1e6, z, XI, cap, bandwidth=BW)
        s = p_update(g, y, 1e6, rho, z, XI, BW).sum()
        assert s <= cap * (1 + 1e-12)
        if rho > 0:
            assert abs(cap - s) <= 1e-12 * cap
        assert rho * (cap - s) <= 1e-6 * cap

    def test_bisection_cap(self):
        z, g, y = update_inputs(5)
        s0 = p_update(g, y, 1e6, 0.0, z, XI, BW).sum()
        with pytest.raises(BisectionError):
            solve_rho(g, y, 1e6, z, XI, s0 / 3, tol=1e-15, bandwidth=BW, max_bisect=1)

    def test_rejects_cap(self):
        with pytest.raises(ValueError):
            solve_rho([1.0], [1.0], 1.0, [[1.0]], XI, 0.0)


class TestIqt:
    def test_j_non_decreasing(self):
        for z in instances(11, 100):
            k = z.shape[0]
            eta = 0.8 * dinkelbach_eta(np.full(k, PMAX / k), z, NOISE, P_FIXED, XI, BW)
            st_ = iqt_solve(np.full(k, PMAX / k), eta, z, NOISE, P_FIXED, XI, BW, PMAX,
                            trace=True)
            # J is a difference of two terms of size eta * P; allow roundoff at that scale
            scale = eta * (P_FIXED + XI * PMAX)
            assert np.all(np.diff(st_.trace[:, 3]) >= -1e-12 * scale)
            assert np.all(st_.trace[:, 4] <= PMAX + 1e-9)
            assert st_.p.sum() <= PMAX + 1e-9 and np.all(st_.p >= 0)

    def test_single_user_grid(self):
        rng = np.random.default_rng(12)
        tight = Tolerances(eps_inner=1e-15)
        for _ in range(5):
            z = random_gains(rng, 1)
            grid = np.linspace(0, PMAX, 10 ** 6)
            eta = 0.3 * dinkelbach_eta([PMAX], z, NOISE, P_FIXED, XI, BW) * rng.uniform(0.5, 4)
            j = BW * np.log2(1 + grid * z[0, 0] / NOISE) - eta * (P_FIXED + XI * grid)
            best = grid[np.argmax(j)]
            got = iqt_solve([PMAX / 2], eta, z, NOISE, P_FIXED, XI, BW, PMAX, tol=tight).p[0]
            assert abs(got - best) <= PMAX / (10 ** 6 - 1)

    def test_symmetric_instance(self):
        a, b = 3e-9, 2e-11
        z = np.full((3, 3), b) + np.eye(3) * (a - b)
        eta = dinkelbach_eta(np.full(3, PMAX / 3), z, NOISE, P_FIXED, XI, BW)
        p = iqt_solve(np.full(3, PMAX / 3), eta, z, NOISE, P_FIXED, XI, BW, PMAX).p
        assert np.ptp(p) <= 1e-9

    def test_not_converged_flag(self, rng):
        z = random_gains(rng, 3)
        st_ = iqt_solve(np.full(3, 0.01), 1e6, z, NOISE, P_FIXED, XI, BW, PMAX,
                        tol=Tolerances(eps_inner=1e-300, max_inner=1))
        assert st_.status & INNER_NOT_CONVERGED
        assert st_.p.sum() <= PMAX + 1e-9

    def test_infeasible_start(self, rng):
        with pytest.raises(ValueError):
            iqt_solve(np.full(2, PMAX), 1e6, random_gains(rng, 2), NOISE, P_FIXED, XI, BW, PMAX)


class TestAllocate:
    def test_eta_non_decreasing_and_feasible(self):
        for z in instances(21, 100):
            st_ = allocate_power(z, NOISE, P_FIXED, XI, BW, PMAX, trace=True)
            starts = st_.trace[st_.trace[:, 1] == 0]
            assert np.all(np.diff(starts[:, 2]) >= -1e-9 * starts[:, 2].max())
            assert np.all(st_.trace[:, 4] <= PMAX + 1e-9)
            assert st_.p.sum() <= PMAX + 1e-9 and np.all(st_.p >= 0)
            assert np.all(st_.gamma >= 0) and np.all(st_.y >= 0) and st_.rho >= 0
            assert abs(st_.j_value) <= Tolerances().eps_outer * BW
            assert st_.converged
            assert st_.eta == pytest.approx(dinkelbach_eta(st_.p, z, NOISE, P_FIXED, XI, BW))

    def test_single_user_brute_force(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            z = random_gains(rng, 1)
            grid = np.linspace(0, PMAX, 200_001)[:, None]
            best = ee_points(grid, z, NOISE, P_FIXED, XI, BW).max()
            got = allocate_power(z, NOISE, P_FIXED, XI, BW, PMAX).eta
            assert got == pytest.approx(best, rel=1e-3)
            assert got >= best * (1 - 1e-9)

    @pytest.mark.parametrize("k", [2, 3])
    def test_simplex_grid(self, k):
        rng = np.random.default_rng(23 + k)
        for _ in range(3):
            z = random_gains(rng, k)
            best = simplex_grid_ee(z, NOISE, P_FIXED, XI, BW, PMAX)
            got = allocate_power(z, NOISE, P_FIXED, XI, BW, PMAX).eta
            assert abs(got - best) <= 5e-3 * best

    def test_stationarity(self):
        for z in instances(24, 40):
            st_ = allocate_power(z, NOISE, P_FIXED, XI, BW, PMAX)
            eta = st_.eta_last / BW
            f = lambda q: lagrangian_ld(q, st_.gamma, st_.y, eta, st_.rho, z,  # noqa: E731
                                        NOISE, P_FIXED, XI, PMAX)
            for kk in np.flatnonzero(st_.p > 0):
                assert abs(central_diff(f, st_.p, kk)) <= 1e-6
            grad = lagrangian_gradient(st_.p, st_.gamma, st_.y, st_.eta_last, st_.rho, z, XI, BW)
            assert np.all(np.abs(grad[st_.p > 0]) <= 1e-6)
            assert st_.rho * (PMAX - st_.p.sum()) <= 1e-6 * PMAX

    def test_degenerate_user_pinned(self, rng):
        z = random_gains(rng, 3)
        z[1, :] = 0
        z[:, 1] = 0
        st_ = allocate_power(z, NOISE, P_FIXED, XI, BW, PMAX)
        assert st_.p[1] == 0 and st_.p.sum() > 0

    def test_all_zero(self):
        st_ = allocate_power(np.zeros((2, 2)), NOISE, P_FIXED, XI, BW, PMAX)
        assert st_.eta == 0.0 and np.all(st_.p == 0)

    def test_zero_start_rejected(self, rng):
        with pytest.raises(ValueError):
            allocate_power(random_gains(rng, 2), NOISE, P_FIXED, XI, BW, PMAX, p0=np.zeros(2))

    def test_unpacks(self, rng):
        p, eta = allocate_power(random_gains(rng, 2), NOISE, P_FIXED, XI, BW, PMAX)
        assert p.shape == (2,) and eta > 0

    def test_batch_matches_single(self):
        zs = np.stack(list(instances(25, 8, users=(3,))))
        pf = np.linspace(1.0, 1.5, 8)
        p, ee, outer, status = allocate_power_batch(zs, NOISE, pf, XI, BW, PMAX)
        for b in range(8):
            st_ = allocate_power(zs[b], NOISE, pf[b], XI, BW, PMAX)
            np.testing.assert_allclose(p[b], st_.p, rtol=1e-12, atol=1e-15)
            assert ee[b] == pytest.approx(st_.eta, rel=1e-12)
            assert outer[b] == st_.outer_iter and status[b] == st_.status

    def test_trace_csv(self, tmp_path, rng):
        st_ = allocate_power(random_gains(rng, 2), NOISE, P_FIXED, XI, BW, PMAX, trace=True)
        write_trace(tmp_path / "t.csv", st_.trace)
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "n,t,eta,J,sum_p,rho"
        assert len(lines) == len(st_.trace) + 1
        assert lines[1].startswith("1,0,")
