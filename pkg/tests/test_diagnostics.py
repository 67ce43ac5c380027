"""Diagnostics: residual bookkeeping, convergence, scaling, SDE cross-check."""

import numpy as np
import pytest

from eigenflow.diagnostics import (burgers_pde_residual, collision_experiment,
                                   collision_proximity, convergence_study,
                                   dyson_crosscheck, fit_loglog_slope,
                                   holder_increments, residual_experiment,
                                   weak_equation_residual)
from eigenflow.grids import TimeGrid
from eigenflow.kernels import BrownianKernel, FractionalBrownianKernel, TableKernel
from eigenflow.limitlaw import AtomicMeasure
from eigenflow.matrixflow import sample_flows, spectra_of_stack
from eigenflow.testfunctions import GaussianBump


class TestWeakEquationResidual:
    def test_constant_flow_is_exactly_zero(self):
        # a degenerate tabulated kernel freezes the flow: R identically 0
        ts = np.linspace(0.0, 1.0, 5)
        kernel = TableKernel(ts, np.zeros((5, 5)))
        grid = TimeGrid.from_times(ts)
        lam = np.tile(np.array([1.0, 0.0, -2.0]), (4, len(grid), 1))
        g = weak_equation_residual(lam, kernel, grid, GaussianBump())
        assert np.all(g == 0.0)

    def test_scalar_case_matches_ito_oracle(self):
        # n=1: the eigenvalue is sqrt(2) X(t) and the weak equation reduces
        # to the scalar Ito formula with d<lambda> = 2 dR(s,s); the oracle
        # simulates Brownian paths with an unrelated generator and applies
        # the same grid functional
        kernel = BrownianKernel()
        grid = TimeGrid.uniform(1.0, 32)
        f = GaussianBump()
        paths = 10_000

        reports = residual_experiment(kernel, grid, [1], f, paths, seed=99)
        module_msq = reports[0].mean_square
        module_se = reports[0].mean_square_se

        gen = np.random.default_rng(123456)  # independent sampler
        dt = np.diff(grid.times)
        incr = gen.normal(size=(paths, dt.size)) * np.sqrt(dt)
        x = np.concatenate([np.zeros((paths, 1)), np.cumsum(incr, axis=1)], axis=1)
        lam = np.sqrt(2.0) * x
        f2 = f.d2(lam)
        drift = np.sum(0.5 * (f2[:, :-1] + f2[:, 1:]) * dt, axis=1)
        oracle = f.f(lam[:, -1]) - f.f(lam[:, 0]) - drift
        oracle_msq = np.mean(oracle ** 2)
        oracle_se = np.std(oracle ** 2, ddof=1) / np.sqrt(paths)

        assert abs(module_msq - oracle_msq) < 3.0 * np.hypot(module_se, oracle_se)

    def test_mean_zero_within_four_se(self):
        f = GaussianBump()
        for kernel, grid in [
            (BrownianKernel(), TimeGrid.uniform(1.0, 16)),
            (FractionalBrownianKernel(0.75), TimeGrid.uniform(1.0, 16)),
            (FractionalBrownianKernel(0.3), TimeGrid.power_graded(1.0, 16)),
        ]:
            reports = residual_experiment(kernel, grid, [4, 16], f, 600, seed=5)
            for rep in reports:
                assert abs(rep.mean_residual) <= 4.0 * rep.mean_residual_se, \
                    f"{kernel.kind} n={rep.n}"

    def test_mean_square_decreases_in_n(self):
        f = GaussianBump()
        grid = TimeGrid.uniform(1.0, 12)
        reports = residual_experiment(FractionalBrownianKernel(0.75), grid,
                                      [4, 8, 16, 32], f, 400, seed=7)
        msq = [r.mean_square for r in reports]
        ses = [r.mean_square_se for r in reports]
        for a, b, sa, sb in zip(msq, msq[1:], ses, ses[1:]):
            assert b <= a + 2.0 * np.hypot(sa, sb)

    def test_mapper_equivalence(self):
        from concurrent.futures import ThreadPoolExecutor
        f = GaussianBump()
        grid = TimeGrid.uniform(1.0, 8)
        serial = residual_experiment(BrownianKernel(), grid, [6], f, 50, seed=3)
        with ThreadPoolExecutor(max_workers=4) as pool:
            parallel = residual_experiment(BrownianKernel(), grid, [6], f, 50,
                                           seed=3, mapper=pool.map)
        assert np.array_equal(serial[0].residuals, parallel[0].residuals)


class TestConvergenceStudy:
    def test_distance_shrinks_with_n(self):
        grid = TimeGrid.uniform(1.0, 2)
        rows = convergence_study(BrownianKernel(), grid, [10, 60], 30, seed=11)
        at_t1 = {r.n: r.mean_distance for r in rows if r.t == 1.0}
        assert at_t1[60] < at_t1[10]

    def test_distances_decrease_in_n_for_each_hurst(self):
        grid = TimeGrid.uniform(1.0, 2)
        for hurst in (0.3, 0.5, 0.75):
            rows = convergence_study(FractionalBrownianKernel(hurst), grid,
                                     [25, 50, 100, 200], 10, seed=61)
            seq = [(r.mean_distance, r.stderr) for r in rows if r.t == 1.0]
            for (a, sa), (b, sb) in zip(seq, seq[1:]):
                assert b <= a + 2.0 * np.hypot(sa, sb), f"H={hurst}"

    def test_time_zero_distance_is_zero(self):
        grid = TimeGrid.uniform(1.0, 2)
        rows = convergence_study(BrownianKernel(), grid, [12], 10, seed=13)
        z = [r for r in rows if r.t == 0.0][0]
        assert z.mean_distance == 0.0

    def test_sup_row_bounds_pointwise_rows(self):
        grid = TimeGrid.uniform(1.0, 3)
        rows = convergence_study(FractionalBrownianKernel(0.75), grid, [16], 15, seed=17)
        sup = [r for r in rows if r.t is None][0]
        for r in rows:
            if r.t is not None:
                assert sup.mean_distance >= r.mean_distance - 1e-12

    def test_nonzero_shift_uses_evolved_law(self):
        grid = TimeGrid.uniform(1.0, 2)
        rows = convergence_study(BrownianKernel(), grid, [40], 10, seed=19,
                                 shift_spec="diag:" + ",".join(
                                     ["1"] * 20 + ["-1"] * 20))
        at_t1 = [r for r in rows if r.t == 1.0][0]
        assert at_t1.mean_distance < 0.25


class TestHolder:
    def test_brownian_p4_slope(self):
        rep = holder_increments(BrownianKernel(), 24, GaussianBump(), 4.0,
                                t_base=0.5, separations=np.geomspace(1e-3, 1e-1, 7),
                                paths=300, seed=23)
        assert rep.slope is not None
        # increment bound exponent p*gamma/2 = 2 with 10% slack
        assert rep.slope >= 1.8

    def test_smooth_fbm_p4_slope(self):
        rep = holder_increments(FractionalBrownianKernel(0.75), 24, GaussianBump(), 4.0,
                                t_base=0.5, separations=np.geomspace(1e-3, 1e-1, 7),
                                paths=300, seed=29)
        assert rep.slope >= 2.7

    def test_constant_function_degenerate(self):
        class Constant(GaussianBump):
            def f(self, x):
                return np.ones_like(np.asarray(x, dtype=float))
        rep = holder_increments(BrownianKernel(), 6, Constant(), 4.0, 0.5,
                                [0.01, 0.1], paths=20, seed=31)
        assert rep.slope is None


class TestCollisions:
    def test_n_one_reports_infinite_gap(self):
        rep = collision_proximity(np.zeros((5, 3, 1)), 1, 5)
        assert rep.quantiles[0.5] == np.inf
        assert rep.degenerate_fraction == 0.0

    def test_goe_like_snapshot_has_no_degenerate_gaps(self):
        # snapshot at t=1 (the start is trivially degenerate when A = 0)
        grid = TimeGrid.uniform(1.0, 1)
        lam = spectra_of_stack(sample_flows(
            BrownianKernel(), grid, 50, np.zeros((50, 50)), 37, range(100)))
        rep = collision_proximity(lam[:, 1:, :], 50, 100)
        assert rep.degenerate_fraction == 0.0
        assert rep.quantiles[0.0] > 1e-8

    def test_repeated_shift_entry_gives_zero_gap_at_start(self):
        grid = TimeGrid.uniform(1.0, 1)
        lam = spectra_of_stack(sample_flows(
            BrownianKernel(), grid, 3, np.diag([2.0, 2.0, 0.0]), 41, range(8)))
        rep = collision_proximity(lam[:, :1, :], 3, 8)
        assert rep.quantiles[0.0] == 0.0
        assert rep.degenerate_fraction > 0.0

    def test_experiment_driver_counts_initial_degeneracy(self):
        # with a zero shift every path is degenerate at t = 0 and nowhere else
        rep = collision_experiment(BrownianKernel(), TimeGrid.uniform(1.0, 3),
                                   12, 25, seed=53)
        assert rep.degenerate_fraction == pytest.approx(0.25, abs=1e-12)


class TestDyson:
    def test_time_zero_distance(self):
        row = dyson_crosscheck(2, 1.0, 0.5, paths=2000, seed=43)
        assert row.w1_distance < 0.2  # crude step, still the same law family

    def test_small_scale_agreement(self):
        row = dyson_crosscheck(2, 1.0, 0.01, paths=4000, seed=47)
        assert row.w1_distance <= 0.05

    def test_dt_must_divide_horizon(self):
        with pytest.raises(ValueError):
            dyson_crosscheck(2, 1.0, 0.3, paths=10, seed=1)

    def test_zero_horizon_distance_is_zero(self):
        row = dyson_crosscheck(2, 0.0, 0.001, paths=10, seed=1)
        assert row.w1_distance == 0.0


class TestBurgersPde:
    def test_residual_point_mass(self):
        taus = np.linspace(0.3, 2.0, 10)
        zs = np.array([complex(re, im) for re in np.linspace(-1.5, 1.5, 5)
                       for im in (0.8, 1.6)])
        res = burgers_pde_residual(AtomicMeasure.point_mass(0.0), taus, zs)
        assert res <= 1e-6

    def test_residual_two_atoms(self):
        taus = np.linspace(0.3, 2.0, 10)
        zs = np.array([complex(re, im) for re in np.linspace(-1.5, 1.5, 5)
                       for im in (0.9, 1.8)])
        mu0 = AtomicMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
        res = burgers_pde_residual(mu0, taus, zs)
        assert res <= 1e-6


class TestSlopeFit:
    def test_exact_powerlaw(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        assert fit_loglog_slope(x, x ** -1.5) == pytest.approx(-1.5, abs=1e-12)

    def test_degenerate_input(self):
        assert np.isnan(fit_loglog_slope(np.array([1.0]), np.array([2.0])))
