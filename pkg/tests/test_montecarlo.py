"""Data generation, simulation harness, bootstrap and goodness of fit."""

import numpy as np
import pytest

from psaltfit import (
    ContaminationSpec,
    EstimatorSpec,
    ModelParams,
    ObservedCounts,
    TuningParams,
    bootstrap,
    generate_dataset,
    gof_test,
    run_simulation,
)
from psaltfit.datasets import load_lightbulbs
from psaltfit.montecarlo import _replicate_rng, gof_statistic


class TestContaminationSpec:
    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            ContaminationSpec(epsilon=1.0)
        with pytest.raises(ValueError):
            ContaminationSpec(epsilon=-0.1)

    def test_linked_weibull_quantiles(self):
        # survival exp[-((a nu^b) t)^mu]: median at t = (ln 2)^(1/mu)/(a nu^b)
        spec = ContaminationSpec(epsilon=0.5)
        rng = np.random.default_rng(0)
        a, b, mu = spec.contaminant_params
        nu = 4.0
        draws = spec.sample(nu, rng, 200_000)
        median = np.log(2.0) ** (1.0 / mu) / (a * nu**b)
        assert np.median(draws) == pytest.approx(median, rel=0.02)

    def test_plain_weibull_ignores_stress(self):
        spec = ContaminationSpec(epsilon=0.5, contaminant_params=(2.0, 0.5, 9.9),
                                 plain_weibull=True)
        r1 = spec.sample(3.0, np.random.default_rng(1), 1000)
        r2 = spec.sample(30.0, np.random.default_rng(1), 1000)
        np.testing.assert_array_equal(r1, r2)
        # two-parameter Weibull, shape 2, scale 0.5
        assert np.median(r1) == pytest.approx(0.5 * np.log(2.0) ** 0.5,
                                              rel=0.1)


class TestGenerateDataset:
    def test_deterministic_per_seed(self, theta0, bench_plan):
        c1 = generate_dataset(theta0, bench_plan, seed=3)
        c2 = generate_dataset(theta0, bench_plan, seed=3)
        for a, b in zip(c1.counts, c2.counts):
            np.testing.assert_array_equal(a, b)

    def test_counts_sum_to_group_sizes(self, theta0, bench_plan):
        c = generate_dataset(theta0, bench_plan,
                             ContaminationSpec(epsilon=0.3), seed=4)
        np.testing.assert_array_equal(c.n_units, [20, 25, 30])

    def test_epsilon_zero_matches_clean_generator(self, theta0, bench_plan):
        c1 = generate_dataset(theta0, bench_plan, seed=5)
        c2 = generate_dataset(theta0, bench_plan,
                              ContaminationSpec(epsilon=0.0), seed=5)
        for a, b in zip(c1.counts, c2.counts):
            np.testing.assert_array_equal(a, b)

    def test_heavy_early_contamination_shifts_mass(self, theta0, bench_plan):
        # contaminant lifetimes collapse to ~0: first cells dominate
        spec = ContaminationSpec(epsilon=0.99,
                                 contaminant_params=(9.0, 1e-9, 2.0),
                                 plain_weibull=True)
        c = generate_dataset(theta0, bench_plan, spec, seed=6)
        for n in c.counts:
            assert n[0] >= 0.9 * n.sum()

    def test_replicate_streams_are_stable(self, theta0, bench_plan):
        # replicate r's dataset does not depend on how many reps run
        c_direct = generate_dataset(theta0, bench_plan,
                                    seed=_replicate_rng(9, 7))
        c_again = generate_dataset(theta0, bench_plan,
                                   seed=_replicate_rng(9, 7))
        for a, b in zip(c_direct.counts, c_again.counts):
            np.testing.assert_array_equal(a, b)


class TestEstimatorSpec:
    def test_labels(self):
        assert EstimatorSpec("mle").label == "mle"
        spec = EstimatorSpec("mepde", TuningParams(-6, 0.1, 0.16))
        assert spec.label == "mepde(-6,0.1,0.16)"

    def test_validation(self):
        with pytest.raises(ValueError):
            EstimatorSpec("other")
        with pytest.raises(ValueError):
            EstimatorSpec("mepde")


class TestRunSimulation:
    def test_single_rep(self, theta0, bench_plan):
        reports = run_simulation(theta0, bench_plan, ContaminationSpec(),
                                 [EstimatorSpec("mle")], reps=1, seed=0)
        assert len(reports) == 1
        assert reports[0].n_reps == 1
        assert reports[0].rmse_plus == pytest.approx(reports[0].rmse.sum())

    def test_reps_validation(self, theta0, bench_plan):
        with pytest.raises(ValueError):
            run_simulation(theta0, bench_plan, ContaminationSpec(),
                           [EstimatorSpec("mle")], reps=0)

    def test_determinism(self, theta0, bench_plan):
        args = (theta0, bench_plan, ContaminationSpec(0.1),
                [EstimatorSpec("mle")])
        r1 = run_simulation(*args, reps=3, seed=5)
        r2 = run_simulation(*args, reps=3, seed=5)
        np.testing.assert_array_equal(r1[0].rmse, r2[0].rmse)
        np.testing.assert_array_equal(r1[0].abs_bias, r2[0].abs_bias)

    def test_rows_structure(self, theta0, bench_plan):
        reports = run_simulation(theta0, bench_plan, ContaminationSpec(),
                                 [EstimatorSpec("mle")], reps=2, seed=1)
        rows = list(reports[0].rows())
        assert [r["param"] for r in rows] == ["a", "b", "mu"]
        assert all(set(r) == {"estimator", "param", "bias", "rmse"}
                   for r in rows)


class TestBootstrap:
    def test_single_rep(self, theta0, bench_plan):
        counts = generate_dataset(theta0, bench_plan, seed=2)
        rep = bootstrap(counts, bench_plan, EstimatorSpec("mle"), b_reps=1,
                        seed=0)
        assert rep.n_reps == 1
        assert set(rep.percentiles) == {"a", "b", "mu"}

    def test_percentiles_bracket_center_on_easy_case(self, theta0, bench_plan):
        counts = generate_dataset(theta0, bench_plan, seed=3)
        rep = bootstrap(counts, bench_plan, EstimatorSpec("mle"), b_reps=30,
                        seed=1)
        lo, hi = rep.percentiles["mu"]
        assert lo < hi


class TestGof:
    def test_statistic_hand_computed(self, theta0, bench_plan):
        counts = generate_dataset(theta0, bench_plan, seed=4)
        from psaltfit.model import cell_probabilities

        want = 0.0
        for g, n, p in zip(bench_plan, counts.counts,
                           cell_probabilities(theta0, bench_plan)):
            e = g.n_units * p
            want += float(np.sum(np.abs(n - e) / e))
        got = gof_statistic(counts, bench_plan, theta0)
        assert got == pytest.approx(want, rel=1e-12)

    def test_zero_expected_cell_named(self, theta0):
        from psaltfit import GroupPlan, TestPlan

        plan = TestPlan([GroupPlan(5, 3.0, np.array([0.4, 0.4, 0.7]))])
        counts = ObservedCounts([[2, 0, 2, 1]])
        with pytest.raises(ValueError, match="cell 1"):
            gof_statistic(counts, plan, theta0)

    def test_gof_deterministic(self):
        plan, counts = load_lightbulbs()
        ts1, p1 = gof_test(counts, plan, b_reps=20, seed=7)
        ts2, p2 = gof_test(counts, plan, b_reps=20, seed=7)
        assert ts1 == ts2
        assert p1 == p2
