import json
import math

import numpy as np
import pytest

from mlwos.estimator import (
    AllocationModel,
    Ladder,
    LevelPlan,
    adaptive_mlmc,
    allocation_targets,
    auto_sample_count,
    build_ladder,
    default_ladder,
    mc_estimate,
    mlmc_estimate,
    model_allocation,
    optimal_allocation,
)
from mlwos.geometry import ball_problem, get_problem, hemisphere_problem, square_problem
from mlwos.walk import StepLimitExceeded

SQUARE = square_problem()
HEMI = hemisphere_problem()


class TestLadder:
    def test_three_level_example(self):
        lad = build_ladder(0.0125, 2.0, 0.1)
        assert lad.levels == 3
        assert lad.eps == (0.1, 0.05, 0.025, 0.0125)
        assert lad.eps0 == 0.1

    def test_single_level_when_hint_reaches_target(self):
        lad = build_ladder(0.1, 16.0, 0.1)
        assert lad.levels == 0
        assert lad.eps == (0.1,)

    def test_eta_sixteen_exact(self):
        lad = build_ladder(3.90625e-4, 16.0, 0.1)
        assert lad.levels == 2
        assert lad.eps == (0.1, 6.25e-3, 3.90625e-4)

    def test_finest_width_is_target_exactly(self):
        for eta in (2.0, 3.0, 16.0):
            lad = build_ladder(1e-3, eta, 0.37)
            assert lad.eps[-1] == 1e-3
            assert lad.eps0 == lad.eps[0]
            ratios = [a / b for a, b in zip(lad.eps, lad.eps[1:])]
            assert all(r == pytest.approx(eta, rel=1e-12) for r in ratios)

    def test_rejects_bad_eta(self):
        with pytest.raises(ValueError, match="eta"):
            build_ladder(0.01, 1.0, 0.1)
        with pytest.raises(ValueError, match="eta"):
            build_ladder(0.01, 0.5, 0.1)

    def test_rejects_target_above_hint(self):
        with pytest.raises(ValueError):
            build_ladder(0.2, 2.0, 0.1)

    def test_default_ladder_respects_start_distance(self):
        for prob in (SQUARE, HEMI):
            d0 = prob.domain.distance_to_boundary(prob.start)
            for eta in (2.0, 16.0):
                lad = default_ladder(prob, 1e-3, eta)
                assert lad.eps[0] < d0
                assert lad.eps[-1] == 1e-3
                assert lad.eps[0] * eta > 0.9 * d0  # deepest admissible


class TestAutoSampleCount:
    def test_unit_variance(self):
        assert auto_sample_count(1.0, 0.1) == 100

    def test_zero_variance_floor(self):
        assert auto_sample_count(0.0, 0.1) == 2

    def test_quarter_variance(self):
        assert auto_sample_count(0.25, 0.05) == 100

    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            auto_sample_count(-1.0, 0.1)


class TestOptimalAllocation:
    def test_worked_example(self):
        m = optimal_allocation([1.0, 0.25], [1.0, 4.0], 0.1)
        assert m == [200, 50]
        assert 1.0 / 200 + 0.25 / 50 == pytest.approx(0.01)

    def test_single_level_reduces_to_equilibration(self):
        for v, w, eps in ((1.0, 1.0, 0.1), (0.3, 7.0, 0.02)):
            assert optimal_allocation([v], [w], eps) == [auto_sample_count(v, eps)]

    def test_constraint_holds_pre_rounding(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(1, 8)
            v = rng.uniform(0.01, 2.0, n)
            w = rng.uniform(0.5, 50.0, n)
            eps = rng.uniform(1e-3, 0.3)
            targets = allocation_targets(v, w, eps)
            assert np.sum(v / targets) == pytest.approx(eps ** 2, rel=1e-12)

    def test_variance_scaling_homogeneity(self):
        v = np.array([1.0, 0.3, 0.05])
        w = np.array([1.0, 3.0, 9.0])
        base = allocation_targets(v, w, 0.05)
        scaled = allocation_targets(4.0 * v, w, 0.05)
        np.testing.assert_allclose(scaled, 4.0 * base, rtol=1e-12)

    def test_allocation_structure(self):
        v = np.array([0.9, 0.2, 0.03])
        w = np.array([2.0, 5.0, 11.0])
        targets = allocation_targets(v, w, 0.1)
        expected = np.sqrt(v / w) * np.sum(np.sqrt(v * w)) / 0.1 ** 2
        np.testing.assert_allclose(targets, expected, rtol=1e-13)

    def test_zero_variance_level_floors_at_two(self):
        assert optimal_allocation([0.0, 1.0], [1.0, 1.0], 0.1)[0] == 2

    def test_rejects_nonpositive_work(self):
        with pytest.raises(ValueError, match="works"):
            optimal_allocation([1.0], [0.0], 0.1)


class TestModelAllocation:
    def test_single_level_degenerates(self):
        lad = build_ladder(0.1, 2.0, 0.1)
        model = AllocationModel(s=0.5, v0=1.0, w0=5.0, work_mode="polylog", p=2)
        assert model_allocation(model, lad) == [auto_sample_count(1.0, 0.1)]

    def test_counts_decrease_across_levels(self):
        lad = build_ladder(0.1 / 8, 2.0, 0.1)
        model = AllocationModel(s=0.5, v0=1.0, w0=10.0, work_mode="polylog", p=2)
        m = model_allocation(model, lad)
        assert len(m) == 4
        assert all(a > b for a, b in zip(m, m[1:]))

    def test_doubling_pilot_variance_doubles_counts(self):
        lad = build_ladder(0.0125, 2.0, 0.1)
        m1 = AllocationModel(s=0.5, v0=1.0, w0=3.0, work_mode="polylog", p=2)
        m2 = AllocationModel(s=0.5, v0=2.0, w0=3.0, work_mode="polylog", p=2)
        eps = np.asarray(lad.eps)
        t1 = allocation_targets(1.0 * (eps / lad.eps0), 3.0 * np.maximum(1, np.arange(4)) ** 2, lad.eps[-1])
        t2 = allocation_targets(2.0 * (eps / lad.eps0), 3.0 * np.maximum(1, np.arange(4)) ** 2, lad.eps[-1])
        np.testing.assert_allclose(t2, 2.0 * t1, rtol=1e-12)
        for a, b in zip(model_allocation(m2, lad), model_allocation(m1, lad)):
            assert a >= b

    def test_power_mode_requires_decay_margin(self):
        lad = build_ladder(0.0125, 2.0, 0.1)
        bad = AllocationModel(s=0.5, v0=1.0, w0=1.0, work_mode="power", gamma=1.5)
        with pytest.raises(ValueError, match="2s"):
            model_allocation(bad, lad)
        good = AllocationModel(s=1.0, v0=1.0, w0=1.0, work_mode="power", gamma=1.5)
        assert len(model_allocation(good, lad)) == 4

    def test_model_validation(self):
        with pytest.raises(ValueError):
            AllocationModel(s=0.0, v0=1.0, w0=1.0, work_mode="polylog", p=2)
        with pytest.raises(ValueError):
            AllocationModel(s=0.5, v0=1.0, w0=1.0, work_mode="polylog", p=3)
        with pytest.raises(ValueError):
            AllocationModel(s=0.5, v0=1.0, w0=1.0, work_mode="power")


class TestMcEstimate:
    def test_constant_data_is_exact(self):
        rep = mc_estimate(ball_problem(2), 0.05, m=100, seed=0, threads=1)
        assert rep.value == 1.0
        assert rep.level_stats[0].variance == 0.0
        assert rep.stat_error == 0.0
        assert rep.m == (100,)

    def test_hemisphere_against_analytic(self):
        rep = mc_estimate(HEMI, 1e-2, m=10_000, seed=3, threads=2)
        truth = HEMI.reference_solution
        assert abs(rep.value - truth) <= 3.0 * rep.stat_error + 1e-2

    def test_square_auto_count_against_oracle(self):
        rep = mc_estimate(SQUARE, 1e-2, m=None, seed=5, threads=2)
        assert rep.m[0] >= 100
        assert abs(rep.value - SQUARE.reference_solution) <= 3.0 * rep.stat_error + 1e-2
        # count realizes the equilibration at the measured variance
        assert rep.stat_error == pytest.approx(1e-2, rel=0.25)

    def test_auto_matches_explicit_rerun(self):
        auto = mc_estimate(SQUARE, 0.03, m=None, seed=9, threads=1)
        explicit = mc_estimate(SQUARE, 0.03, m=auto.m[0], seed=9, threads=1)
        assert auto.value == explicit.value
        assert auto.total_steps == explicit.total_steps

    def test_work_additivity(self):
        rep = mc_estimate(SQUARE, 0.05, m=500, seed=1, threads=1)
        st = rep.level_stats[0]
        assert rep.total_steps == round(st.mean_steps * st.count)

    def test_rejects_tiny_m(self):
        with pytest.raises(ValueError):
            mc_estimate(SQUARE, 0.05, m=1)


class TestMlmcEstimate:
    def test_single_level_plan_matches_mc(self):
        lad = build_ladder(0.05, 2.0, 0.05)
        plan = LevelPlan(lad, (400,))
        ml = mlmc_estimate(SQUARE, plan, seed=4, threads=2)
        mc = mc_estimate(SQUARE, 0.05, m=400, seed=4, threads=2)
        assert ml.value == mc.value
        assert ml.total_steps == mc.total_steps
        assert ml.stat_error == mc.stat_error

    def test_degenerate_level_contributes_zero(self):
        lad = Ladder(eps0=0.05, eta=2.0, levels=1, eps=(0.05, 0.05))
        plan = LevelPlan(lad, (200, 150))
        rep = mlmc_estimate(SQUARE, plan, seed=6, threads=1)
        assert rep.level_stats[1].mean == 0.0
        assert rep.level_stats[1].variance == 0.0

    def test_telescoping_unbiasedness(self):
        lad = default_ladder(SQUARE, 0.02, 4.0)
        plan = LevelPlan(lad, tuple([600] * (lad.levels + 1)))
        ml_vals, mc_vals, ml_stats, mc_stats = [], [], [], []
        for seed in range(20):
            ml = mlmc_estimate(SQUARE, plan, seed=seed, threads=2)
            mc = mc_estimate(SQUARE, 0.02, m=600, seed=seed, threads=2)
            ml_vals.append(ml.value)
            mc_vals.append(mc.value)
            ml_stats.append(ml.stat_error)
            mc_stats.append(mc.stat_error)
        gap = abs(np.mean(ml_vals) - np.mean(mc_vals))
        sem = math.sqrt((np.mean(ml_stats) ** 2 + np.mean(mc_stats) ** 2) / 20)
        assert gap <= 3.0 * sem

    def test_stat_error_formula(self):
        lad = default_ladder(SQUARE, 0.03, 4.0)
        plan = LevelPlan(lad, tuple([300] * (lad.levels + 1)))
        rep = mlmc_estimate(SQUARE, plan, seed=2, threads=1)
        expected = math.sqrt(sum(st.variance / st.count for st in rep.level_stats))
        assert rep.stat_error == pytest.approx(expected, rel=1e-12)
        assert rep.value == pytest.approx(sum(st.mean for st in rep.level_stats), rel=1e-12)

    def test_propagates_step_limit(self):
        lad = default_ladder(SQUARE, 1e-4, 16.0)
        plan = LevelPlan(lad, tuple([50] * (lad.levels + 1)))
        with pytest.raises(StepLimitExceeded):
            mlmc_estimate(SQUARE, plan, seed=0, threads=1, max_steps=2)


class TestAdaptiveMlmc:
    def test_constant_data_stays_at_warmup(self):
        rep = adaptive_mlmc(ball_problem(2), 0.05, 2.0, warmup=50, seed=0, threads=1)
        assert rep.value == 1.0
        assert all(m == 50 for m in rep.m)
        assert rep.stat_error == 0.0

    def test_budgets_decrease_with_level(self):
        rep = adaptive_mlmc(SQUARE, 1e-3, 16.0, warmup=100, seed=3, threads=2)
        assert len(rep.m) >= 2
        assert all(a > b for a, b in zip(rep.m, rep.m[1:]))

    def test_same_seed_bitwise_identical(self):
        a = adaptive_mlmc(HEMI, 5e-3, 16.0, seed=12, threads=1)
        b = adaptive_mlmc(HEMI, 5e-3, 16.0, seed=12, threads=4)
        assert a.value == b.value
        assert a.m == b.m
        assert a.total_steps == b.total_steps
        assert a.stat_error == b.stat_error

    def test_statistical_error_hits_target(self):
        rep = adaptive_mlmc(SQUARE, 5e-3, 16.0, seed=8, threads=2)
        assert rep.stat_error <= 5e-3 * 1.15

    def test_rejects_small_warmup(self):
        with pytest.raises(ValueError):
            adaptive_mlmc(SQUARE, 0.01, 2.0, warmup=1)


class TestReportSchema:
    def test_json_fields(self):
        rep = mc_estimate(ball_problem(2), 0.05, m=50, seed=0, threads=1)
        doc = rep.to_dict()
        assert set(doc) == {
            "value", "eps_target", "eta", "levels", "total_steps",
            "stat_error", "seed", "wall_time_s",
        }
        assert doc["wall_time_s"] == 0.0
        assert set(doc["levels"][0]) == {"level", "eps", "m", "mean", "variance", "mean_steps"}
        json.dumps(doc)

    def test_work_additivity_multilevel(self):
        lad = default_ladder(SQUARE, 0.02, 4.0)
        plan = LevelPlan(lad, tuple([200] * (lad.levels + 1)))
        rep = mlmc_estimate(SQUARE, plan, seed=7, threads=1)
        total = sum(round(st.mean_steps * st.count) for st in rep.level_stats)
        assert rep.total_steps == total
