import math

import numpy as np
import pytest

from donlab import nn, scaling
from donlab.datagen import AdrConfig
from donlab.errors import ConfigurationError
from donlab.scaling import (
    CellResult,
    ExperimentPlan,
    PlannedCell,
    SuiteResult,
    architecture_params,
    check_monotonic,
    emit_plot_data,
    make_plan,
    plan_cells,
    run_cell,
    run_suite,
    size_architecture,
)

# the reference (q, n) grids: one table per fixed-ratio family, as
# (anchor, exponent, rows); the first row of the 2/3 family was pinned to
# the 1/2 family's starting n rather than the ratio value
TABLE_HALF = ((5, 10000), 0.5,
              [(5, 10000), (10, 40000), (15, 90000),
               (40, 640000), (45, 810000), (50, 1000000)])
TABLE_TWO_THIRDS = ((10, 31623), 2.0 / 3.0,
                    [(10, 31623), (15, 58000), (40, 252982),
                     (45, 301870), (50, 353553)])
TABLE_SIXTH = ((6, 11650), 1.0 / 6.0,
               [(6, 11650), (8, 65511), (10, 249906), (12, 746215)])
REFERENCE_PARAM_COUNTS = {
    5: 18010, 6: 18112, 8: 18316, 10: 18520, 12: 18724,
    15: 18568, 40: 18719, 45: 18714, 50: 18760,
}


def _tiny_plan(**overrides) -> ExperimentPlan:
    kw = dict(
        exponent=0.5, anchor_q=2, anchor_n=300, q_list=[2, 3],
        target_params=700, depth=3, branch_in=10, trunk_in=2,
        epochs=3, batch_size=64, seeds=[0],
        adr=AdrConfig(0.01, 0.01, 21, 21),
        grf_length_scale=0.05, points_per_function=50,
        param_tolerance=0.2,
    )
    kw.update(overrides)
    return ExperimentPlan(**kw)


class TestMakePlan:
    @pytest.mark.parametrize("anchor,exponent,rows",
                             [TABLE_HALF, TABLE_TWO_THIRDS, TABLE_SIXTH])
    def test_reproduces_reference_grids(self, anchor, exponent, rows):
        got = dict(make_plan(anchor, [q for q, _ in rows], exponent))
        for q, n in rows:
            assert abs(got[q] - n) <= 0.01 * n

    def test_half_exponent_hand_values(self):
        got = make_plan((5, 10000), list(range(10, 55, 5)), 0.5)
        assert got[0] == (10, 40000)
        assert got[1] == (15, 90000)
        assert got[-1] == (50, 1000000)

    def test_bad_anchor_rejected(self):
        with pytest.raises(Exception):
            make_plan((0, 100), [1], 0.5)


class TestSizeArchitecture:
    def test_counting_convention_matches_nn(self):
        for q, w, depth, b_in, t_in in [(5, 50, 5, 40, 2), (3, 7, 3, 10, 2)]:
            dims_b = tuple([b_in] + [w] * (depth - 1) + [q])
            dims_t = tuple([t_in] + [w] * (depth - 1) + [q])
            total = nn.param_count(nn.MlpSpec(dims_b)) + nn.param_count(nn.MlpSpec(dims_t))
            assert architecture_params(w, q, depth, b_in, t_in) == total

    def test_reference_budget_hit_exactly_at_q5(self):
        w = size_architecture(18010, 5)
        assert w == 50
        assert architecture_params(50, 5) == 18010

    def test_all_reference_counts_within_five_percent(self):
        for q, reference in REFERENCE_PARAM_COUNTS.items():
            w = size_architecture(18010, q)
            count = architecture_params(w, q)
            assert abs(count - 18010) <= 0.05 * 18010
            assert abs(count - reference) <= 0.05 * reference

    def test_width_monotone_in_target(self):
        widths = [size_architecture(t, 8) for t in (2000, 4000, 8000, 16000)]
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_infeasible_target_rejected(self):
        with pytest.raises(ConfigurationError):
            size_architecture(10, 4)


class TestPlanCells:
    def test_param_budget_enforced(self):
        cells = plan_cells(_tiny_plan())
        for cell in cells:
            assert abs(cell.param_count - 700) <= 0.2 * 700

    def test_n_strictly_increasing_required(self):
        plan = _tiny_plan()
        plan.q_list = [2, 2]
        with pytest.raises(ConfigurationError):
            plan_cells(plan)


class TestRunCell:
    def test_zero_epochs_sentinel(self):
        plan = _tiny_plan(epochs=0)
        cell = plan_cells(plan)[0]
        res = run_cell(cell, plan, seed=0)
        assert res.loss_curve == []
        assert math.isnan(res.final_loss) and math.isnan(res.best_loss)
        assert not res.failed

    def test_deterministic_in_seed(self):
        plan = _tiny_plan()
        cell = plan_cells(plan)[0]
        a = run_cell(cell, plan, seed=3)
        b = run_cell(cell, plan, seed=3)
        assert a.loss_curve == b.loss_curve
        c = run_cell(cell, plan, seed=4)
        assert c.loss_curve != a.loss_curve

    def test_training_reduces_loss(self):
        plan = _tiny_plan(epochs=25, q_list=[3], anchor_q=3, anchor_n=1000)
        cell = plan_cells(plan)[0]
        res = run_cell(cell, plan, seed=1)
        assert res.best_loss < res.loss_curve[0]
        assert res.best_loss == min(res.loss_curve)
        assert len(res.loss_curve) == 25

    def test_solver_divergence_marks_cell_failed(self):
        plan = _tiny_plan(adr=AdrConfig(D=0.0, k=200.0, nx=21, nt=101))
        cell = plan_cells(plan)[0]
        res = run_cell(cell, plan, seed=0)
        assert res.failed
        assert "DivergenceError" in res.error


class TestSuite:
    def test_runs_all_cells_and_is_deterministic(self):
        plan = _tiny_plan(seeds=[0, 1])
        a = run_suite(plan)
        b = run_suite(plan)
        assert len(a.cells) == 4  # 2 q's x 2 seeds
        assert [c.loss_curve for c in a.cells] == [c.loss_curve for c in b.cells]

    def test_failures_do_not_abort(self, monkeypatch):
        plan = _tiny_plan(seeds=[0])
        real_run_cell = scaling.run_cell

        def flaky(cell, plan_, seed):
            if cell.q == 3:
                return CellResult(
                    q=cell.q, n=cell.n, width=cell.width,
                    param_count=cell.param_count, seed=seed, loss_curve=[],
                    final_loss=float("nan"), best_loss=float("nan"),
                    wall_time=0.0, failed=True, error="RuntimeError: injected",
                )
            return real_run_cell(cell, plan_, seed)

        monkeypatch.setattr(scaling, "run_cell", flaky)
        suite = run_suite(plan)
        assert len(suite.failures) == 1
        verdict = check_monotonic(suite)
        assert verdict["per_seed"]["0"]["excluded_failed_qs"] == [3]
        assert verdict["per_seed"]["0"]["qs"] == [2]

    def test_threaded_matches_serial(self):
        plan = _tiny_plan(seeds=[0, 1])
        serial = run_suite(plan, max_workers=1)
        threaded = run_suite(plan, max_workers=4)
        assert [c.loss_curve for c in serial.cells] == [c.loss_curve for c in threaded.cells]


def _suite_with_losses(rows) -> SuiteResult:
    plan = _tiny_plan(seeds=sorted({seed for _, seed, _ in rows}))
    plan.q_list = sorted({q for q, _, _ in rows})
    cells = [
        CellResult(q=q, n=100 * q, width=4, param_count=700, seed=seed,
                   loss_curve=[loss + 0.1, loss], final_loss=loss,
                   best_loss=loss, wall_time=0.0)
        for q, seed, loss in rows
    ]
    return SuiteResult(plan=plan, cells=cells)


class TestCheckMonotonic:
    def test_single_cell_is_trivially_monotone(self):
        suite = _suite_with_losses([(2, 0, 0.5)])
        assert check_monotonic(suite)["majority_monotone"]

    def test_constant_losses_count_as_monotone(self):
        suite = _suite_with_losses([(2, 0, 0.5), (3, 0, 0.5)])
        assert check_monotonic(suite)["majority_monotone"]

    def test_increase_breaks_monotonicity(self):
        suite = _suite_with_losses([(2, 0, 0.5), (3, 0, 0.7)])
        verdict = check_monotonic(suite)
        assert not verdict["majority_monotone"]

    def test_majority_across_seeds(self):
        suite = _suite_with_losses([
            (2, 0, 0.5), (3, 0, 0.4),
            (2, 1, 0.5), (3, 1, 0.3),
            (2, 2, 0.5), (3, 2, 0.9),
        ])
        verdict = check_monotonic(suite)
        assert verdict["majority_monotone"]
        assert verdict["seeds_counted"] == 3


class TestEmitPlotData:
    def test_row_counts(self, tmp_path):
        plan = _tiny_plan(epochs=4, seeds=[0, 1])
        suite = run_suite(plan)
        curves, summary = emit_plot_data(suite, tmp_path)
        curve_rows = curves.read_text().strip().splitlines()
        assert len(curve_rows) == 1 + 2 * 2 * 4  # header + cells x seeds x epochs
        summary_rows = summary.read_text().strip().splitlines()
        assert len(summary_rows) == 1 + 4

    def test_reemission_byte_identical(self, tmp_path):
        plan = _tiny_plan(epochs=2)
        suite = run_suite(plan)
        emit_plot_data(suite, tmp_path / "a")
        emit_plot_data(suite, tmp_path / "b")
        assert (tmp_path / "a" / "curves.csv").read_bytes() == \
               (tmp_path / "b" / "curves.csv").read_bytes()
        assert (tmp_path / "a" / "summary.csv").read_bytes() == \
               (tmp_path / "b" / "summary.csv").read_bytes()

    def test_empty_suite_header_only(self, tmp_path):
        suite = SuiteResult(plan=_tiny_plan(), cells=[])
        curves, summary = emit_plot_data(suite, tmp_path)
        assert curves.read_text().strip().splitlines() == ["q,n,seed,epoch,loss"]
        assert summary.read_text().strip().splitlines() == ["q,n,seed,best_loss,final_loss"]


class TestWeightBallTraining:
    def test_norms_stay_inside_the_ball(self, rng):
        from conftest import random_dataset, random_model
        from donlab.scaling import train_deeponet

        model = random_model(rng, q=2, width=4)
        ds = random_dataset(rng, n=40)
        radius = 0.8 * min(nn.param_l2_norm(model.branch),
                           nn.param_l2_norm(model.trunk))
        trained, _, _, _ = train_deeponet(model, ds, 4, 16, seed=0,
                                          weight_ball=radius)
        assert nn.param_l2_norm(trained.branch) <= radius + 1e-12
        assert nn.param_l2_norm(trained.trunk) <= radius + 1e-12

    def test_unconstrained_by_default(self, rng):
        from conftest import random_dataset, random_model
        from donlab.scaling import train_deeponet

        model = random_model(rng, q=2, width=4)
        ds = random_dataset(rng, n=40)
        trained, _, _, curve_free = train_deeponet(model, ds, 4, 16, seed=0)
        _, _, _, curve_ball = train_deeponet(model, ds, 4, 16, seed=0,
                                             weight_ball=1e9)
        assert curve_free == curve_ball  # huge ball never binds


class TestTrainResume:
    def test_split_training_equals_uninterrupted(self, rng):
        from conftest import random_dataset, random_model
        from donlab.scaling import train_deeponet

        model = random_model(rng, q=2, width=4)
        ds = random_dataset(rng, n=40)
        m_full, _, _, curve_full = train_deeponet(model, ds, 6, 16, seed=5)
        m_half, ab, at, curve_a = train_deeponet(model, ds, 3, 16, seed=5)
        m_resumed, _, _, curve_b = train_deeponet(
            m_half, ds, 3, 16, seed=5, adam_branch=ab, adam_trunk=at, start_epoch=3
        )
        assert curve_a + curve_b == curve_full
        assert np.array_equal(m_resumed.branch.flat, m_full.branch.flat)
        assert np.array_equal(m_resumed.trunk.flat, m_full.trunk.flat)
