import numpy as np
import pytest

from sipsolve.core_loop import (
    CoreConfig,
    CoreStatus,
    Discretization,
    RunTrace,
    ScheduleRegime,
    ToleranceSchedule,
    TraceRow,
    eventually_zero_schedule,
    geometric_schedule,
    run_core,
    update_discretization,
)
from sipsolve.errors import ConfigError, InputError
from sipsolve.lower_level import CertifiedMax


def single(y):
    return Discretization(np.array([[y]]))


class TestDiscretization:
    def test_dedup(self):
        d = Discretization(np.array([[0.0], [1e-13], [1.0]]))
        assert d.cardinality == 2

    def test_extended_keeps_order(self):
        d = single(0.0).extended(np.array([[0.5], [0.0]]))
        assert d.cardinality == 2
        assert d.points[0, 0] == 0.0 and d.points[1, 0] == 0.5

    def test_empty(self):
        d = Discretization(np.zeros((0, 1)))
        assert d.cardinality == 0


class TestSchedules:
    def test_geometric_is_summable(self):
        s = geometric_schedule(0.5)
        assert s.regime is ScheduleRegime.SUMMABLE
        assert s.obj_tol(3) == pytest.approx(0.1 / 8)
        assert s.sup_obj() == 0.1

    def test_eventually_zero(self):
        s = eventually_zero_schedule(zero_from=2)
        assert s.obj_tol(1) > 0 and s.obj_tol(2) == 0.0 and s.obj_tol(100) == 0.0

    def test_aux_decay_required(self):
        with pytest.raises(ConfigError):
            ToleranceSchedule(
                obj_tol=lambda k: 0.0,
                aux_tol=lambda k: 1e-3,  # constant, never decays
                regime=ScheduleRegime.EVENTUALLY_ZERO,
            )

    def test_eventually_zero_must_vanish(self):
        with pytest.raises(ConfigError):
            ToleranceSchedule(
                obj_tol=lambda k: 1e-8,
                aux_tol=lambda k: 0.1 * 0.5**k,
                regime=ScheduleRegime.EVENTUALLY_ZERO,
            )

    def test_summable_requires_nonzero_rho(self):
        with pytest.raises(ConfigError):
            CoreConfig(
                eps=0.1, rho=0.0, schedule=geometric_schedule(0.5), y0=single(0.0)
            )

    def test_shifted(self):
        s = geometric_schedule(0.5).shifted(3)
        assert s.obj_tol(0) == pytest.approx(0.1 / 8)


class TestUpdateDiscretization:
    def violator(self, y):
        return CertifiedMax(y_star=np.array([y]), value=0.0, gap=0.0)

    def test_prune_inactive(self, prob_a):
        # g(0, 0) = -1 < -0.1 - 0, so the old point is dropped
        new = update_discretization(
            prob_a, single(0.0), [0.0], eps=0.1, rho=0.0, violator=self.violator(1.0)
        )
        assert new.cardinality == 1
        assert new.points[0, 0] == 1.0

    def test_infinite_rho_keeps_everything(self, prob_a):
        new = update_discretization(
            prob_a, single(0.0), [0.0], eps=0.1, rho=np.inf,
            violator=self.violator(1.0),
        )
        assert sorted(new.points[:, 0]) == [0.0, 1.0]

    def test_threshold_retains_marginal_point(self, prob_a):
        # g(0, 0) = -1 >= -0.1 - 0.95 = -1.05, so the point survives
        new = update_discretization(
            prob_a, single(0.0), [0.0], eps=0.1, rho=0.95,
            violator=self.violator(1.0),
        )
        assert sorted(new.points[:, 0]) == [0.0, 1.0]

    def test_pruned_points_are_strictly_inactive(self, prob_b):
        yk = Discretization(np.linspace(0, 1, 9).reshape(-1, 1))
        x = np.array([-1.5, -0.2])
        eps, rho = 0.3, 0.4
        new = update_discretization(
            prob_b, yk, x, eps=eps, rho=rho, violator=self.violator(0.5)
        )
        kept = {float(v) for v in new.points[:, 0]}
        for y in yk.points:
            if float(y[0]) not in kept:
                val = prob_b.constraints[0].value(x, y)
                assert val < -eps - rho

    def test_extra_points_deterministic(self, prob_a):
        a = update_discretization(
            prob_a, single(0.0), [0.0], 0.1, np.inf, self.violator(1.0), extra=3
        )
        b = update_discretization(
            prob_a, single(0.0), [0.0], 0.1, np.inf, self.violator(1.0), extra=3
        )
        assert np.array_equal(a.points, b.points)
        assert a.cardinality == 5


class TestRunCore:
    def two_step_schedule(self):
        return ToleranceSchedule(
            obj_tol=lambda k: 0.0,
            aux_tol=lambda k: 1e-3 * 0.5 ** (k / 64.0),
            regime=ScheduleRegime.EVENTUALLY_ZERO,
            obj_sup=0.0,
        )

    def test_instance_a_two_iterations(self, prob_a):
        cfg = CoreConfig(
            eps=0.1, rho=0.0, schedule=self.two_step_schedule(), y0=single(0.0),
            max_iters=50,
        )
        res = run_core(prob_a, cfg)
        assert res.status is CoreStatus.TERMINATED
        assert res.iterations == 2
        assert res.x[0] == pytest.approx(-0.1, abs=2e-3)
        branches = [row.branch for row in res.trace.rows]
        assert branches == ["violation", "terminated"]

    def test_instance_b_superset_mode(self, prob_b):
        cfg = CoreConfig(
            eps=0.5, rho=np.inf, schedule=self.two_step_schedule(),
            y0=single(0.5), max_iters=10,
        )
        res = run_core(prob_b, cfg)
        assert res.status is CoreStatus.TERMINATED
        assert res.iterations <= 3
        assert np.allclose(res.x, [-1.5, -1.5], atol=5e-3)

    def test_terminated_point_is_sip_feasible(self, prob_a):
        from sipsolve.lower_level import certified_max
        from sipsolve.problem import FEASTOL, feasibility_margin

        cfg = CoreConfig(
            eps=0.1, rho=0.0, schedule=self.two_step_schedule(), y0=single(0.0)
        )
        res = run_core(prob_a, cfg)
        cm = certified_max(prob_a.constraints[0], res.x, 1e-9)
        assert cm.value + cm.gap <= 1e-9
        lip = prob_a.constraints[0].lipschitz_in_y
        assert feasibility_margin(prob_a, res.x, 1e-4) <= FEASTOL * (1 + lip)

    def test_infeasible_subproblem_is_first_class(self, prob_a):
        cfg = CoreConfig(
            eps=4.0, rho=0.0, schedule=self.two_step_schedule(), y0=single(1.0)
        )
        res = run_core(prob_a, cfg)
        assert res.status is CoreStatus.INFEASIBLE_SUBPROBLEM
        assert res.trace.rows[-1].branch == "infeasible"

    def test_budget_outcome(self, prob_a):
        cfg = CoreConfig(
            eps=0.0, rho=0.0, schedule=self.two_step_schedule(), y0=single(0.0),
            max_iters=3,
        )
        res = run_core(prob_a, cfg)
        assert res.status is CoreStatus.BUDGET
        assert res.iterations == 3

    def test_superset_rule_under_infinite_rho(self, prob_a):
        cfg = CoreConfig(
            eps=0.0, rho=np.inf, schedule=eventually_zero_schedule(0),
            y0=single(0.0), max_iters=12,
        )
        res = run_core(prob_a, cfg)
        cards = [row.card_y for row in res.trace.rows]
        assert all(b >= a for a, b in zip(cards, cards[1:]))

    def test_monotone_objective_at_floor(self, prob_a, prob_b):
        for prob, y0 in ((prob_a, 0.0), (prob_b, 0.5)):
            for rho in (0.0, 0.5, np.inf):
                cfg = CoreConfig(
                    eps=0.0, rho=rho, schedule=eventually_zero_schedule(0),
                    y0=single(y0), max_iters=40,
                )
                res = run_core(prob, cfg)
                fs = res.trace.objective_values
                for a, b in zip(fs, fs[1:]):
                    assert b >= a - 1e-11


class TestRunTrace:
    def test_strictly_increasing_k(self):
        t = RunTrace()
        t.append(TraceRow(0, 0.1, 1, 0.0, 0.0, "violation", 1, 10))
        with pytest.raises(InputError):
            t.append(TraceRow(0, 0.1, 1, 0.0, 0.0, "violation", 1, 10))

    def test_csv_shape(self, prob_a):
        cfg = CoreConfig(
            eps=0.1, rho=0.0, schedule=eventually_zero_schedule(0), y0=single(0.0)
        )
        res = run_core(prob_a, cfg)
        lines = res.trace.to_csv().strip().split("\n")
        assert lines[0] == "k,eps,card_Y,f_x,max_violation,branch,lp_iters,oracle_evals"
        assert len(lines) == len(res.trace.rows) + 1
