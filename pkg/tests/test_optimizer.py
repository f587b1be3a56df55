import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logstep.errors import DivergenceError, DomainError, NoWinnerError
from logstep.optimizer import (
    COARSE_GRID,
    AdamParams,
    ArmijoParams,
    OptimizerState,
    RunConfig,
    adam_step,
    armijo_search,
    grid_search,
    run,
    sgd_step,
)
from logstep.problems import QuadraticProblem, StochasticOracle, make_noisy_quadratic
from logstep.schedules import StepSchedule, schedule_table


def quad(eigs, sigma=0.0, x_init=None):
    p = QuadraticProblem(eigs, x_init)
    return p, StochasticOracle(p, "gaussian", sigma=sigma)


def cfg(kind="constant", eta0=0.1, T=20, **kw):
    kw.setdefault("mu", 0.0)
    kw.setdefault("seeds", (0,))
    return RunConfig(StepSchedule(kind, eta0, T, alpha=kw.pop("alpha", 0.0)), **kw)


class TestSgdStep:
    def test_plain(self):
        s = sgd_step(OptimizerState.initial([2.0]), [1.0], 0.5)
        assert s.x.tolist() == [1.5]

    def test_zero_eta(self):
        s0 = OptimizerState.initial([2.0, -1.0])
        assert np.array_equal(sgd_step(s0, [3.0, 4.0], 0.0).x, s0.x)

    def test_nesterov_two_steps(self):
        mu, eta, g = 0.9, 0.1, 1.0
        x, v = 0.0, 0.0
        for _ in range(2):
            v = mu * v + g
            x = x - eta * (g + mu * v)
        s = OptimizerState.initial([0.0], mu=mu)
        for _ in range(2):
            s = sgd_step(s, [g], eta)
        assert s.x[0] == x == pytest.approx(-0.1 * 1.9 - 0.1 * (1 + 0.9 * 1.9))

    def test_non_finite(self):
        with pytest.raises(DivergenceError):
            sgd_step(OptimizerState.initial([1.0]), [math.inf], 0.1)

    def test_bad_eta_and_mu(self):
        with pytest.raises(DomainError):
            sgd_step(OptimizerState.initial([1.0]), [1.0], -0.1)
        with pytest.raises(DomainError):
            OptimizerState.initial([1.0], mu=1.0)


class TestArmijo:
    @staticmethod
    def f(x):
        return 0.5 * float(np.dot(x, x))

    def test_accepts_full_step(self):
        r = armijo_search(self.f, np.array([1.0]), np.array([1.0]), 1.0, 0.1)
        assert r.eta == 1.0 and r.accepted and len(r.trials) == 1

    def test_zero_gradient(self):
        r = armijo_search(self.f, np.array([1.0]), np.array([0.0]), 0.7, 0.5)
        assert r.eta == 0.7

    @pytest.mark.parametrize("c", [0.6, 0.9, 0.99, 0.999])
    def test_c_near_one_backtracks_below_threshold(self, c):
        # on x^2/2 at x=g=1 the condition reads (1-eta)^2/2 <= 1/2 - c eta, i.e. eta <= 2(1-c)
        r = armijo_search(self.f, np.array([1.0]), np.array([1.0]), 1.0, c)
        assert r.eta <= 2 * (1 - c)
        assert r.eta > (1 - c)  # largest power of 1/2 below the threshold
        assert all(eta > 2 * (1 - c) for eta, _ in r.trials[:-1])

    def test_failure_flag(self):
        # g points uphill, so no trial can satisfy the condition
        r = armijo_search(lambda x: float(x[0]), np.array([0.0]), np.array([-1.0]), 1.0, 0.5,
                          max_backtracks=5)
        assert not r.accepted and r.eta == 0.5**5 and len(r.trials) == 6

    def test_run_logs_satisfy_condition(self):
        p, o = make_noisy_quadratic(5, 0.5, 4.0, sigma=0.5)
        config = replace(cfg(T=30, method="sgd_armijo", armijo=ArmijoParams(1.0, 0.1, 0.5)),
                         keep_armijo_log=True)
        tr = run(p, o, config, seed=0)
        assert tr.completed and len(tr.armijo_log) == 30
        for res in tr.armijo_log:
            assert res.accepted and res.satisfies(res.eta, res.trials[-1][1])


class TestAdam:
    @staticmethod
    def reference(gs, eta, b1=0.9, b2=0.999, eps=1e-8, x0=0.0):
        x, m, v = x0, 0.0, 0.0
        out = []
        for k, g in enumerate(gs, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            x = x - eta * (m / (1 - b1**k)) / (math.sqrt(v / (1 - b2**k)) + eps)
            out.append(x)
        return out

    def test_first_step_sign(self):
        s = adam_step(OptimizerState.initial([0.0]), [-3.0], 0.001)
        assert s.x[0] == pytest.approx(0.001 * 3.0 / (3.0 + 1e-8), rel=1e-15)

    def test_zero_gradients(self):
        s = OptimizerState.initial([1.5])
        for _ in range(10):
            s = adam_step(s, [0.0], 0.1)
        assert s.x[0] == 1.5

    def test_against_unrolled_reference(self):
        rng = np.random.default_rng(0)
        gs = rng.normal(size=100)
        ref = self.reference(gs, 0.0009)
        s = OptimizerState.initial([0.0])
        for k, g in enumerate(gs):
            s = adam_step(s, [g], 0.0009)
            assert abs(s.x[0] - ref[k]) <= 1e-12

    def test_bad_betas(self):
        with pytest.raises(DomainError):
            adam_step(OptimizerState.initial([0.0]), [1.0], 0.1, beta1=1.0)


class TestRun:
    def test_deterministic(self):
        p, o = make_noisy_quadratic(10, 0.1, 10.0, 1.0)
        config = cfg("logarithmic", 0.05, 50, mu=0.9)
        a, b = run(p, o, config, 3), run(p, o, config, 3)
        assert a.rows == b.rows and np.array_equal(a.final_x, b.final_x)
        assert a.sampled_iterate == b.sampled_iterate
        assert run(p, o, config, 4).rows != a.rows

    def test_eta_column_reproduces_schedule(self):
        p, o = make_noisy_quadratic(4, 0.5, 2.0, 0.3)
        sched = StepSchedule("logarithmic", 0.1, 25)
        tr = run(p, o, RunConfig(sched, restarts=2, mu=0.0), 0)
        tab = schedule_table(sched)
        assert tr.column("eta").tolist() == list(tab) * 2

    def test_restart_identity(self):
        p, o = make_noisy_quadratic(10, 0.1, 10.0, 1.0)
        T = 100
        tr = run(p, o, cfg("logarithmic", 0.05, T, restarts=3, mu=0.9), 0)
        rows = tr.rows
        for epoch in (1, 101, 201):
            assert rows[epoch - 1].eta == 0.05 and rows[epoch - 1].t == 1
        assert [r.global_epoch for r in rows] == list(range(1, 301))
        assert len(tr.cycle_start_x) == 3
        # cycle-start iterate equals the iterate at the end of the previous cycle
        for i in (1, 2):
            assert p.value(tr.cycle_start_x[i]) == rows[i * T].train_loss
        assert len(tr.sampled_per_cycle) == 3
        assert all(i * T < s <= (i + 1) * T for i, s in enumerate(tr.sampled_per_cycle))

    def test_exact_gd_contraction(self):
        eigs = np.array([0.5, 1.0, 2.0, 4.0])
        p, o = quad(eigs)
        eta, T = 0.2, 40
        tr = run(p, o, cfg("constant", eta, T), 0)
        expected = (1 - eta * eigs) ** T * p.x_init
        np.testing.assert_allclose(tr.final_x, expected, rtol=1e-10, atol=1e-300)
        loss = tr.column("train_loss")
        assert np.all(np.diff(loss) < 0)

    def test_scale_coherence(self):
        eigs = np.array([0.3, 1.0, 3.0])
        s = 7.5
        p1, o1 = quad(eigs)
        p2, o2 = quad(eigs * s)
        a = run(p1, o1, cfg("cosine", 0.3, 30), 0)
        b = run(p2, o2, cfg("cosine", 0.3 / s, 30), 0)
        np.testing.assert_allclose(b.final_x, a.final_x, rtol=1e-10, atol=1e-14)

    def test_divergence_truncates(self):
        p, o = quad([10.0])
        tr = run(p, o, cfg("constant", 1.0, 200), 0)
        assert tr.status == "diverged" and not tr.completed
        assert 0 < len(tr.rows) < 200 and "loss" in tr.failure
        assert [r.global_epoch for r in tr.rows] == list(range(1, len(tr.rows) + 1))

    def test_reset_momentum(self):
        p, o = make_noisy_quadratic(3, 0.5, 2.0, 0.0)
        base = cfg("logarithmic", 0.1, 10, restarts=2, mu=0.9)
        kept = run(p, o, base, 0)
        reset = run(p, o, replace(base, reset_momentum=True), 0)
        assert kept.rows[:10] == reset.rows[:10]
        assert kept.rows[11] != reset.rows[11]

    def test_plateau_reduces_on_flat_loss(self):
        p, o = quad([1.0], x_init=[0.0])
        sched = StepSchedule("plateau", 0.04, 20, alpha=0.5, patience=3)
        tr = run(p, o, RunConfig(sched, mu=0.0), 0)
        etas = tr.column("eta")
        assert etas[0] == 0.04 and etas[-1] < 0.04

    def test_adam_method(self):
        p, o = make_noisy_quadratic(5, 0.5, 2.0, 0.1)
        tr = run(p, o, cfg("constant", 0.05, 50, method="adam", adam=AdamParams()), 0)
        assert tr.completed and tr.final_train_loss < tr.rows[0].train_loss

    def test_fingerprint_depends_on_config(self):
        assert cfg(eta0=0.1).fingerprint() != cfg(eta0=0.2).fingerprint()
        assert cfg(eta0=0.1).fingerprint() == cfg(eta0=0.1).fingerprint()

    def test_config_validation(self):
        with pytest.raises(DomainError):
            cfg(method="lbfgs")
        with pytest.raises(DomainError):
            cfg(seeds=())

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_sampled_iterate_has_mass(self, seed):
        p, o = make_noisy_quadratic(3, 0.5, 2.0, 0.2)
        tr = run(p, o, cfg("logarithmic", 0.1, 8), seed)
        assert 1 <= tr.sampled_iterate < 8  # epoch T carries zero step


class TestGridSearch:
    def test_single_point(self):
        p, o = quad([2.0])
        res = grid_search(p, o, cfg(T=10), [0.3], fine_radius=0.0)
        assert res.best_eta0 == 0.3 and len(res.table) == 1

    def test_quadratic_optimum(self):
        L = 3.0
        p, o = quad([L])
        res = grid_search(p, o, cfg(T=5), COARSE_GRID, 0.1, 0.01)
        assert abs(res.best_eta0 - 1 / L) <= 0.01
        assert res.best_eta0 == min(res.table, key=lambda r: r["mean_val_loss"])["eta0"]

    def test_winner_is_brute_force_min(self):
        p, o = make_noisy_quadratic(5, 0.2, 5.0, 0.5)
        res = grid_search(p, o, cfg("logarithmic", 1.0, 20, seeds=(0, 1)), [0.01, 0.1, 0.3], 0.05, 0.025)
        brute = min(res.table, key=lambda r: (r["mean_val_loss"], r["eta0"]))
        assert res.best_eta0 == brute["eta0"]
        assert res.ranked()[0]["eta0"] == res.best_eta0
        assert {r["stage"] for r in res.table} == {1, 2}

    def test_all_diverged(self):
        p, o = quad([10.0])
        with pytest.raises(NoWinnerError):
            grid_search(p, o, cfg(T=200), [1.0, 2.0], 0.0)

    def test_empty_grid(self):
        p, o = quad([1.0])
        with pytest.raises(DomainError):
            grid_search(p, o, cfg(), [])
