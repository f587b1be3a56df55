import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logstep.errors import DomainError, InputError
from logstep.schedules import (
    KINDS,
    MONOTONE_KINDS,
    PlateauState,
    StepSchedule,
    constant_step,
    cosine_step,
    default_milestones,
    exponential_step,
    inv_sqrt_t_step,
    inv_t_step,
    log_step,
    plateau_update,
    restart_table,
    schedule_table,
    stagewise_step,
    warm_restart_index,
)


class TestLogStep:
    def test_endpoints_exact(self):
        assert log_step(1, 100, 1.0) == 1.0
        assert log_step(100, 100, 1.0) == 0.0

    def test_half_value_exact(self):
        assert log_step(10, 100, 1.0) == 0.5

    @given(T=st.integers(2, 10_000), eta0=st.floats(1e-6, 1e3))
    def test_endpoints_any_horizon(self, T, eta0):
        assert log_step(1, T, eta0) == eta0
        assert log_step(T, T, eta0) == 0.0

    @pytest.mark.parametrize("t,T", [(0, 10), (11, 10), (1, 1), (-3, 5)])
    def test_domain(self, t, T):
        with pytest.raises(DomainError):
            log_step(t, T, 1.0)

    def test_matches_formula(self):
        for t in (2, 7, 33, 99):
            assert log_step(t, 100, 0.3) == pytest.approx(0.3 * (1 - math.log(t) / math.log(100)), rel=1e-15)


class TestOtherSteps:
    def test_cosine(self):
        assert cosine_step(100, 100, 0.25) == 0.0
        assert cosine_step(50, 100, 1.0) == 0.5

    def test_cosine_domain(self):
        with pytest.raises(DomainError):
            cosine_step(0, 100, 1.0)

    def test_constant(self):
        assert all(StepSchedule("constant", 0.07, 50).step(t) == 0.07 for t in range(1, 51))
        assert constant_step(0.07) == 0.07

    def test_inv_t(self):
        assert inv_t_step(1, 0.1, 0.00023) == 0.1 / 1.00023

    def test_inv_sqrt_t(self):
        assert inv_sqrt_t_step(4, 1.0, 0.5) == 0.5

    @pytest.mark.parametrize("fn", [inv_t_step, inv_sqrt_t_step])
    def test_negative_alpha(self, fn):
        with pytest.raises(DomainError):
            fn(3, 1.0, -0.1)

    def test_exponential(self):
        assert exponential_step(100, 100, 1.0, 1.0) == pytest.approx(0.01, rel=1e-14)
        assert exponential_step(50, 100, 1.0, 1.0) == pytest.approx(0.1, rel=1e-14)
        assert exponential_step(0, 100, 0.7, 1.0, allow_zero=True) == 0.7

    def test_exponential_non_decaying(self):
        with pytest.raises(DomainError):
            exponential_step(3, 100, 1.0, 100.0)
        with pytest.raises(DomainError):
            StepSchedule("exponential", 1.0, 10, beta=12.0)


class TestStagewise:
    def test_examples(self):
        assert stagewise_step(1, 0.2, 0.1, [50]) == 0.2
        assert stagewise_step(50, 0.2, 0.1, [50]) == pytest.approx(0.02, rel=1e-15)

    def test_two_milestones_against_loop(self):
        eta = 0.07
        for m in (34, 67):
            if m <= 70:
                eta *= 0.1
        assert stagewise_step(70, 0.07, 0.1, [34, 67]) == pytest.approx(eta, rel=1e-15)
        assert eta == pytest.approx(0.0007, rel=1e-12)

    def test_default_milestones(self):
        assert default_milestones(100, 1) == (50,)
        assert default_milestones(100, 2) == (34, 67)
        assert default_milestones(20, 0) == ()

    @pytest.mark.parametrize("ms", [(5, 5), (7, 3), (1,), (10,)])
    def test_bad_milestones(self, ms):
        with pytest.raises(DomainError):
            StepSchedule("stagewise", 0.1, 10, alpha=0.1, milestones=ms)


class TestStepSchedule:
    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            StepSchedule("warmup", 0.1, 10)

    @pytest.mark.parametrize("eta0", [0.0, -1.0, math.inf, math.nan])
    def test_bad_eta0(self, eta0):
        with pytest.raises(DomainError):
            StepSchedule("constant", eta0, 10)

    def test_table_examples(self):
        assert schedule_table(StepSchedule("constant", 1.0, 3)).tolist() == [1.0, 1.0, 1.0]
        assert schedule_table(StepSchedule("logarithmic", 1.0, 2)).tolist() == [1.0, 0.0]

    def test_log_table_sum(self):
        # 100 - ln(100!)/ln(100), computed independently via lgamma
        expected = 100 - math.lgamma(101) / math.log(100)
        got = math.fsum(schedule_table(StepSchedule("logarithmic", 1.0, 100)))
        assert got == pytest.approx(expected, rel=1e-13)
        assert got == pytest.approx(21.015, abs=5e-4)

    @pytest.mark.parametrize("kind", MONOTONE_KINDS)
    def test_monotone_exhaustive(self, kind):
        for T in (2, 3, 10, 100, 1000, 10_000):
            sched = StepSchedule(kind, 1.0, T, alpha=0.01, beta=1.0)
            tab = schedule_table(sched)
            assert np.all(np.diff(tab) <= 0), (kind, T)

    def test_log_overtakes_cosine(self):
        T = 100
        log = schedule_table(StepSchedule("logarithmic", 1.0, T))
        cos = schedule_table(StepSchedule("cosine", 1.0, T))
        above = log[: T - 1] > cos[: T - 1]
        # smallest t* with log > cos on every t* <= t < T
        t_star = T - int(np.argmin(above[::-1])) if not above.all() else 1
        assert t_star == 91
        assert np.all(log[t_star - 1:T - 1] > cos[t_star - 1:T - 1])
        assert log[t_star - 2] <= cos[t_star - 2]

    def test_with_eta0(self):
        s = StepSchedule("logarithmic", 1.0, 20).with_eta0(0.5)
        assert s.eta0 == 0.5 and s.step(1) == 0.5

    def test_step_out_of_range(self):
        with pytest.raises(DomainError):
            StepSchedule("constant", 1.0, 5).step(6)


class TestWarmRestart:
    def test_index_examples(self):
        assert warm_restart_index(0, 30) == (0, 1)
        assert warm_restart_index(32, 30) == (1, 3)

    @given(k=st.integers(0, 10**6), T=st.integers(2, 1000))
    def test_index_roundtrip(self, k, T):
        i, t = warm_restart_index(k, T)
        assert 1 <= t <= T and i * T + t - 1 == k

    def test_negative_counter(self):
        with pytest.raises(DomainError):
            warm_restart_index(-1, 10)

    @pytest.mark.parametrize("T", [30, 70, 100, 200])
    def test_sawtooth(self, T):
        rows = restart_table(StepSchedule("logarithmic", 1.0, T), 3)
        assert len(rows) == 3 * T
        etas = [r[3] for r in rows]
        for i in range(3):
            assert etas[i * T] == 1.0
            assert etas[i * T + T - 1] == 0.0
        assert [r[0] for r in rows] == list(range(1, 3 * T + 1))


class TestPlateau:
    def test_improving_stream(self):
        s = PlateauState(current_eta=0.04, patience=3)
        for m in np.linspace(1.0, 0.1, 40):
            s = plateau_update(s, float(m), 0.5)
        assert s.current_eta == 0.04 and s.reductions == 0

    def test_flat_stream_reduces(self):
        s = PlateauState(current_eta=0.04, patience=5)
        s = plateau_update(s, 1.0, 0.5)
        for _ in range(5):
            s = plateau_update(s, 1.0, 0.5)
        assert s.current_eta == 0.04
        s = plateau_update(s, 1.0, 0.5)
        assert s.current_eta == 0.02 and s.epochs_since_improvement == 0

    def test_threshold_edge_is_not_improvement(self):
        s = PlateauState(current_eta=1.0, best_metric=1.0, threshold=0.5)
        s = plateau_update(s, 0.5, 0.5)
        assert s.best_metric == 1.0 and s.epochs_since_improvement == 1

    def test_non_finite_metric(self):
        with pytest.raises(InputError):
            plateau_update(PlateauState(current_eta=1.0), math.nan, 0.5)

    def test_from_schedule(self):
        s = PlateauState.from_schedule(StepSchedule("plateau", 0.04, 20, alpha=0.5, patience=4))
        assert (s.current_eta, s.patience) == (0.04, 4)


@settings(max_examples=50)
@given(kind=st.sampled_from(KINDS), T=st.integers(2, 300), eta0=st.floats(1e-4, 10.0))
def test_table_nonnegative_and_bounded(kind, T, eta0):
    ms = default_milestones(T, 1) if kind == "stagewise" and T >= 4 else ()
    if kind == "stagewise" and not ms:
        kind = "constant"
    sched = StepSchedule(kind, eta0, T, alpha=0.5, beta=min(1.0, T / 2), milestones=ms)
    tab = schedule_table(sched)
    assert tab.shape == (T,)
    assert np.all(tab >= 0) and np.all(tab <= eta0)
