import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlsched.classic import forward_substitution, residuals, solve_time_invariant
from dlsched.model import NetworkSpec

from helpers import random_spec


def test_table_two_values():
    spec = NetworkSpec((1.0,) * 4, (1.1, 1.2, 1.3), 4.0, 1.0)
    s = solve_time_invariant(spec)
    assert s.finish_time == pytest.approx(1.4070, abs=5e-5)
    assert s.fractions == pytest.approx((0.3517, 0.2759, 0.2122, 0.1602), abs=5e-5)


def test_two_processor_hand_solve():
    s = solve_time_invariant(NetworkSpec((1.0, 1.0), (1.0,), 1.0, 1.0))
    assert s.fractions == pytest.approx((2 / 3, 1 / 3))
    assert s.finish_time == pytest.approx(2 / 3)
    assert s.stage_times == pytest.approx((1 / 3,))


def test_free_link_splits_evenly():
    s = solve_time_invariant(NetworkSpec((1.0, 1.0), (1e-9,), 1.0, 1.0))
    assert s.fractions == pytest.approx((0.5, 0.5), abs=1e-8)


def test_forward_substitution_homogeneous():
    a = forward_substitution((1.0, 2.0, 3.0), (0.5, 0.7), 2.0, 1.0)
    b = forward_substitution((2.0, 4.0, 6.0), (1.0, 1.4), 2.0, 1.0)
    assert b.fractions == pytest.approx(a.fractions)
    assert b.finish_time == pytest.approx(2 * a.finish_time)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_solution_invariants(seed):
    spec = random_spec(np.random.default_rng(seed), 10)
    s = solve_time_invariant(spec)
    assert s.fraction_sum == pytest.approx(1.0, abs=1e-12)
    assert all(0 < a < 1 for a in s.fractions) or spec.worker_count == 0
    times = (0.0,) + s.stage_times + (s.finish_time,)
    assert all(b >= a for a, b in zip(times, times[1:]))
    assert max(abs(r) for r in residuals(spec, s)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.01, 3.0))
def test_slower_worker_gets_less(seed, factor):
    spec = random_spec(np.random.default_rng(seed), 6)
    s = solve_time_invariant(spec)
    w = list(spec.base_w)
    w[-1] *= factor
    slower = solve_time_invariant(NetworkSpec(tuple(w), spec.base_z, spec.t_cp, spec.t_cm))
    assert slower.fractions[-1] < s.fractions[-1]
    assert slower.finish_time >= s.finish_time
