import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gramterp.channel import SystemConfig, gen_td_channel, td_to_fd
from gramterp.grammat import (GramMethod, IllConditionedWarning, plan_from_base_points,
                              plan_uniform_base_points)
from gramterp.opcount import (OpCounter, complexity_report, cost_0th, cost_1st,
                              cost_1st_corrected, cost_bf, cost_detection, cost_exact,
                              cost_gram, exact_break_even, instrumented_count)


def fd_for(N, B, U, L=2, W=128, start=0, seed=0):
    c = SystemConfig(B, U, W, L, range(start, start + N))
    return c, td_to_fd(gen_td_channel(c, np.random.default_rng(seed)), c)


# --- formulas ---------------------------------------------------------------

def test_cost_bf_full_size_value():
    assert cost_bf(1200, 128, 8) == 19_660_800


def test_cost_bf_decompositions():
    assert cost_bf(37, 5, 1) == 2 * 37 * 5
    B, U = 9, 6
    assert cost_bf(1, B, U) == 4 * B * U * (U - 1) // 2 + 2 * B * U


def test_cost_exact_full_size_point():
    # 2*287*(1200-287+128)*64 + 2*287*(1200-287)*8
    assert cost_exact(1200, 287, 128, 8) == 38_242_176 + 4_192_496 == 42_434_672


def test_cost_exact_boundary():
    assert cost_exact(300, 300, 16, 4) == cost_bf(300, 16, 4)
    with pytest.raises(ValueError):
        cost_exact(10, 11, 4, 2)


def test_exact_break_even_exhaustive():
    B, U, N = 128, 8, 1200
    cheaper = [P for P in range(1, N) if cost_exact(N, P, B, U) < cost_bf(N, B, U)]
    assert cheaper == list(range(1, exact_break_even(B, U)))
    assert exact_break_even(B, U) == -(-1024 // 9) == 114


@given(st.integers(1, 64), st.integers(1, 16), st.integers(2, 400))
def test_break_even_property(B, U, N):
    thr = exact_break_even(B, U)
    for P in range(1, N):
        assert (cost_exact(N, P, B, U) < cost_bf(N, B, U)) == (P < thr)


def test_cost_0th_values():
    assert cost_0th(300, 128, 8) == 4_915_200
    assert cost_0th(1200, 128, 8) == cost_bf(1200, 128, 8)


@given(st.integers(1, 2000), st.data())
def test_cost_0th_ratio(N, data):
    P = data.draw(st.integers(1, N))
    from fractions import Fraction
    assert Fraction(cost_0th(P, 16, 4), cost_bf(N, 16, 4)) == Fraction(P, N)


def test_cost_1st_values():
    assert cost_1st(1200, 300, 128, 8) == 5_044_800
    assert cost_1st(1200, 1200, 128, 8) == cost_0th(1200, 128, 8) == cost_bf(1200, 128, 8)


@given(st.integers(2, 500), st.integers(1, 32), st.integers(1, 8), st.data())
def test_cost_1st_identities(N, B, U, data):
    P = data.draw(st.integers(1, N))
    diff = cost_1st(N, P, B, U) - cost_0th(P, B, U)
    assert diff == 2 * (N - P) * U * (U + 1)
    assert diff >= 0 and (diff == 0) == (P == N)


def test_costs_monotone():
    assert all(cost_0th(P + 1, 8, 4) > cost_0th(P, 8, 4) for P in range(1, 50))
    assert all(cost_bf(N + 1, 8, 4) > cost_bf(N, 8, 4) for N in range(1, 50))
    assert all(cost_1st(100, P + 1, 8, 4) > cost_1st(100, P, 8, 4) for P in range(1, 99))


def test_cost_gram_dispatch():
    assert cost_gram("bf", 100, 10, 8, 4) == cost_bf(100, 8, 4)
    assert cost_gram("exact", 100, 10, 8, 4) == cost_exact(100, 10, 8, 4)
    assert cost_gram("order0", 100, 10, 8, 4) == cost_0th(10, 8, 4)
    assert cost_gram("order1", 100, 10, 8, 4) == cost_1st(100, 10, 8, 4)


def test_detection_total_half_of_bf_at_quarter():
    N, B, U = 1200, 128, 8
    bf_total = cost_detection("bf", N, N, B, U)
    for m in ("order0", "order1"):
        assert cost_detection(m, N, N // 4, B, U) < bf_total / 2


# --- counters -------------------------------------------------------------------

def test_op_counter_merge():
    a, b = OpCounter(), OpCounter()
    a.add(3)
    b.add(4)
    assert a.merge(b).count == 7 and a.count == 3


def test_counter_bf_full_size_scale():
    c, fd = fd_for(1200, 128, 8, L=144, W=2048, start=424)
    assert instrumented_count("bf", fd) == 19_660_800


def test_counter_exact_full_size_point():
    c, fd = fd_for(1200, 128, 8, L=144, W=2048, start=424)
    plan = plan_uniform_base_points(c.active_set, 287)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        assert instrumented_count("exact", fd, plan, 144, 2048) == 42_434_672


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_counters_match_formulas(seed):
    rng = np.random.default_rng(seed)
    B = int(rng.integers(1, 17))
    U = int(rng.integers(1, B + 1))
    L = int(rng.integers(1, 5))
    N = int(rng.integers(2 * L, 90))
    P = int(rng.integers(1, N + 1))
    c, fd = fd_for(N, B, U, L=L, start=int(rng.integers(0, 128 - N)), seed=seed)
    plan = plan_uniform_base_points(c.active_set, P)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        for m in GramMethod:
            rep = complexity_report(m, fd, None if m is GramMethod.BRUTE_FORCE else plan, L, 128)
            assert rep.matches
            if m is not GramMethod.ORDER1:
                assert rep.measured == rep.analytical


def test_counter_order1_edge_correction():
    c, fd = fd_for(60, 6, 3)
    plan = plan_from_base_points(c.active_set, [5, 20, 41])
    edges = plan.num_edge_targets
    assert edges == 5 + 18
    rep = complexity_report("order1", fd, plan)
    assert rep.analytical == cost_1st(60, 3, 6, 3)
    assert rep.measured == rep.corrected == cost_1st_corrected(60, 3, 6, 3, edges)
    assert rep.analytical - rep.measured == 2 * edges * 3 * 4


def test_report_ratio():
    c, fd = fd_for(40, 8, 2)
    plan = plan_uniform_base_points(c.active_set, 10)
    rep = complexity_report("order0", fd, plan, measure=False)
    assert rep.measured is None and rep.ratio_vs_bf == 0.25
