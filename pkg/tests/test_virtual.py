import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from phycache.analysis import brute_force_cache_oracle, brute_force_control_oracle
from phycache.virtual import (CacheState, ControlDecision, VipState, check_placement,
                              drift_upper_bound, fast_control, one_step_objective, place_cache,
                              update_vip_queues)


def _dec(n, k, mode=1, mu_a=None, mu_b=None, mu_ng=None):
    z = np.zeros((n, k))
    return ControlDecision(mode, z if mu_a is None else np.asarray(mu_a, float),
                           z if mu_b is None else np.asarray(mu_b, float),
                           z if mu_ng is None else np.asarray(mu_ng, float))


# -- queue recursion -----------------------------------------------------------

def test_zero_rates_and_arrivals_leave_state_unchanged():
    st0 = VipState(np.array([[1.0, 2.0]]), np.array([[3.0, 0.5]]))
    out = update_vip_queues(st0, _dec(1, 2), np.zeros((1, 2)), np.zeros((1, 2)), [1.0])
    np.testing.assert_array_equal(out.user, st0.user)
    np.testing.assert_array_equal(out.bs, st0.bs)
    assert out.t == st0.t + 1


def test_user_queue_clamps_before_adding_arrivals():
    st0 = VipState(np.array([[2.0]]), np.zeros((1, 1)))
    out = update_vip_queues(st0, _dec(1, 1, 1, mu_a=[[5.0]]), np.array([[1]]),
                            np.zeros((1, 1)), [0.0])
    assert out.user[0, 0] == 1.0


def test_bs_queue_outer_clamp():
    st0 = VipState(np.zeros((1, 1)), np.array([[3.0]]))
    dec = _dec(1, 1, 1, mu_a=[[2.0]], mu_ng=[[1.0]])
    out = update_vip_queues(st0, dec, np.zeros((1, 1)), np.ones((1, 1), np.int8), [4.0])
    # ((3 - 1)^+ + 2 - 4)^+ = 0
    assert out.bs[0, 0] == 0.0
    # without the cache the same step ends at 4
    out = update_vip_queues(st0, dec, np.zeros((1, 1)), np.zeros((1, 1), np.int8), [4.0])
    assert out.bs[0, 0] == 4.0


def test_comp_inflow_reaches_every_bs_coordinated_only_the_serving_one():
    st0 = VipState.zeros(3, 2)
    mu = np.array([[1.0, 0], [0, 2.0], [0.5, 0]])
    comp = update_vip_queues(st0, _dec(3, 2, 1, mu_a=mu), np.zeros((3, 2)),
                             np.zeros((3, 2)), np.zeros(3))
    np.testing.assert_allclose(comp.bs, np.tile([1.5, 2.0], (3, 1)))
    coord = update_vip_queues(st0, _dec(3, 2, 0, mu_b=mu), np.zeros((3, 2)),
                              np.zeros((3, 2)), np.zeros(3))
    np.testing.assert_allclose(coord.bs, mu)


@settings(max_examples=200, deadline=None)
@given(data=st.data(), n=st.integers(1, 3), k=st.integers(1, 4), mode=st.integers(0, 1))
def test_queues_stay_non_negative(data, n, k, mode):
    fl = st.floats(0, 10, allow_nan=False)
    user = data.draw(arrays(float, (n, k), elements=fl))
    bs = data.draw(arrays(float, (n, k), elements=fl))
    mu = data.draw(arrays(float, (n, k), elements=fl))
    ng = data.draw(arrays(float, (n, k), elements=fl))
    a = data.draw(arrays(np.int64, (n, k), elements=st.integers(0, 5)))
    s = data.draw(arrays(np.int8, (n, k), elements=st.integers(0, 1)))
    r = data.draw(arrays(float, (n,), elements=fl))
    dec = _dec(n, k, mode, mu_a=mu if mode else None, mu_b=None if mode else mu, mu_ng=ng)
    out = update_vip_queues(VipState(user, bs), dec, a, s, r)
    assert np.all(out.user >= 0) and np.all(out.bs >= 0)
    # a literal scalar transcription agrees entry by entry
    for j in range(n):
        for kk in range(k):
            exp_u = max(user[j, kk] - mu[j, kk], 0.0) + a[j, kk]
            assert out.user[j, kk] == pytest.approx(exp_u)
            inflow = mu[:, kk].sum() if mode else mu[j, kk]
            exp_b = max(max(bs[j, kk] - ng[j, kk], 0.0) + inflow - r[j] * s[j, kk], 0.0)
            assert out.bs[j, kk] == pytest.approx(exp_b, abs=1e-9)


# -- cache placement -------------------------------------------------------------

def test_swap_example():
    v = np.array([[5.0, 3.0, 1.0]])
    cached = np.array([[0, 1, 0]], np.int8)
    p = place_cache(v, cached, 1, W=1.0, T=1, gamma=2.0, r=[1.0])   # threshold 1
    np.testing.assert_array_equal(p, [[1, -1, 0]])


def test_zero_backlog_places_nothing():
    p = place_cache(np.zeros((2, 5)), np.zeros((2, 5), np.int8), 2, 10.0, 5, 1.0, [1.0, 1.0])
    assert not p.any()


def test_threshold_is_inclusive():
    v = np.array([[3.0, 1.0]])
    cached = np.array([[0, 1]], np.int8)
    # benefit (3 - 1) * 1 = 2 = W*gamma/(2T)
    p = place_cache(v, cached, 1, W=4.0, T=1, gamma=1.0, r=[1.0])
    np.testing.assert_array_equal(p, [[1, -1]])
    p = place_cache(v, cached, 1, W=4.0001, T=1, gamma=1.0, r=[1.0])
    assert not p.any()


def test_free_slots_fill_without_eviction():
    v = np.array([[4.0, 3.0, 0.1, 2.0]])
    p = place_cache(v, np.zeros((1, 4), np.int8), 2, W=2.0, T=1, gamma=1.0, r=[1.0])
    np.testing.assert_array_equal(p, [[1, 1, 0, 0]])


def test_single_add_changes_bound_by_cost_minus_drain():
    v = np.array([[0.0, 2.5]])
    s = np.zeros((1, 2), np.int8)
    p = np.array([[0, 1]], np.int8)
    base = drift_upper_bound(v, s, np.zeros_like(p), 7.0, 10, 1.5, [2.0])
    assert base == 0.0
    assert drift_upper_bound(v, s, p, 7.0, 10, 1.5, [2.0]) == pytest.approx(7 * 1.5 - 2 * 10 * 2.5 * 2)


def _cache_instance(draw, max_k=10, max_lc=3):
    n = draw(st.integers(1, 2))
    k = draw(st.integers(1, max_k))
    cap = draw(st.integers(0, min(max_lc, k)))
    v = draw(arrays(float, (n, k), elements=st.integers(0, 100).map(float)))
    s = np.zeros((n, k), np.int8)
    for b in range(n):
        held = draw(st.lists(st.integers(0, k - 1), max_size=cap, unique=True))
        s[b, held] = 1
    W = draw(st.sampled_from([0.0, 1.0, 10.0, 100.0, 1000.0]))
    T = draw(st.integers(1, 50))
    r = draw(st.sampled_from([0.5, 1.0, 3.0]))
    return v, s, cap, W, T, r


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_placement_is_optimal_and_feasible(data):
    v, s, cap, W, T, r = _cache_instance(data.draw)
    p = place_cache(v, s, cap, W, T, 1.0, r)
    check_placement(s, p, cap)
    got = drift_upper_bound(v, s, p, W, T, 1.0, r)
    best = brute_force_cache_oracle(v, s, cap, W, T, 1.0, r).objective
    assert got == best


def test_cache_state_apply_tracks_cost_and_rejects_bad_actions():
    c = CacheState.empty(1, 3, 1)
    assert c.apply(np.array([[1, 0, 0]]), gamma=2.0) == 2.0
    assert c.cost == 2.0 and c.frame == 1
    with pytest.raises(ValueError):
        c.apply(np.array([[1, 0, 0]]))
    with pytest.raises(ValueError):
        c.apply(np.array([[0, 1, 0]]))          # would exceed the size
    with pytest.raises(ValueError):
        c.apply(np.array([[0, -1, 0]]))         # nothing to evict


# -- fast control ----------------------------------------------------------------

def test_backhaul_serves_longest_bs_queue():
    vip = VipState(np.zeros((1, 3)), np.array([[5.0, 3.0, 1.0]]))
    dec = fast_control(vip, [1.0], [1.0], 2.0)
    np.testing.assert_array_equal(dec.mu_ng, [[2.0, 0, 0]])


def test_zero_user_backlog_picks_comp_and_serves_nothing():
    vip = VipState(np.zeros((2, 2)), np.ones((2, 2)))
    dec = fast_control(vip, [1.0, 1.0], [0.5, 0.5], 1.0)
    assert dec.mode == 1
    assert dec.delta_a == dec.delta_b == 0.0
    assert not dec.mu_a.any() and not dec.mu_b.any()


def test_mode_selection_example():
    vip = VipState(np.array([[10.0, 0.0], [0.0, 8.0]]), np.ones((2, 2)))
    dec = fast_control(vip, [1.0, 1.0], [0.5, 0.5], 1.0)
    assert dec.delta_a == pytest.approx(14.0)
    assert dec.delta_b == pytest.approx(8.0)
    assert dec.mode == 1
    np.testing.assert_array_equal(dec.mu_a, [[1.0, 0.0], [0.0, 1.0]])
    assert not dec.mu_b.any()
    np.testing.assert_array_equal(dec.user_rates(), [1.0, 1.0])


def test_coordinated_wins_when_bs_backlog_blocks_comp():
    vip = VipState(np.array([[4.0]]), np.array([[3.0]]))
    vip = VipState(np.array([[4.0], [0.0]]), np.array([[0.0], [3.0]]))
    dec = fast_control(vip, [1.0, 1.0], [1.0, 1.0], 0.0)
    # CoMP weight 4 - 3 = 1, coordinated weight 4 - 0 = 4
    assert dec.mode == 0
    np.testing.assert_array_equal(dec.mu_b, [[1.0], [0.0]])
    assert not dec.mu_a.any()


def test_single_mode_restriction():
    vip = VipState(np.array([[10.0, 0.0], [0.0, 8.0]]), np.ones((2, 2)))
    dec = fast_control(vip, [1.0, 1.0], [0.5, 0.5], 1.0, allow_comp=False)
    assert dec.mode == 0 and dec.mu_b.sum() == 1.0


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_fast_control_is_optimal(data):
    n = data.draw(st.integers(1, 3))
    k = data.draw(st.integers(1, 4))
    el = st.integers(0, 20).map(float)
    vip = VipState(data.draw(arrays(float, (n, k), elements=el)),
                   data.draw(arrays(float, (n, k), elements=el)))
    rates = st.integers(0, 8).map(lambda x: x / 4)
    comp = data.draw(arrays(float, (n,), elements=rates))
    coord = data.draw(arrays(float, (n,), elements=rates))
    R_d = data.draw(rates)
    dec = fast_control(vip, comp, coord, R_d)
    assert not (dec.mu_a.any() and dec.mu_b.any())
    assert np.all(dec.mu_ng.sum(axis=1) <= R_d + 1e-12)
    oracle = brute_force_control_oracle(vip, comp, coord, R_d)
    assert one_step_objective(vip, dec) == oracle.objective
