import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phycache import SimConfig, UnitContext, build_topology
from phycache.core import ConfigError, RngStreams
from phycache.phy import (SingularChannelError, amplitude_gain, channel_block, comp_precoder_block,
                          comp_se_block, comp_zf_rates, coordinated_precoders, coordinated_se,
                          coordinated_se_block, db_to_linear, dof_summary, pathloss_db,
                          rate_block, sample_channels, schedule_block)


def _topo(n=3, **kw):
    return build_topology(SimConfig(n_pairs=n, user_placement="fixed", user_offset_m=100.0, **kw))


def _iid(n, l_t, seed, slots=1):
    rng = np.random.default_rng(seed)
    shape = (slots, n, n, 1, l_t)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def test_pathloss_reference_points():
    assert pathloss_db(1000.0) == pytest.approx(140.7)
    assert pathloss_db(250.0) == pytest.approx(118.604, abs=1e-3)
    assert amplitude_gain(1000.0) ** 2 == pytest.approx(10 ** -14.07)


def test_db_to_linear():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(30.0) == pytest.approx(1000.0)


def test_channel_samples_are_unit_variance_without_pathloss():
    topo = _topo()
    H = channel_block(topo, RngStreams(1).get("ch"), 4000, pathloss=False)
    assert H.shape == (4000, 3, 3, 1, 2)
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(H)) < 0.02


def test_channel_pathloss_scales_power():
    topo = _topo()
    H = channel_block(topo, RngStreams(1).get("ch"), 20000)
    gain = amplitude_gain(topo.distances) ** 2
    emp = (np.abs(H) ** 2).mean(axis=(0, 3, 4))
    np.testing.assert_allclose(emp / gain, 1.0, atol=0.05)


def test_channels_deterministic_under_seed():
    topo = _topo()
    a = sample_channels(topo, RngStreams(3).get("ch"))
    b = sample_channels(topo, RngStreams(3).get("ch"))
    assert a.H.tobytes() == b.H.tobytes()


def test_comp_zero_forcing_nulls_leakage_and_meets_power():
    H = _iid(3, 2, 0, slots=100)
    P = 1e4
    V, xi2 = comp_precoder_block(H, P)
    hc = H[:, :, :, 0, :].reshape(100, 3, 6)
    eff = hc @ V
    diag = np.einsum("sjj->sj", eff)
    np.testing.assert_allclose(np.abs(diag) ** 2, np.repeat(xi2[:, None], 3, axis=1), rtol=1e-9)
    off = eff - np.einsum("sj,jk->sjk", diag, np.eye(3))
    assert np.max(np.abs(off) ** 2 / xi2[:, None, None]) < 1e-9
    per_bs = (np.abs(V.reshape(100, 3, 2, 3)) ** 2).sum(axis=(2, 3))
    assert np.all(per_bs <= P * (1 + 1e-9))
    np.testing.assert_allclose(per_bs.max(axis=1), P, rtol=1e-9)


def test_comp_two_pairs_matches_pseudo_inverse_oracle():
    H = _iid(2, 1, 5)[0]
    hc = H[:, :, 0, 0]                       # 2x2, one antenna per BS
    inv = np.linalg.inv(hc)
    # per-BS power of the unscaled ZF precoder is the squared row norm of H^-1
    omega = (np.abs(inv) ** 2).sum(axis=1)
    P = 100.0
    expected = math.log2(1 + P / omega.max())
    se = comp_se_block(H[None], P)[0]
    np.testing.assert_allclose(se, expected, rtol=1e-12)


def test_single_pair_comp_is_matched_filter():
    H = _iid(1, 2, 7)[0]
    P = 10.0
    se = comp_se_block(H[None], P)[0, 0]
    assert se == pytest.approx(math.log2(1 + P * np.sum(np.abs(H) ** 2)))
    coord = coordinated_se(H, [0], P)[0]
    assert coord == pytest.approx(se)


def test_comp_rank_deficient_channel_raises():
    H = np.ones((1, 2, 2, 1, 1), dtype=complex)
    with pytest.raises(SingularChannelError):
        comp_precoder_block(H, 1.0)


def test_coordinated_beams_null_the_other_scheduled_user():
    for seed in range(100):
        H = _iid(3, 2, seed)[0]
        sched = [0, 2]
        beams = coordinated_precoders(H, sched)
        assert np.allclose(beams[1], 0)
        for j in sched:
            assert np.linalg.norm(beams[j]) == pytest.approx(1.0)
            other = 2 if j == 0 else 0
            leak = abs(H[other, j, 0, :] @ beams[j]) ** 2
            assert leak <= 1e-9 * np.sum(np.abs(H[other, j]) ** 2)


def test_unscheduled_users_get_nothing():
    H = _iid(3, 2, 9)[0]
    se = coordinated_se(H, [1], 10.0)
    assert se[0] == 0 and se[2] == 0 and se[1] > 0


def test_schedule_larger_than_antennas_rejected():
    H = _iid(3, 2, 0)[0]
    with pytest.raises(ConfigError):
        coordinated_precoders(H, [0, 1, 2])
    with pytest.raises(ConfigError):
        coordinated_precoders(H, [1, 1])


def test_block_coordinated_matches_per_slot():
    H = _iid(3, 2, 11, slots=40)
    for m in (1, 2):
        sched = schedule_block(np.random.default_rng(0), 40, 3, m)
        blk = coordinated_se_block(H, sched, 50.0)
        ref = np.stack([coordinated_se(H[i], sched[i], 50.0) for i in range(40)])
        np.testing.assert_allclose(blk, ref, rtol=1e-10, atol=1e-12)


def test_block_comp_matches_single_channel():
    topo = _topo()
    ch = sample_channels(topo, RngStreams(2).get("ch"))
    np.testing.assert_allclose(comp_zf_rates(ch, 1e14), comp_se_block(ch.H[None], 1e14)[0])


def test_schedule_block_draws_distinct_sorted_users():
    s = schedule_block(np.random.default_rng(0), 500, 5, 2)
    assert s.shape == (500, 2)
    assert np.all(s[:, 0] < s[:, 1])
    assert set(np.unique(s)) == set(range(5))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), lo=st.floats(0, 40), step=st.floats(1, 20))
def test_rates_increase_with_power(seed, lo, step):
    H = _iid(3, 2, seed)
    a = comp_se_block(H, db_to_linear(lo))
    b = comp_se_block(H, db_to_linear(lo + step))
    assert np.all(b > a)
    sched = np.array([[0, 1]])
    ca = coordinated_se_block(H, sched, db_to_linear(lo))
    cb = coordinated_se_block(H, sched, db_to_linear(lo + step))
    assert np.all(cb[0, :2] >= ca[0, :2])


def test_rate_block_units():
    topo = _topo()
    ctx = UnitContext(8e5, 20, 10e6, 0.002)
    streams = RngStreams(0)
    comp, coord, sched = rate_block(topo, ctx, db_to_linear(141.0), streams.get("c"),
                                    streams.get("s"), 30)
    assert comp.shape == coord.shape == (30, 3)
    assert sched.shape == (30, 2)
    ch_rng = RngStreams(0).get("c")
    H = channel_block(topo, ch_rng, 30)
    se = comp_se_block(H, db_to_linear(141.0))
    np.testing.assert_allclose(comp, se * 10e6 * 0.002 / 8e5)
    # users outside the schedule get zero coordinated rate
    assert np.all((coord > 0).sum(axis=1) == 2)


def test_dof_summary():
    d = dof_summary(_topo(3), 2)
    assert d.d_a == 1.0 and d.d_b == pytest.approx(2 / 3)
    assert dof_summary(_topo(1), 2).d_b == 1.0
