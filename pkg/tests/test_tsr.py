import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swiet_relay.channel import ChannelRealization, Geometry, Pairing, SystemConfig, decompose, generate_channel
from swiet_relay.oracle import grid_power_tsr
from swiet_relay.tsr import (
    TsrOptimizerSettings,
    alpha_grid,
    alternate_power_allocation,
    budget_multiplier,
    conditional_omega,
    conditional_varpi,
    g_of_alpha,
    highsnr_power_allocation,
    optimal_energy_beam,
    pair_subchannels,
    relay_power_budget,
    search_alpha,
    tsr_pair_rate,
    tsr_rate_at_alpha,
)

UNIT = SystemConfig(num_subcarriers=1, n_source=1, n_relay=1, n_dest=1,
                    noise_var_relay=1.0, noise_var_dest=1.0)


def _eig_from(h_s, h_r):
    return decompose(ChannelRealization(np.asarray(h_s, dtype=complex), np.asarray(h_r, dtype=complex)))


def _random(seed, power_dbm=30.0, k=4, n=2, phi=0.3):
    cfg = SystemConfig.from_db(power_dbm, num_subcarriers=k, n_source=n, n_relay=n, n_dest=n)
    return decompose(generate_channel(cfg, Geometry(phi=phi), seed), cfg), cfg


def _log_marginal(own, other, alloc):
    """Derivative of ln((1+x)(1+y)/(1+x+y)) in the allocation, x = own*alloc."""
    x = own * alloc
    return own / (1 + x) - own / (1 + x + other)


class TestEnergyBeam:
    def test_diagonal(self):
        eig = _eig_from([np.diag([2.0, 1.0])], [np.eye(2)])
        beam = optimal_energy_beam(eig)
        assert beam.subcarrier == 0
        assert beam.lambda_max == pytest.approx(4.0)
        np.testing.assert_allclose(np.abs(beam.vector), [1.0, 0.0], atol=1e-12)

    def test_argmax_subcarrier(self):
        eig = _eig_from([np.diag([2.0, 0.0]), np.diag([3.0, 0.0])], [np.eye(2)] * 2)
        assert optimal_energy_beam(eig).subcarrier == 1
        assert optimal_energy_beam(eig).lambda_max == pytest.approx(9.0)

    def test_tie_lowest_index(self):
        eig = _eig_from([np.eye(2), np.eye(2)], [np.eye(2)] * 2)
        assert optimal_energy_beam(eig).subcarrier == 0

    def test_zero_channel(self):
        eig = _eig_from([np.zeros((2, 2))], [np.eye(2)])
        assert optimal_energy_beam(eig).lambda_max == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_unit_norm_and_harvest(self, seed):
        eig, cfg = _random(seed)
        real = generate_channel(cfg, Geometry(), seed)
        beam = optimal_energy_beam(decompose(real))
        assert np.linalg.norm(beam.vector) == pytest.approx(1.0, abs=1e-10)
        h = real.h_source[beam.subcarrier]
        assert np.linalg.norm(h @ beam.vector) ** 2 == pytest.approx(beam.lambda_max, rel=1e-10)


class TestRelayBudget:
    def test_zero_alpha(self):
        assert relay_power_budget(0.0, 4.0, UNIT) == 0.0

    def test_one_third(self):
        assert relay_power_budget(1 / 3, 4.0, UNIT) == pytest.approx(4.0)

    def test_half(self):
        cfg = SystemConfig(source_power=2.0)
        assert relay_power_budget(0.5, 1.0, cfg) == pytest.approx(4.0)

    def test_efficiency_folded_in(self):
        cfg = SystemConfig(harvester_efficiency=0.5)
        assert relay_power_budget(0.5, 1.0, cfg) == pytest.approx(1.0)

    def test_alpha_one_is_domain_error(self):
        with pytest.raises(ValueError):
            relay_power_budget(1.0, 1.0, UNIT)


class TestPairing:
    def test_sorted_inputs(self):
        assert pair_subchannels([3, 2, 1], [9, 4, 1]) == Pairing.identity(3)

    def test_rank_match(self):
        # 1-based: 2 -> 3, 3 -> 1, 1 -> 2
        np.testing.assert_array_equal(pair_subchannels([1, 3, 2], [5, 4, 6]).perm, [1, 2, 0])

    def test_reversed_second_hop(self):
        np.testing.assert_array_equal(pair_subchannels([4, 3, 2, 1], [1, 2, 3, 4]).perm, [3, 2, 1, 0])

    def test_ties_stable(self):
        np.testing.assert_array_equal(pair_subchannels([1, 1, 1], [2, 2, 2]).perm, [0, 1, 2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pair_subchannels([1, 2], [1, 2, 3])

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=12), st.randoms(use_true_random=False))
    def test_ranks_align(self, gains_s, rnd):
        gains_r = [rnd.uniform(0, 100) for _ in gains_s]
        perm = pair_subchannels(gains_s, gains_r).perm
        s = np.asarray(gains_s)
        r = np.asarray(gains_r)[perm]
        # after pairing, the second-hop gains are ordered like the first-hop gains
        order = np.argsort(-s, kind="stable")
        assert np.all(np.diff(r[order]) <= 0)


class TestPairRate:
    def test_symmetric(self):
        assert tsr_pair_rate(1.0, 1.0, 1.0, 1.0, 1.0, UNIT) == pytest.approx(UNIT.bandwidth_hz / 2 * math.log2(4 / 3))

    def test_zero_source(self):
        assert tsr_pair_rate(0.0, 1.0, 1.0, 1.0, 1.0, UNIT) == 0.0

    def test_three_eight(self):
        assert tsr_pair_rate(1.0, 1.0, 3.0, 8.0, 1.0, UNIT) == pytest.approx(UNIT.bandwidth_hz / 2 * math.log2(3))

    def test_inner_half_flag(self):
        cfg = SystemConfig(num_subcarriers=1, n_source=1, n_relay=1, n_dest=1, noise_var_relay=1.0,
                           noise_var_dest=1.0, tsr_inner_half=False)
        assert tsr_pair_rate(1.0, 1.0, 3.0, 8.0, 1.0, cfg) == pytest.approx(cfg.bandwidth_hz * math.log2(3))


class TestConditionalUpdates:
    def test_omega_boundary_values(self):
        # unit first-hop SNR, opposite-hop SNR 2: omega = sqrt(1 + 2/mu) - 2
        assert conditional_omega(1.0, 2 / 3, 1.0, 2.0) == pytest.approx(0.0, abs=1e-12)
        assert conditional_omega(1.0, 0.25, 1.0, 2.0) == pytest.approx(1.0)

    def test_large_multiplier(self):
        np.testing.assert_array_equal(conditional_omega(np.ones(3), 1e300, np.ones(3), np.ones(3)), 0.0)
        np.testing.assert_array_equal(conditional_varpi(np.ones(3), 1e300, np.ones(3), np.ones(3)), 0.0)

    def test_varpi_zero_source(self):
        np.testing.assert_array_equal(conditional_varpi(np.zeros(3), 0.1, np.ones(3), np.ones(3)), 0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.01, 1e3), st.floats(0.01, 1e3)), min_size=1, max_size=8))
    def test_budget_and_stationarity(self, pairs):
        own, other = (np.array(v) for v in zip(*pairs))
        alloc, mu = budget_multiplier(own, other, 1e-12)
        assert abs(alloc.sum() - 1.0) <= 1e-10
        assert np.all(alloc >= 0)
        inner = alloc > 1e-6
        marg = _log_marginal(own[inner], other[inner], alloc[inner])
        np.testing.assert_allclose(marg, mu, rtol=1e-5)
        # inactive entries would not gain at the margin
        idle = alloc == 0
        assert np.all(own[idle] * other[idle] / (1 + other[idle]) <= mu * (1 + 1e-9))

    def test_matches_conditional_omega(self):
        own = np.array([1.0, 5.0, 0.3])
        other = np.array([2.0, 0.5, 9.0])
        alloc, mu = budget_multiplier(own, other)
        np.testing.assert_allclose(alloc, conditional_omega(np.ones(3), mu, own, other))

    def test_dead_row(self):
        alloc, mu = budget_multiplier(np.ones(2), np.zeros(2))
        np.testing.assert_array_equal(alloc, 0.0)
        assert mu == 0.0


class TestAlternate:
    def test_single_subchannel(self):
        eig, cfg = _random(1, k=1, n=1)
        res = alternate_power_allocation(0.3, eig, cfg)
        np.testing.assert_allclose(res.omega, [1.0], atol=1e-9)
        np.testing.assert_allclose(res.varpi, [1.0], atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 2),
           st.floats(0.05, 0.95), st.floats(0, 50))
    def test_monotone_feasible(self, seed, k, n, alpha, power):
        eig, cfg = _random(seed, power, k, n)
        res = alternate_power_allocation(alpha, eig, cfg)
        assert np.all(np.diff(res.history) >= 0)
        assert res.iterations <= 200
        assert abs(res.omega.sum() - 1) <= 1e-9 and abs(res.varpi.sum() - 1) <= 1e-9
        assert np.all(res.omega >= 0) and np.all(res.varpi >= 0)
        assert res.rate == pytest.approx(res.history[-1])

    def test_rate_matches_formula(self):
        eig, cfg = _random(3)
        alpha = 0.4
        res = alternate_power_allocation(alpha, eig, cfg)
        perm = pair_subchannels(eig.lambda_s, eig.lambda_r).perm
        p_r = relay_power_budget(alpha, optimal_energy_beam(eig).lambda_max, cfg)
        direct = (1 - alpha) / 2 * np.sum(tsr_pair_rate(res.omega, res.varpi[perm], eig.lambda_s,
                                                       eig.lambda_r[perm], p_r, cfg))
        assert res.rate == pytest.approx(direct, rel=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_grid_oracle_two_subchannels(self, seed):
        k, n = (2, 1) if seed % 2 else (1, 2)
        eig, cfg = _random(100 + seed, 10.0 + 7 * seed, k, n)
        oracle = grid_power_tsr(0.3, eig, cfg, 1e-3)[2]
        assert alternate_power_allocation(0.3, eig, cfg).rate >= oracle * (1 - 5e-3)

    def test_dead_second_hop(self):
        eig = _eig_from([np.eye(2)], [np.zeros((2, 2))])
        res = alternate_power_allocation(0.3, eig, UNIT.__class__(num_subcarriers=1))
        assert res.rate == 0.0
        np.testing.assert_array_equal(res.omega, 0.0)
        np.testing.assert_array_equal(res.varpi, 0.0)

    def test_restarts_never_worse(self):
        eig, cfg = _random(7, 20.0)
        base = alternate_power_allocation(0.3, eig, cfg).rate
        more = alternate_power_allocation(0.3, eig, cfg, TsrOptimizerSettings(restarts=4)).rate
        assert more >= base

    def test_alpha_domain(self):
        eig, cfg = _random(0)
        with pytest.raises(ValueError):
            alternate_power_allocation(1.0, eig, cfg)


class TestHighSnr:
    def test_symmetric_split(self):
        eig = _eig_from([np.eye(2)], [np.eye(2)])
        cfg = SystemConfig(num_subcarriers=1, noise_var_relay=1e-3, noise_var_dest=1e-3)
        res = highsnr_power_allocation(0.3, eig, cfg)
        np.testing.assert_allclose(res.omega, [0.5, 0.5])
        np.testing.assert_allclose(res.varpi, [0.5, 0.5])

    def test_water_level_structure(self):
        eig, cfg = _random(5, 40.0)
        alpha = 0.35
        res = highsnr_power_allocation(alpha, eig, cfg)
        perm = pair_subchannels(eig.lambda_s, eig.lambda_r).perm
        gs = eig.lambda_s / cfg.noise_var_relay
        gr = eig.lambda_r[perm] / cfg.noise_var_dest
        floor = (np.sqrt(gs) + np.sqrt(gr)) ** 2 / (gs * gr)
        p_r = relay_power_budget(alpha, optimal_energy_beam(eig).lambda_max, cfg)
        src_level = res.omega * cfg.source_power * (1 + np.sqrt(gs / gr)) + floor
        rel_level = res.varpi[perm] * p_r * (1 + np.sqrt(gr / gs)) + floor
        for alloc, level in ((res.omega, src_level), (res.varpi[perm], rel_level)):
            on = alloc > 0
            assert np.ptp(level[on]) <= 1e-9 * level[on].max()
            # inactive pairs have floors above the water level
            assert np.all(floor[~on] >= level[on].max() * (1 - 1e-12))
            assert alloc.sum() == pytest.approx(1.0)

    def test_high_power_close_to_alternate(self):
        eig, cfg = _random(9, 50.0)
        a = alternate_power_allocation(0.3, eig, cfg).rate
        h = highsnr_power_allocation(0.3, eig, cfg).rate
        assert h <= a * (1 + 1e-9)
        assert h >= a * 0.98


class TestAlphaSearch:
    def test_grid(self):
        g = alpha_grid(0.01)
        assert g.size == 99
        assert g[0] == pytest.approx(0.01) and g[-1] == pytest.approx(0.99)

    def test_endpoints_zero(self):
        eig, cfg = _random(2)
        assert tsr_rate_at_alpha(0.0, eig, cfg) == 0.0
        assert tsr_rate_at_alpha(1.0, eig, cfg) == 0.0
        assert tsr_rate_at_alpha(0.5, eig, cfg) > 0.0

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 50), st.sampled_from(["alternate", "highsnr"]))
    def test_solution_invariants(self, seed, power, method):
        eig, cfg = _random(seed, power)
        sol = search_alpha(eig, cfg, method=method)
        assert 0 < sol.alpha < 1
        assert sol.rate == pytest.approx(sol.rate_curve[:, 1].max())
        assert sol.alpha == sol.rate_curve[np.argmax(sol.rate_curve[:, 1]), 0]
        assert sol.omega.sum() <= 1 + 1e-9 and sol.varpi.sum() <= 1 + 1e-9
        assert np.all(sol.omega >= 0) and np.all(sol.varpi >= 0)
        assert np.linalg.norm(sol.beam_vector) == pytest.approx(1.0, abs=1e-10)
        lam = optimal_energy_beam(eig).lambda_max
        assert sol.relay_power == pytest.approx(2 * sol.alpha / (1 - sol.alpha) * cfg.source_power * lam)

    def test_grid_point_matches_single_solve(self):
        eig, cfg = _random(4)
        sol = search_alpha(eig, cfg, TsrOptimizerSettings(alpha_step=0.05))
        single = alternate_power_allocation(sol.alpha, eig, cfg, TsrOptimizerSettings(alpha_step=0.05))
        assert sol.rate == single.rate

    def test_step_too_large(self):
        eig, cfg = _random(0)
        with pytest.raises(ValueError):
            search_alpha(eig, cfg, TsrOptimizerSettings(alpha_step=1.0))

    def test_unknown_method(self):
        eig, cfg = _random(0)
        with pytest.raises(ValueError):
            search_alpha(eig, cfg, method="hill")


class TestLogSum:
    def test_increasing_pair(self):
        eig, cfg = _random(6)
        assert g_of_alpha(0.3, eig, cfg) < g_of_alpha(0.6, eig, cfg)

    def test_vanishes_near_zero(self):
        eig, cfg = _random(6)
        assert g_of_alpha(1e-9, eig, cfg) < 1e-3 * g_of_alpha(0.5, eig, cfg)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 50))
    def test_monotone_on_grid(self, seed, power):
        eig, cfg = _random(seed, power)
        g = g_of_alpha(np.arange(1, 50) * 0.02, eig, cfg)
        assert np.all(np.diff(g) >= -1e-6)

    def test_domain(self):
        eig, cfg = _random(0)
        with pytest.raises(ValueError):
            g_of_alpha(1.0, eig, cfg)
