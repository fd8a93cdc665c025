import math

import numpy as np
import pytest
from scipy import stats

from mallows_lcs.harness import total_variation_on_triangle
from mallows_lcs.limits import euler_z
from mallows_lcs.perm import Permutation, induced
from mallows_lcs.regeneration import (
    CapExceededError,
    ProductChainState,
    RenewalBlock,
    StationaryLaw,
    coupled_run,
    estimate_clt_params,
    hitting_times,
    occupation_frequencies,
    prefix_complete_times,
    product_chain_step,
    renewal_blocks,
    renewal_count,
    renewal_xy,
    return_times,
    sandwich_bounds,
    simulate_return_time,
    stationary_pmf,
)
from mallows_lcs.sampling import RngStream, insertion_from_draws
from mallows_lcs.subsequence import lcs

from oracles import mean_se


class TestProductChain:
    @pytest.mark.parametrize(
        "state,z,zp,expected",
        [((0, 0), 1, 1, (0, 0)), ((0, 0), 4, 2, (3, 1)), ((5, 0), 1, 7, (4, 6))],
    )
    def test_step(self, state, z, zp, expected):
        assert product_chain_step(ProductChainState(*state), z, zp) == ProductChainState(*expected)

    def test_validation(self):
        with pytest.raises(ValueError):
            ProductChainState(-1, 0)
        with pytest.raises(ValueError):
            product_chain_step(ProductChainState(0, 0), 0, 1)


class TestReturnTimes:
    @pytest.mark.parametrize("q,qp", [(0.5, 0.5), (0.3, 0.7)])
    def test_kac_mean(self, q, qp):
        r = return_times(q, qp, 100_000, RngStream(31, int(q * 10)))
        m, se = mean_se(r)
        assert abs(m - euler_z(q) * euler_z(qp)) < 3 * se

    def test_tiny_q_returns_immediately(self):
        r = return_times(1e-9, 1e-9, 1000, RngStream(32))
        assert np.all(r == 1)

    def test_single_and_batch_positive(self):
        assert simulate_return_time(0.5, 0.5, RngStream(33)) >= 1

    def test_cap(self):
        with pytest.raises(CapExceededError) as info:
            return_times(0.97, 0.97, 10, RngStream(34), cap=5)
        assert info.value.steps >= 5

    def test_hitting_from_zero_is_zero(self):
        assert list(hitting_times([(0, 0), (0, 0)], 0.5, 0.5, RngStream(35))) == [0, 0]

    def test_hitting_lower_bound(self):
        # the chain falls by at most one per step in each coordinate
        starts = np.array([(3, 0), (0, 5), (2, 4)])
        h = hitting_times(np.repeat(starts, 200, axis=0), 0.5, 0.5, RngStream(36))
        assert np.all(h >= np.repeat(starts.max(axis=1), 200))

    def test_eta_drift_bound(self):
        q = 0.5
        reps = 20_000
        gen = RngStream(37).generator()

        def est(i, j):
            h = hitting_times(np.tile([i, j], (reps, 1)), q, q, gen)
            return mean_se(h)

        e01, s01 = est(0, 1)
        e10, s10 = est(1, 0)
        eta, se_eta = (e01, s01) if e01 >= e10 else (e10, s10)
        for i in range(5):
            for j in range(5 - i):
                if i + j == 0:
                    continue
                m, se = est(i, j)
                k = i + j
                assert m <= k * eta + 3 * math.hypot(se, k * se_eta)


class TestStationaryLaw:
    law = StationaryLaw.of(0.5)

    def test_nu00(self):
        assert self.law.nu00 == pytest.approx(1 / 3.462746619**2, rel=1e-8)
        assert self.law.nu00 == pytest.approx(0.08340, abs=5e-6)

    def test_mass_on_triangle(self):
        total = math.fsum(stationary_pmf(self.law, i, j) for i in range(61) for j in range(61 - i))
        assert total >= 1 - 1e-10
        assert total <= 1 + 1e-12

    def test_product_structure(self):
        law = StationaryLaw.of(0.3, 0.7)
        for i in range(8):
            for j in range(8):
                assert law.pmf(i, j) == pytest.approx(law.marginal(i) * law.marginal(j, prime=True), rel=1e-14)

    def test_marginal_sums_to_one(self):
        law = StationaryLaw.of(0.3, 0.7)
        assert math.fsum(law.marginal_table()) == pytest.approx(1.0, abs=1e-13)
        assert math.fsum(law.marginal_table(prime=True)) == pytest.approx(1.0, abs=1e-13)
        table = law.marginal_table(prime=True)
        assert np.allclose(table[:20], [law.marginal(i, prime=True) for i in range(20)], rtol=1e-12)

    def test_stationarity_under_one_step(self):
        # push the marginal through M -> max(M, Z) - 1 and recover it
        q = 0.4
        law = StationaryLaw.of(q)
        mu = law.marginal_table()
        k = np.arange(1, mu.size + 40)
        zpmf = (1 - q) * q ** (k - 1)
        nxt = np.zeros(mu.size + 40)
        for m, pm in enumerate(mu):
            for z, pz in zip(k, zpmf):
                nxt[max(m, z) - 1] += pm * pz
        assert np.allclose(nxt[: mu.size], mu, atol=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            StationaryLaw.of(1.0)
        with pytest.raises(ValueError):
            StationaryLaw.of(0.5, 0.0)

    def test_occupation_matches(self):
        freq = occupation_frequencies(0.5, 0.5, 1_000_000, RngStream(38), max_coord=10)
        assert total_variation_on_triangle(freq, self.law, 10) < 0.01

    def test_sample_states(self):
        law = StationaryLaw.of(0.5, 0.5)
        s = law.sample_states(200_000, RngStream(39))
        assert np.mean((s[:, 0] == 0) & (s[:, 1] == 0)) == pytest.approx(law.nu00, abs=0.003)
        assert s.min() >= 0


class TestBlocks:
    def test_block_invariants(self):
        blocks = renewal_blocks(0.6, 0.4, 2000, RngStream(40))
        for b in blocks:
            for sig in (b.sigma, b.sigma_prime):
                # prefix is complete only at the block end, jointly for the pair
                assert prefix_complete_times(sig.values)[-1] == b.length
            joint = np.intersect1d(
                prefix_complete_times(b.sigma.values), prefix_complete_times(b.sigma_prime.values)
            )
            assert list(joint) == [b.length]
            assert b.y == lcs(b.sigma, b.sigma_prime)
            if b.length == 1:
                assert b.sigma == b.sigma_prime == Permutation([1]) and b.y == 1

    def test_block_validation(self):
        one = Permutation([1])
        with pytest.raises(ValueError):
            RenewalBlock(1, one, one, 2)
        with pytest.raises(ValueError):
            RenewalBlock(2, one, one, 1)

    def test_streamed_equals_retained(self):
        blocks = renewal_blocks(0.5, 0.5, 3000, RngStream(41))
        x, y = renewal_xy(0.5, 0.5, 3000, RngStream(41))
        assert list(x) == [b.length for b in blocks]
        assert list(y) == [b.y for b in blocks]

    def test_mean_block_length(self):
        x, _ = renewal_xy(0.5, 0.5, 100_000, RngStream(42))
        m, se = mean_se(x)
        assert abs(m - euler_z(0.5) ** 2) < 3 * se

    def test_halves_have_same_law(self):
        x, y = renewal_xy(0.5, 0.5, 100_000, RngStream(43))
        assert stats.ks_2samp(x[:50_000], x[50_000:]).pvalue > 1e-3
        assert stats.ks_2samp(y[:50_000], y[50_000:]).pvalue > 1e-3

    def test_cap(self):
        with pytest.raises(CapExceededError):
            renewal_xy(0.95, 0.95, 100, RngStream(44), cap=3)


class TestCoupling:
    @pytest.mark.parametrize("seed", range(20))
    def test_chain_tracks_prefix_maximum(self, seed):
        gen = RngStream(45, seed).generator()
        z = gen.geometric(0.5, 500).astype(np.int64)
        zp = gen.geometric(0.6, 500).astype(np.int64)
        v, _ = insertion_from_draws(z)
        vp, _ = insertion_from_draws(zp)
        s = ProductChainState(0, 0)
        zero_hits = []
        for n in range(1, 501):
            s = product_chain_step(s, int(z[n - 1]), int(zp[n - 1]))
            assert s.m == v[:n].max() - n
            assert s.m_prime == vp[:n].max() - n
            if s == ProductChainState(0, 0):
                zero_hits.append(n)
        both = np.intersect1d(prefix_complete_times(v), prefix_complete_times(vp))
        assert list(both) == zero_hits

    def test_run_renewal_times_match_prefix_completeness(self):
        for seed in range(10):
            run = coupled_run(3000, 0.5, 0.5, RngStream(46, seed))
            v, _ = insertion_from_draws(run.z)
            vp, _ = insertion_from_draws(run.z_prime)
            both = np.intersect1d(prefix_complete_times(v), prefix_complete_times(vp))
            assert np.array_equal(both, run.renewal_times)
            assert run.renewal_times[-1] >= run.n
            assert run.s_n == 1 or run.renewal_times[-2] < run.n

    def test_block_local_equals_global(self):
        run = coupled_run(2000, 0.4, 0.6, RngStream(47))
        v, _ = insertion_from_draws(run.z)
        cuts = np.concatenate(([0], run.renewal_times))
        for j, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
            local, sigma = insertion_from_draws(run.z[a:b])
            assert np.array_equal(v[a:b] - a, local)
            _, sigma_p = insertion_from_draws(run.z_prime[a:b])
            assert run.y[j] == lcs(sigma, sigma_p)

    def test_prefix_perm_is_induced(self):
        run = coupled_run(300, 0.5, 0.5, RngStream(48))
        full = insertion_from_draws(run.z)[1]
        assert run.pi == induced(full, list(range(1, 301)))

    def test_lower_sandwich(self):
        for seed in range(100):
            run = coupled_run(2000, 0.4, 0.4, RngStream(49, seed))
            lower, _ = sandwich_bounds(run)
            assert lower < lcs(run.pi, run.tau)

    def test_upper_bound_exact_at_renewal(self):
        # when n is itself a renewal time the prefix is a union of whole blocks
        for seed in range(30):
            run = coupled_run(1000, 0.4, 0.4, RngStream(50, seed))
            t_last = int(run.renewal_times[-1])
            full = coupled_run_prefix(run, t_last)
            _, upper = sandwich_bounds(run)
            assert lcs(*full) == upper

    def test_corrected_upper_bound(self):
        for seed in range(200):
            run = coupled_run(2000, 0.4, 0.4, RngStream(51, seed))
            lower, _ = sandwich_bounds(run)
            t_prev = int(run.renewal_times[-2]) if run.s_n > 1 else 0
            assert lcs(run.pi, run.tau) <= lower + (run.n - t_prev)

    def test_single_block_run(self):
        run = coupled_run(1, 0.2, 0.2, RngStream(52))
        assert run.s_n == 1
        lower, upper = sandwich_bounds(run)
        assert lower == 0 and upper == run.y[0]

    def test_renewal_count_agrees_with_run(self):
        for seed in range(10):
            assert renewal_count(1500, 0.5, 0.5, RngStream(53, seed)) == coupled_run(
                1500, 0.5, 0.5, RngStream(53, seed)
            ).s_n

    def test_renewal_density(self):
        law = StationaryLaw.of(0.5)
        for seed in range(3):
            n = 1_000_000
            assert abs(renewal_count(n, 0.5, 0.5, RngStream(54, seed)) / n - law.nu00) < 0.005


def coupled_run_prefix(run, n):
    pi = insertion_from_draws(run.z[:n])[1]
    tau = insertion_from_draws(run.z_prime[:n])[1]
    return pi, tau


class TestCltEstimate:
    def test_too_few(self):
        with pytest.raises(ValueError):
            estimate_clt_params((np.array([1.0]), np.array([1.0])), StationaryLaw.of(0.5))

    def test_unit_blocks(self):
        law = StationaryLaw.of(0.5)
        est = estimate_clt_params((np.ones(10), np.ones(10)), law)
        assert est.a_hat == pytest.approx(law.nu00)
        assert est.delta2_hat == 0.0 and est.sigma_hat == 0.0

    def test_from_blocks_and_arrays_agree(self):
        law = StationaryLaw.of(0.3)
        blocks = renewal_blocks(0.3, 0.3, 500, RngStream(55))
        x = np.array([b.length for b in blocks])
        y = np.array([b.y for b in blocks])
        assert estimate_clt_params(blocks, law) == estimate_clt_params((x, y), law)

    def test_increment_bound_and_sigma(self):
        law = StationaryLaw.of(0.3)
        x, y = renewal_xy(0.3, 0.3, 20_000, RngStream(56))
        est = estimate_clt_params((x, y), law)
        assert np.all(np.abs(y - est.a_hat * x) <= (1 + est.a_hat) * x)
        assert est.sigma_hat == pytest.approx(math.sqrt(est.delta2_hat * est.nu00), rel=1e-14)
        assert 0 < est.a_hat < 1 and est.se_a > 0 and est.se_sigma > 0
        assert est.as_dict()["n_blocks"] == 20_000

    def test_self_consistency(self):
        law = StationaryLaw.of(0.3)
        a = estimate_clt_params(renewal_xy(0.3, 0.3, 100_000, RngStream(57, 0)), law)
        b = estimate_clt_params(renewal_xy(0.3, 0.3, 100_000, RngStream(57, 1)), law)
        assert abs(a.a_hat - b.a_hat) < 3 * math.hypot(a.se_a, b.se_a)
