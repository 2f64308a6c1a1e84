import numpy as np
import pytest

from birkhoff import (
    BernoulliStream,
    ExplicitStream,
    FrequencyVector,
    LimitTooLarge,
    MarkovStream,
    MoebiusStream,
    PeriodicStream,
    PrefixTooShort,
    SymbolExhausted,
    Word,
    empirical_frequency,
    moebius_sieve,
    stream_from_descriptor,
    target_frequency,
    transport_apply,
    transport_gamma,
    transport_mn,
)
from birkhoff.weights import (
    MOEBIUS_PLUSMINUS_DENSITY,
    MOEBIUS_ZERO_DENSITY,
    _occurrence_map,
)

from conftest import mu_by_trial_division


class TestMoebiusSieve:
    def test_known_small_values(self):
        mu = moebius_sieve(30)
        assert mu[1] == 1
        assert mu[2] == -1
        assert mu[4] == 0
        assert mu[6] == 1          # 6 = 2 * 3, two distinct primes
        assert mu[30] == -1        # 30 = 2 * 3 * 5, three distinct primes

    def test_first_thirty_against_trial_division(self):
        mu = moebius_sieve(30)
        for n in range(1, 31):
            assert mu[n] == mu_by_trial_division(n), n

    def test_random_values_against_trial_division(self, rng):
        mu = moebius_sieve(10**6)
        for n in rng.integers(1, 10**6 + 1, size=300):
            assert mu[int(n)] == mu_by_trial_division(int(n))

    def test_mertens_sum_stays_small(self):
        # The partial sums of mu grow sublinearly; at 1e6 the true value is
        # far inside the 1e3 budget.
        mu = moebius_sieve(10**6)
        assert abs(int(mu[1:].astype(np.int64).sum())) < 1000

    def test_limit_budget(self):
        with pytest.raises(LimitTooLarge):
            moebius_sieve(10**7, budget=10**6)

    def test_tiny_limits(self):
        assert moebius_sieve(1).tolist() == [0, 1]
        assert moebius_sieve(3).tolist() == [0, 1, -1, -1]


class TestStreams:
    def test_periodic_indexing_and_prefix(self):
        w = PeriodicStream([0, 1, 2])
        assert [w[i] for i in range(7)] == [0, 1, 2, 0, 1, 2, 0]
        assert w.prefix(5).tolist() == [0, 1, 2, 0, 1]

    def test_explicit_bounds(self):
        w = ExplicitStream([0, 0, 0, 1])
        with pytest.raises(PrefixTooShort):
            w.prefix(5)

    def test_moebius_coding(self):
        w = MoebiusStream()
        mu = moebius_sieve(50)
        coded = {1: 0, -1: 1, 0: 2}
        assert [w[k] for k in range(50)] == [coded[int(mu[k + 1])] for k in range(50)]

    def test_moebius_zero_symbols_are_squarefull(self, rng):
        # Every position coded as the zero symbol must carry an n divisible
        # by some prime square.
        w = MoebiusStream()
        prefix = w.prefix(10**5)
        zero_positions = np.nonzero(prefix == 2)[0]
        for k in rng.choice(zero_positions, size=10**4, replace=True):
            n = int(k) + 1
            assert mu_by_trial_division(n) == 0

    def test_bernoulli_deterministic_random_access(self):
        w = BernoulliStream([0.25, 0.75], seed=99)
        pre = w.prefix(500)
        assert [w[i] for i in range(0, 500, 37)] == [int(pre[i]) for i in range(0, 500, 37)]
        again = BernoulliStream([0.25, 0.75], seed=99)
        assert np.array_equal(again.prefix(500), pre)
        other = BernoulliStream([0.25, 0.75], seed=100)
        assert not np.array_equal(other.prefix(500), pre)

    def test_bernoulli_frequencies_converge(self):
        w = BernoulliStream([0.2, 0.3, 0.5], seed=5)
        freq = empirical_frequency(w, 200_000)
        assert np.allclose(freq.q, [0.2, 0.3, 0.5], atol=5e-3)

    def test_markov_deterministic_and_reasonable(self):
        p = [[0.9, 0.1], [0.4, 0.6]]
        w = MarkovStream(p, [1.0, 0.0], seed=3)
        pre = w.prefix(50_000)
        again = MarkovStream(p, [1.0, 0.0], seed=3)
        assert np.array_equal(again.prefix(50_000), pre)
        # stationary distribution of this chain is (0.8, 0.2)
        freq = empirical_frequency(w, 50_000)
        assert np.allclose(freq.q, [0.8, 0.2], atol=2e-2)
        stat = target_frequency(w)
        assert np.allclose(stat.q, [0.8, 0.2], atol=1e-12)

    def test_descriptor_roundtrip(self):
        streams = [
            (ExplicitStream([0, 1, 1, 0]), 4),
            (PeriodicStream([0, 1, 2]), 64),
            (MoebiusStream(), 64),
            (BernoulliStream([0.5, 0.5], seed=7), 64),
            (MarkovStream([[0.5, 0.5], [0.2, 0.8]], [0.5, 0.5], seed=11), 64),
        ]
        for w, n in streams:
            again = stream_from_descriptor(w.descriptor())
            assert np.array_equal(again.prefix(n), w.prefix(n))


class TestEmpiricalFrequency:
    def test_periodic_half_half(self):
        assert empirical_frequency(PeriodicStream([0, 1]), 1000).q.tolist() == [0.5, 0.5]

    def test_explicit_counts(self):
        assert empirical_frequency(ExplicitStream([0, 0, 0, 1]), 4).q.tolist() == [0.75, 0.25]

    def test_moebius_densities_midscale(self):
        freq = empirical_frequency(MoebiusStream(), 10**6)
        expected = [MOEBIUS_PLUSMINUS_DENSITY, MOEBIUS_PLUSMINUS_DENSITY, MOEBIUS_ZERO_DENSITY]
        assert np.allclose(freq.q, expected, atol=2e-3)

    def test_frequency_vector_validation(self):
        with pytest.raises(ValueError):
            FrequencyVector(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            FrequencyVector(np.array([-0.1, 1.1]))


class TestTransport:
    def test_gamma_alternating_examples(self):
        w = PeriodicStream([0, 1])
        wp = PeriodicStream([1, 0])
        assert transport_gamma(w, wp, 0) == 1
        assert transport_gamma(w, wp, 3) == 2

    def test_gamma_identity(self):
        w = PeriodicStream([0, 1, 1])
        for k in range(20):
            assert transport_gamma(w, w, k) == k

    def test_gamma_definitional_identity(self, rng):
        w = BernoulliStream([0.3, 0.7], seed=1)
        wp = BernoulliStream([0.3, 0.7], seed=2)
        gamma = _occurrence_map(w, wp, 2000)
        a, b = w.prefix(2000), wp.prefix(int(gamma.max()) + 1)
        assert all(a[k] == b[gamma[k]] for k in range(2000))

    def test_gamma_injective_first_1e5(self):
        w = BernoulliStream([0.5, 0.5], seed=12345)
        wp = BernoulliStream([0.5, 0.5], seed=67890)
        gamma = _occurrence_map(w, wp, 10**5)
        assert len(np.unique(gamma)) == 10**5

    def test_symbol_exhausted(self):
        w = PeriodicStream([0, 1, 2])
        wp = PeriodicStream([0, 1], N=3)  # symbol 2 never occurs
        with pytest.raises(SymbolExhausted):
            transport_gamma(w, wp, 2)

    def test_apply_identity(self):
        w = PeriodicStream([0, 1])
        out = transport_apply(w, w, Word((0, 1, 1, 0)), 4)
        assert out.symbols == (0, 1, 1, 0)

    def test_apply_adjacent_swaps(self):
        w = PeriodicStream([0, 1])
        wp = PeriodicStream([1, 0])
        out = transport_apply(w, wp, (10, 11, 12, 13), 4)
        assert out.symbols == (11, 10, 13, 12)

    def test_apply_prefix_too_short(self):
        w = PeriodicStream([0, 1])
        wp = PeriodicStream([1, 0])
        with pytest.raises(PrefixTooShort):
            transport_apply(w, wp, (1, 2, 3), 4)

    def test_roundtrip_on_random_prefix(self, rng):
        w = BernoulliStream([0.4, 0.6], seed=21)
        wp = BernoulliStream([0.4, 0.6], seed=22)
        out_len = 200
        fwd_len = int(_occurrence_map(wp, w, out_len).max()) + 1
        need = int(_occurrence_map(w, wp, fwd_len).max()) + 1
        prefix = tuple(int(x) for x in rng.integers(0, 9, size=need))
        fwd = transport_apply(w, wp, prefix, fwd_len)
        back = transport_apply(wp, w, fwd, out_len)
        assert back.symbols == prefix[:out_len]

    def test_mn_identity_and_alternating(self):
        w = PeriodicStream([0, 1])
        wp = PeriodicStream([1, 0])
        assert transport_mn(w, w, 7) == 7
        assert transport_mn(w, wp, 4) == 4

    def test_mn_ratio_bernoulli_pair(self):
        w = BernoulliStream([0.5, 0.5], seed=12345)
        wp = BernoulliStream([0.5, 0.5], seed=67890)
        ratios = {}
        for n in (10**3, 10**4, 10**5):
            m = transport_mn(w, wp, n)
            assert m >= n
            ratios[n] = m / n
        # the fluctuation envelope shrinks with n
        assert ratios[10**3] >= max(ratios[10**4], ratios[10**5])
        assert ratios[10**5] <= 1.05
