import math

import numpy as np
import pytest

from birkhoff import (
    BernoulliJoint,
    DpConfig,
    OutsideDomain,
    PotentialTable,
    SftSpec,
    Status,
    domain_interval,
    duality_gap,
    equilibrium_measure,
    level_set_count,
    moebius_digit_spectrum,
    moebius_weight_model,
    spectrum_at,
    spectrum_curve,
)
from birkhoff.oracle import log_bigint
from birkhoff.spectrum import empirical_domain, status_runs
from birkhoff.weights import MOEBIUS_ZERO_DENSITY

from conftest import binary_entropy, interior_alpha, random_dense, random_factored, random_frequencies

BE_TABLE = PotentialTable([[0.0, 1.0]])
BE_ENTROPY_34 = math.log(4) - 0.75 * math.log(3)


def boundary_grid(lo, hi, outside=10, inside=81, margin=0.3):
    """Uniform grid on [lo, hi] flanked by strictly outside points."""
    w = hi - lo
    left = np.linspace(lo - margin * w, lo, outside + 1)[:-1]
    mid = np.linspace(lo, hi, inside)
    right = np.linspace(hi, hi + margin * w, outside + 1)[1:]
    return np.concatenate([left, mid, right])


class TestSpectrumAt:
    def test_besicovitch_eggleston_value(self):
        pt = spectrum_at([1.0], BE_TABLE, 0.75)
        assert pt.status == Status.INTERIOR
        assert pt.entropy == pytest.approx(BE_ENTROPY_34, abs=1e-12)
        assert pt.p_star[0] == pytest.approx(math.log(3), abs=1e-9)

    def test_besicovitch_eggleston_binomial_oracle(self):
        # The count of n-digit words with 3n/4 ones grows like e^{n H(3/4)};
        # the Stirling correction decays like log(n)/n.
        pt = spectrum_at([1.0], BE_TABLE, 0.75)
        gaps = []
        for n in (400, 4000, 40000):
            k = 3 * n // 4
            gaps.append(abs(log_bigint(math.comb(n, k)) / n - pt.entropy))
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] <= 1e-3

    def test_vertex_full_entropy(self, rng):
        for _ in range(10):
            q, lam, phi, table = random_factored(rng, int(rng.integers(1, 4)), int(rng.integers(2, 5)))
            alpha0 = (phi.sum() / len(phi)) * float(q @ lam)
            pt = spectrum_at(q, table, alpha0)
            assert pt.status == Status.INTERIOR
            assert pt.entropy == pytest.approx(math.log(table.K), abs=1e-9)
            assert abs(pt.p_star[0]) <= 1e-8

    def test_moebius_symmetric_vertex(self):
        q, table = moebius_weight_model(2)
        pt = spectrum_at(q, table, 0.0)
        assert pt.entropy == pytest.approx(math.log(2), abs=1e-12)
        assert abs(pt.p_star[0]) <= 1e-10

    def test_outside_is_minus_infinity(self):
        pt = spectrum_at([1.0], BE_TABLE, 1.2)
        assert pt.status == Status.OUTSIDE
        assert pt.entropy == float("-inf")
        assert pt.p_star is None and pt.equilibrium is None

    def test_degenerate_weights_vertex(self):
        table = PotentialTable.from_factored([0.0, 0.0], [0.0, 1.0])
        pt = spectrum_at([0.5, 0.5], table, 0.0)
        assert pt.status == Status.DEGENERATE_VERTEX
        assert pt.entropy == pytest.approx(math.log(2), abs=1e-14)
        assert np.allclose(pt.equilibrium.probs, 0.25)

    def test_entropy_bounded_by_log_k(self, rng):
        for _ in range(10):
            q, lam, phi, table = random_factored(rng, 2, 3)
            iv = domain_interval(q, lam, phi)
            alpha = float(rng.uniform(iv.lo, iv.hi))
            pt = spectrum_at(q, table, alpha)
            if pt.status == Status.INTERIOR:
                assert -1e-12 <= pt.entropy <= math.log(3) + 1e-12


class TestEquilibrium:
    def test_uniform_at_p_zero(self, rng):
        q = random_frequencies(rng, 3)
        table = random_dense(rng, 3, 4, 1)
        eq = equilibrium_measure(q, table, 0.0, 0.0)
        assert np.allclose(eq.probs, q[:, None] / 4)

    def test_logistic_quarters(self):
        eq = equilibrium_measure([1.0], BE_TABLE, math.log(3), 0.75)
        assert np.allclose(eq.probs, [[0.25, 0.75]], atol=1e-12)

    def test_marginal_constraint(self, rng):
        for _ in range(5):
            n = int(rng.integers(1, 5))
            q = random_frequencies(rng, n)
            table = random_dense(rng, n, 3, 2)
            eq = equilibrium_measure(q, table, rng.normal(size=2), rng.normal(size=2))
            assert np.allclose(eq.marginal(), q, atol=1e-12)
            assert eq.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_mean_recovers_level(self, rng):
        for _ in range(10):
            n, k, d = int(rng.integers(1, 4)), int(rng.integers(2, 5)), int(rng.integers(1, 3))
            q = random_frequencies(rng, n)
            table = random_dense(rng, n, k, d)
            alpha, _ = interior_alpha(rng, q, table)
            pt = spectrum_at(q, table, alpha)
            assert pt.status == Status.INTERIOR
            assert np.abs(pt.equilibrium.mean(table) - alpha).max() <= 1e-8

    def test_joint_validation(self):
        with pytest.raises(ValueError):
            BernoulliJoint(np.array([[0.5, 0.6]]))


class TestDuality:
    def test_vertex_gap_zero(self):
        q, table = moebius_weight_model(3)
        assert duality_gap(q, table, 0.0) <= 1e-12

    def test_besicovitch_gap(self):
        assert duality_gap([1.0], BE_TABLE, 0.75) <= 1e-10
        # both expressions equal the binary entropy at 3/4
        pt = spectrum_at([1.0], BE_TABLE, 0.75)
        assert pt.equilibrium.entropy() == pytest.approx(binary_entropy(0.75), abs=1e-12)

    def test_random_interior_d2(self, rng):
        for _ in range(10):
            n, k = int(rng.integers(1, 5)), int(rng.integers(2, 6))
            q = random_frequencies(rng, n)
            table = random_dense(rng, n, k, 2)
            alpha, _ = interior_alpha(rng, q, table)
            assert duality_gap(q, table, alpha) <= 1e-8

    def test_requires_interior(self):
        with pytest.raises(ValueError):
            duality_gap([1.0], BE_TABLE, 1.5)


class TestCurve:
    def test_pattern_concavity_and_domain(self, rng):
        q, lam, phi, table = random_factored(rng, 3, 4)
        iv = domain_interval(q, lam, phi)
        grid = boundary_grid(iv.lo, iv.hi)
        pts = spectrum_curve(q, table, grid)
        runs = [s for s, _ in status_runs(pts)]
        assert runs == [Status.OUTSIDE, Status.BOUNDARY, Status.INTERIOR,
                        Status.BOUNDARY, Status.OUTSIDE]
        ent = np.array([p.entropy for p in pts[10:-10]])
        second = ent[2:] - 2 * ent[1:-1] + ent[:-2]
        assert second.max() <= 1e-8
        assert empirical_domain(pts) == (iv.lo, iv.hi)

    def test_endpoint_argmax_counting_vs_oracle(self):
        # phi has a tied maximum, so at the right endpoint the level set
        # keeps one free binary choice per position: entropy log 2, matched
        # by a direct count at small n.
        q = [0.5, 0.5]
        lam = [1.0, 2.0]
        phi = [0.0, 1.0, 1.0]
        table = PotentialTable.from_factored(lam, phi)
        iv = domain_interval(q, lam, phi)
        pt = spectrum_at(q, table, iv.hi)
        assert pt.status == Status.BOUNDARY
        assert pt.entropy == pytest.approx(math.log(2), abs=1e-12)
        spec = SftSpec.full_shift(3)
        w = [0, 1] * 6  # realizes q exactly
        n = 12
        res = level_set_count(spec, table, w, iv.hi, 1e-9, n, DpConfig(mode="exact"))
        assert res.count == 2**n
        assert res.exponent == pytest.approx(math.log(2), abs=1e-12)

    def test_strict_maximizer_endpoint_zero(self):
        q = [1.0]
        table = PotentialTable.from_factored([1.0], [0.0, 1.0])
        pt = spectrum_at(q, table, 1.0)
        assert pt.status == Status.BOUNDARY
        assert pt.entropy == pytest.approx(0.0, abs=1e-15)

    def test_cold_start_matches_warm(self, rng):
        q, lam, phi, table = random_factored(rng, 2, 3)
        iv = domain_interval(q, lam, phi)
        grid = np.linspace(iv.lo + 0.05 * iv.width, iv.hi - 0.05 * iv.width, 41)
        warm = spectrum_curve(q, table, grid)
        cold = [spectrum_at(q, table, a) for a in grid]
        for a, b in zip(warm, cold):
            assert a.status == b.status == Status.INTERIOR
            assert a.entropy == pytest.approx(b.entropy, abs=1e-10)
            assert a.p_star[0] == pytest.approx(b.p_star[0], abs=1e-7)

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ValueError):
            spectrum_curve([1.0], BE_TABLE, [0.5, 0.4])

    def test_outside_rows(self):
        pts = spectrum_curve([1.0], BE_TABLE, [-0.5, 0.5, 1.5])
        assert [p.status for p in pts] == [Status.OUTSIDE, Status.INTERIOR, Status.OUTSIDE]


class TestMoebiusClosedForm:
    def test_symmetric_point(self):
        h, p = moebius_digit_spectrum(2, 0.0)
        assert h == pytest.approx(math.log(2), abs=1e-12)
        assert abs(p) <= 1e-12

    def test_right_endpoint_value(self):
        # at the endpoint only the zero-weight rows keep any freedom
        c = 3 / math.pi**2
        h, p = moebius_digit_spectrum(2, c)
        assert h == pytest.approx(MOEBIUS_ZERO_DENSITY * math.log(2), abs=1e-15)
        assert p == math.inf

    def test_outside_raises(self):
        with pytest.raises(OutsideDomain):
            moebius_digit_spectrum(2, 0.5)

    def test_matches_generic_path(self):
        q, table = moebius_weight_model(3)
        for alpha in (-0.4, -0.15, 0.1, 0.33, 0.55):
            h, p = moebius_digit_spectrum(3, alpha)
            pt = spectrum_at(q, table, alpha)
            assert pt.status == Status.INTERIOR
            assert h == pytest.approx(pt.entropy, abs=1e-9)
            assert p == pytest.approx(pt.p_star[0], abs=1e-7)

    def test_concave_in_alpha(self):
        edge = (4 - 1) * 3 / math.pi**2
        grid = np.linspace(-edge * 0.98, edge * 0.98, 51)
        h = np.array([moebius_digit_spectrum(4, a)[0] for a in grid])
        second = h[2:] - 2 * h[1:-1] + h[:-2]
        assert second.max() <= 1e-8
