import math

import numpy as np
import pytest
from scipy import integrate, stats

from sbgp.exceptions import DomainError
from sbgp.models.distributions import (
    GpParams,
    ShiftLaw,
    VjLaw,
    gp_density,
    gp_survival,
    halfnormal_cond_cdf,
    hypoexp_survival,
    make_rng,
    sample_gamma,
    sample_shift,
    shift_mean,
    split_rng,
    v_cdf,
    v_density,
    v_survival,
    v_tail_constants,
)
from sbgp.models.sbgp_model import sample_latent_v


class TestRng:
    def test_same_seed_same_stream(self):
        assert np.array_equal(make_rng(5).normal(size=10), make_rng(5).normal(size=10))

    def test_split_streams_are_distinct_and_reproducible(self):
        a, b = split_rng(make_rng(5), 2)
        c, _ = split_rng(make_rng(5), 2)
        draw_a = a.normal(size=5)
        assert not np.array_equal(draw_a, b.normal(size=5))
        assert np.array_equal(draw_a, c.normal(size=5))


class TestGp:
    def test_survival_at_origin(self):
        assert gp_survival(GpParams(xi=0.2, sigma=1.0), 0.0) == pytest.approx(1.0)

    def test_survival_heavy_tail(self):
        assert gp_survival(GpParams(xi=1.0, sigma=1.0), 1.0) == pytest.approx(0.5)

    def test_survival_exponential_branch(self):
        assert gp_survival(GpParams(xi=0.0, sigma=2.0), 2.0) == pytest.approx(math.exp(-1), rel=1e-10)

    def test_negative_point_rejected(self):
        with pytest.raises(DomainError):
            gp_survival(GpParams(xi=0.2, sigma=1.0), -0.1)

    def test_density_vectorized(self):
        out = gp_density(GpParams(xi=0.5, sigma=0.5), np.array([0.0, 1.0]))
        assert out.shape == (2,)
        assert out[0] == pytest.approx(2.0)


class TestGamma:
    @pytest.mark.parametrize("shape", [2.0, 0.56])
    def test_mean(self, shape):
        n = 1_000_000
        draws = sample_gamma(shape, 1.0, make_rng(1), n)
        se = math.sqrt(shape / n)
        assert abs(draws.mean() - shape) < 4 * se

    def test_rate_scales_mean(self):
        draws = sample_gamma(2.0, 4.0, make_rng(2), 200_000)
        assert draws.mean() == pytest.approx(0.5, rel=0.01)

    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_invalid_arguments(self, shape, rate):
        with pytest.raises(DomainError):
            sample_gamma(shape, rate, make_rng(0), 10)


class TestHypoexponential:
    def test_total_mass(self):
        assert hypoexp_survival(0.8, 0.0) == pytest.approx(1.0)

    def test_degenerate_weight(self):
        assert hypoexp_survival(1.0, 1.0) == pytest.approx(math.exp(-1))

    def test_generic_weight(self):
        expected = (0.8 * math.exp(-1.25) - 0.2 * math.exp(-5)) / 0.6
        assert hypoexp_survival(0.8, 1.0) == pytest.approx(expected, rel=1e-12)
        assert hypoexp_survival(0.8, 1.0) == pytest.approx(0.37974, abs=1e-5)

    def test_matches_monte_carlo(self):
        rng = make_rng(4)
        n = 400_000
        draws = 0.8 * rng.standard_exponential(n) + 0.2 * rng.standard_exponential(n)
        p = hypoexp_survival(0.8, 1.0)
        assert abs((draws > 1.0).mean() - p) < 4 * math.sqrt(p * (1 - p) / n)

    def test_half_weight_continuity(self):
        u = np.linspace(0.0, 5.0, 21)
        mid = hypoexp_survival(0.5, u)
        assert np.allclose(hypoexp_survival(0.5 + 1e-5, u), mid, atol=1e-4)


class TestShift:
    def test_degenerate_generators(self):
        assert sample_shift(ShiftLaw(sigma_T=0.0), make_rng(0)) == (0.0, 0.0)

    def test_one_component_is_zero(self):
        s1, s2 = sample_shift(ShiftLaw(sigma_T=1.0), make_rng(1), 1000)
        assert np.all(np.minimum(s1, s2) == 0.0)

    def test_zero_fraction(self):
        n = 1_000_000
        s1, _ = sample_shift(ShiftLaw(sigma_T=1.0), make_rng(2), n)
        assert abs((s1 == 0).mean() - 0.5) < 4 * math.sqrt(0.25 / n)

    def test_mean(self):
        n = 1_000_000
        law = ShiftLaw(sigma_T=1.0)
        s1, _ = sample_shift(law, make_rng(3), n)
        assert shift_mean(law) == pytest.approx(1 / math.sqrt(math.pi))
        assert abs(s1.mean() - 1 / math.sqrt(math.pi)) < 4 * s1.std() / math.sqrt(n)

    def test_components_identically_distributed(self):
        s1, s2 = sample_shift(ShiftLaw(sigma_T=1.0), make_rng(5), 100_000)
        assert stats.ks_2samp(s1, s2).statistic < 0.01


class TestHalfNormal:
    def test_values(self):
        law = ShiftLaw(sigma_T=1.0)
        assert halfnormal_cond_cdf(law, 0.0) == pytest.approx(0.0)
        assert halfnormal_cond_cdf(law, math.sqrt(2)) == pytest.approx(0.68269, abs=1e-5)
        assert halfnormal_cond_cdf(law, 1e3) == pytest.approx(1.0)

    def test_degenerate_law(self):
        with pytest.raises(DomainError):
            halfnormal_cond_cdf(ShiftLaw(sigma_T=0.0), 1.0)


class TestLatentRatio:
    def test_survival_at_origin(self):
        for w in (0.0, 0.3, 0.5, 0.8, 1.0):
            assert v_survival(VjLaw(xi=0.4, w=w), 0.0) == pytest.approx(1.0)

    def test_survival_gp_branch(self):
        assert v_survival(VjLaw(xi=0.5, w=1.0), 1.0) == pytest.approx(0.25)

    def test_survival_generic_branch(self):
        expected = (0.8 * 2.25 ** -2 - 0.2 * 6.0 ** -2) / 0.6
        assert v_survival(VjLaw(xi=0.5, w=0.8), 1.0) == pytest.approx(expected, rel=1e-12)
        assert v_survival(VjLaw(xi=0.5, w=0.8), 1.0) == pytest.approx(0.25411, abs=1e-5)

    def test_negative_point_rejected(self):
        with pytest.raises(DomainError):
            v_survival(VjLaw(xi=0.5, w=0.8), -1.0)

    def test_cdf_vanishes_below_origin(self):
        law = VjLaw(xi=0.5, w=0.8)
        assert v_cdf(law, -1.0) == 0.0
        assert v_cdf(law, 1.0) == pytest.approx(1 - 0.25411, abs=1e-5)

    def test_density_values(self):
        assert v_density(VjLaw(xi=0.5, w=0.8), -1.0) == 0.0
        assert v_density(VjLaw(xi=0.5, w=1.0), 0.0) == pytest.approx(2.0)
        assert v_density(VjLaw(xi=0.5, w=0.5), 0.0) == pytest.approx(0.0)

    def test_non_increasing(self):
        x = np.linspace(0.0, 50.0, 200)
        for w in (0.0, 0.2, 0.5, 0.7, 1.0):
            assert np.all(np.diff(v_survival(VjLaw(xi=0.3, w=w), x)) <= 1e-15)

    def test_continuous_across_half(self):
        x = np.linspace(0.0, 20.0, 41)
        mid = v_survival(VjLaw(xi=0.3, w=0.5), x)
        for w in (0.5 - 1e-7, 0.5 + 1e-7):
            assert np.max(np.abs(v_survival(VjLaw(xi=0.3, w=w), x) - mid)) < 1e-5

    @pytest.mark.parametrize("w", [0.0, 0.3, 0.5, 0.8, 1.0])
    def test_density_integrates_with_survival(self, w):
        law = VjLaw(xi=0.5, w=w)
        upper = 200.0
        assert v_survival(law, upper) < 1e-3
        mass, _ = integrate.quad(lambda x: v_density(law, x), 0.0, upper, limit=200, epsabs=1e-10)
        assert mass + v_survival(law, upper) == pytest.approx(1.0, abs=1e-6)

    def test_gp_limit_of_ratio(self):
        xi = 0.3
        draws = sample_latent_v(VjLaw(xi=xi, w=1.0), 100_000, make_rng(6))
        assert stats.kstest(draws, stats.genpareto(c=xi, scale=xi).cdf).statistic < 0.01

    def test_sampler_matches_survival(self):
        law = VjLaw(xi=0.5, w=0.8)
        n = 200_000
        draws = sample_latent_v(law, n, make_rng(7))
        for x in (0.2, 1.0, 5.0):
            p = v_survival(law, x)
            assert abs((draws > x).mean() - p) < 4 * math.sqrt(p * (1 - p) / n)


class TestTailConstants:
    def test_degenerate_weight(self):
        assert v_tail_constants(VjLaw(xi=0.5, w=1.0)) == (1.0, 1.0)

    def test_half_weight(self):
        c, d = v_tail_constants(VjLaw(xi=0.5, w=0.5))
        assert c == pytest.approx(0.75)
        assert d == pytest.approx(2 / 3)

    def test_generic_weight(self):
        c, d = v_tail_constants(VjLaw(xi=0.5, w=0.8))
        assert c == pytest.approx(0.84)
        assert d == pytest.approx((0.8 ** 4 - 0.2 ** 4) / (0.8 ** 3 - 0.2 ** 3))

    @pytest.mark.parametrize("x", [1e3, 1e4])
    def test_expansion(self, x):
        law = VjLaw(xi=0.5, w=0.8)
        c, d = v_tail_constants(law)
        scaled = x ** (1 / law.xi) * v_survival(law, x)
        assert scaled == pytest.approx(c * (1 - d / (law.xi * x)), rel=1e-4)
