import math

import numpy as np
import pytest
from pydantic import ValidationError

from sbgp.exceptions import DomainError, NoJointExceedancesError
from sbgp.models.dependence import (
    ChiCurve,
    chi_curve,
    chi_hat,
    eta_from_chi,
    eta_hill,
    mc_chi_curve,
    mc_eta_curve,
    parse_levels,
    ranks,
)
from sbgp.models.distributions import make_rng
from sbgp.models.sbgp_model import SbgpParams, sample


@pytest.fixture
def comonotone():
    x = np.arange(1, 1001, dtype=float)
    return np.column_stack([x, x ** 2])


@pytest.fixture
def independent():
    return make_rng(11).normal(size=(100_000, 2))


class TestRanks:
    def test_ordinal_ties(self):
        r = ranks(np.array([[1.0, 5.0], [1.0, 3.0], [0.0, 4.0]]))
        assert r[:, 0].tolist() == [2, 3, 1]
        assert r[:, 1].tolist() == [3, 1, 2]

    def test_shape_checked(self):
        with pytest.raises(DomainError):
            ranks(np.zeros((5, 3)))
        with pytest.raises(DomainError):
            ranks(np.zeros((1, 2)))


class TestChiHat:
    @pytest.mark.parametrize("q", [0.5, 0.9])
    def test_comonotone(self, comonotone, q):
        assert chi_hat(comonotone, q) == pytest.approx(1.0)

    def test_countermonotone(self, comonotone):
        flipped = comonotone * np.array([1.0, -1.0])
        assert chi_hat(flipped, 0.5) == 0.0

    def test_independence(self, independent):
        assert chi_hat(independent, 0.9) == pytest.approx(0.1, abs=0.01)

    def test_level_checked(self, comonotone):
        with pytest.raises(DomainError):
            chi_hat(comonotone, 1.0)

    def test_no_exceedances_above_cut(self, comonotone):
        assert chi_hat(comonotone, 0.9995) == 0.0

    def test_invariant_to_marginal_transforms(self, independent):
        moved = np.column_stack([np.exp(independent[:, 0]), 3.0 * independent[:, 1] - 1.0])
        assert chi_hat(moved, 0.8) == chi_hat(independent, 0.8)

    def test_ordered_by_weight_at_fixed_eta(self):
        # (alpha, alpha1, alpha2) = (4.44, 0.56, 0.56): chi = 0, eta near 0.9
        n, q = 200_000, 0.9
        values = []
        for w in (0.1, 0.5, 0.9):
            p = SbgpParams(alpha=4.44, alpha1=0.56, alpha2=0.56, beta1=1.0, beta2=1.0, sigma_T=0.0, w=w)
            values.append(chi_hat(sample(p, n, make_rng(1)), q))
        for low, high in zip(values, values[1:]):
            joint = high * (1 - q)
            se = math.sqrt(joint * (1 - joint) / n) / (1 - q)
            assert high - low > 3 * se


class TestEta:
    def test_from_chi(self):
        assert eta_from_chi(0.9, 0.1) == pytest.approx(0.5)
        assert eta_from_chi(0.99, 1.0) == pytest.approx(1.0)

    def test_no_joint_exceedances(self):
        with pytest.raises(NoJointExceedancesError):
            eta_from_chi(0.9, 0.0)

    def test_level_checked(self):
        with pytest.raises(DomainError):
            eta_from_chi(1.0, 0.5)

    def test_hill_comonotone(self):
        x = np.arange(10_000, dtype=float)
        assert eta_hill(np.column_stack([x, x])) == pytest.approx(1.0, abs=0.01)

    def test_hill_independent(self, independent):
        assert eta_hill(independent) == pytest.approx(0.5, abs=0.05)

    def test_hill_needs_twenty_rows(self):
        with pytest.raises(DomainError):
            eta_hill(make_rng(0).normal(size=(19, 2)))

    def test_hill_k_override(self, independent):
        assert eta_hill(independent, k=500) != eta_hill(independent)
        with pytest.raises(DomainError):
            eta_hill(independent, k=0)


class TestChiCurve:
    def test_curve_matches_pointwise(self, independent):
        levels = [0.5, 0.7, 0.9]
        curve = chi_curve(independent, levels)
        assert curve.levels == levels
        assert curve.values == [chi_hat(independent, q) for q in levels]

    def test_frame_columns(self, comonotone):
        frame = chi_curve(comonotone, [0.5, 0.9]).to_frame(with_eta=True)
        assert list(frame.columns) == ["q", "chi", "eta"]
        assert frame["eta"].tolist() == pytest.approx([1.0, 1.0])

    def test_eta_is_nan_without_joint_exceedances(self, comonotone):
        curve = chi_curve(comonotone * np.array([1.0, -1.0]), [0.5])
        assert math.isnan(curve.eta_values()[0])

    def test_validation(self):
        with pytest.raises(ValidationError):
            ChiCurve(levels=[0.9, 0.5], values=[0.1, 0.2])
        with pytest.raises(ValidationError):
            ChiCurve(levels=[0.5, 1.0], values=[0.1, 0.2])
        with pytest.raises(ValidationError):
            ChiCurve(levels=[0.5], values=[0.1, 0.2])

    def test_monte_carlo_curves(self, theta1, theta3):
        dependent = mc_chi_curve(theta1, [0.95], 100_000, make_rng(1)).values[0]
        independent = mc_chi_curve(theta3, [0.95], 100_000, make_rng(1)).values[0]
        assert 0.75 < dependent < 0.95
        assert independent < dependent

    def test_monte_carlo_size(self, theta1):
        with pytest.raises(DomainError):
            mc_chi_curve(theta1, [0.9], 999, make_rng(1))

    def test_monte_carlo_eta(self, theta2):
        etas = mc_eta_curve(theta2, [0.9, 0.99], 50_000, make_rng(2))
        assert len(etas) == 2
        assert all(0.5 < e < 1.0 for e in etas)


class TestParseLevels:
    def test_grid(self):
        assert parse_levels("0.5:0.9:5") == pytest.approx([0.5, 0.6, 0.7, 0.8, 0.9])

    def test_list(self):
        assert parse_levels("0.5, 0.9") == [0.5, 0.9]

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_levels("0.5:0.9")
        with pytest.raises(ValueError):
            parse_levels("0.5:0.9:0")
