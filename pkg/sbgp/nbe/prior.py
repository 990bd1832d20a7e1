"""
Prior Configuration
Prior laws over the canonical parameter vectors used to simulate training
data for the neural Bayes estimators.
"""

import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from sbgp.models.distributions import RngState
from sbgp.models.sbgp_model import reparam_upper_bound


def _check_range(value: Tuple[float, float]) -> Tuple[float, float]:
    low, high = value
    if not high > low:
        raise ValueError(f"Range must be non-empty, got ({low}, {high})")
    return value


class PriorConfig(BaseModel):
    """Mixture prior over (eta, xi1, xi2, beta1, beta2, sigma_T, w) and the sample size."""
    ad_atom_prob: float = Field(default=0.1, ge=0.0, le=1.0,
                                description="Probability of the eta = 1 (asymptotic dependence) atom")
    eta_range: Tuple[float, float] = Field(default=(0.5, 1.0), description="Continuous eta component")
    xi1_range: Tuple[float, float] = Field(default=(0.0, 0.5), description="Uniform range of xi1")
    sigma_T_range: Tuple[float, float] = Field(default=(0.0, 1.0), description="Uniform range of sigma_T")
    w_range: Tuple[float, float] = Field(default=(0.0, 1.0), description="Uniform range of w")
    beta_range: Tuple[float, float] = Field(default=(0.0, 1000.0), description="Uniform range of beta_j")
    n_range: Tuple[int, int] = Field(default=(100, 1000), description="Inclusive range of sample sizes")

    @field_validator("eta_range", "xi1_range", "sigma_T_range", "w_range", "beta_range", "n_range")
    @classmethod
    def _non_empty(cls, value):
        return _check_range(value)

    @field_validator("eta_range")
    @classmethod
    def _eta_bounds(cls, value):
        if value[0] < 0.5 or value[1] > 1.0:
            raise ValueError("eta_range must lie inside [0.5, 1]")
        return value

    def scale_diag(self) -> np.ndarray:
        """Prior standard deviations per coordinate, (b - a) / sqrt(12) of each uniform."""
        width = lambda r: (r[1] - r[0]) / math.sqrt(12.0)
        return np.array([
            width(self.eta_range), width(self.xi1_range), width(self.xi1_range),
            width(self.beta_range), width(self.beta_range),
            width(self.sigma_T_range), width(self.w_range),
        ])


class BgpPriorConfig(BaseModel):
    """Uniform priors over (xi1, xi2, sigma1, sigma2, a_T, b_T) and the sample size."""
    xi_range: Tuple[float, float] = Field(default=(0.0, 0.5))
    sigma_range: Tuple[float, float] = Field(default=(0.0, 100.0))
    a_T_range: Tuple[float, float] = Field(default=(0.1, 5.0))
    b_T_range: Tuple[float, float] = Field(default=(-1.0, 1.0))
    n_range: Tuple[int, int] = Field(default=(100, 1000))

    @field_validator("xi_range", "sigma_range", "a_T_range", "b_T_range", "n_range")
    @classmethod
    def _non_empty(cls, value):
        return _check_range(value)

    def scale_diag(self) -> np.ndarray:
        width = lambda r: (r[1] - r[0]) / math.sqrt(12.0)
        return np.array([
            width(self.xi_range), width(self.xi_range),
            width(self.sigma_range), width(self.sigma_range),
            width(self.a_T_range), width(self.b_T_range),
        ])


def _open_uniform(rng: RngState, low: float, high: float) -> float:
    # redraw the measure-zero lower endpoint
    while True:
        value = rng.uniform(low, high)
        if value > low:
            return float(value)


def sample_prior(cfg: PriorConfig, rng: RngState) -> Tuple[np.ndarray, int]:
    """
    One draw of (theta, n) from the mixture prior.

    With probability 1 - ad_atom_prob eta ~ Unif(eta_range), otherwise eta = 1.
    xi1 ~ Unif(xi1_range) and xi2 | eta, xi1 ~ Unif(xi1 (2eta-1)/eta, xi1 eta/(2eta-1)),
    the upper end capped at the top of xi1_range; eta = 1 forces xi2 = xi1.
    Every draw is feasible for natural_from_reparam.

    Returns:
        Tuple (theta, n) with theta ordered (eta, xi1, xi2, beta1, beta2, sigma_T, w)
    """
    if rng.uniform() < cfg.ad_atom_prob:
        eta = 1.0
    else:
        eta = _open_uniform(rng, *cfg.eta_range)

    xi1 = _open_uniform(rng, *cfg.xi1_range)
    if eta >= 1.0:
        xi2 = xi1
    else:
        low = xi1 * (2.0 * eta - 1.0) / eta
        high = xi1 * eta / (2.0 * eta - 1.0) if eta > 0.5 else math.inf
        high = min(high, cfg.xi1_range[1])
        xi2 = _open_uniform(rng, low, high)
        # keep the pair inside the feasible region after round-off
        eta = min(eta, reparam_upper_bound(xi1, xi2))

    beta1 = _open_uniform(rng, *cfg.beta_range)
    beta2 = _open_uniform(rng, *cfg.beta_range)
    sigma_T = float(rng.uniform(*cfg.sigma_T_range))
    w = float(rng.uniform(*cfg.w_range))
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    return np.array([eta, xi1, xi2, beta1, beta2, sigma_T, w]), n


def sample_bgp_prior(cfg: BgpPriorConfig, rng: RngState) -> Tuple[np.ndarray, int]:
    """One draw of (theta, n) for the bivariate GP baseline."""
    theta = np.array([
        float(rng.uniform(*cfg.xi_range)),
        float(rng.uniform(*cfg.xi_range)),
        _open_uniform(rng, *cfg.sigma_range),
        _open_uniform(rng, *cfg.sigma_range),
        _open_uniform(rng, *cfg.a_T_range),
        float(rng.uniform(*cfg.b_T_range)),
    ])
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    return theta, n


def project_feasible(theta: np.ndarray) -> np.ndarray:
    """Clamp eta onto the feasible region 1 / (2 - min(xi)/max(xi)) of an estimate."""
    out = np.array(theta, dtype=float)
    out[0] = min(out[0], reparam_upper_bound(out[1], out[2]))
    return out

