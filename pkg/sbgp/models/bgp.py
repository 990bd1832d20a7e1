"""
Bivariate GP Baseline
Standardised bivariate generalized Pareto vectors Z = E - S with a Gumbel
spectral generator, mapped to GP margins by Z'_j = sigma_j (exp(xi_j Z_j) - 1) / xi_j.
Used as the asymptotically dependent benchmark against the sBGP model.
"""

import logging
from typing import Any, Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sbgp.exceptions import DomainError
from sbgp.models.distributions import RngState

logger = logging.getLogger(__name__)

BGP_PARAM_ORDER = ("xi1", "xi2", "sigma1", "sigma2", "a_T", "b_T")


class BgpParams(BaseModel):
    """Margins (xi_j, sigma_j) and Gumbel generator (scale a_T, location b_T)."""
    model_config = ConfigDict(frozen=True)

    xi1: float = Field(ge=0.0, description="Tail index of the first margin")
    xi2: float = Field(ge=0.0, description="Tail index of the second margin")
    sigma1: float = Field(gt=0.0, description="GP scale of the first margin")
    sigma2: float = Field(gt=0.0, description="GP scale of the second margin")
    a_T: float = Field(gt=0.0, description="Gumbel scale of the generators")
    b_T: float = Field(description="Gumbel location of the generators")

    def to_theta(self) -> np.ndarray:
        return np.array([getattr(self, key) for key in BGP_PARAM_ORDER], dtype=float)

    @classmethod
    def from_theta(cls, theta) -> "BgpParams":
        return cls(**{key: float(v) for key, v in zip(BGP_PARAM_ORDER, theta)})

    def to_json(self) -> Dict[str, Any]:
        # sigma_j is already the GP scale of the positive part (the beta* column)
        out: Dict[str, Any] = {key: getattr(self, key) for key in BGP_PARAM_ORDER}
        out.update(beta1_star=self.sigma1, beta2_star=self.sigma2)
        return out

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "BgpParams":
        missing = [key for key in BGP_PARAM_ORDER if key not in data]
        if missing:
            raise ValueError(f"BGP parameter object is missing keys: {', '.join(missing)}")
        return cls(**{key: data[key] for key in BGP_PARAM_ORDER})


def sample_standardised(p: BgpParams, n: int, rng: RngState) -> np.ndarray:
    """
    Standardised vectors Z = E - S, S_j = max(T) - T_j, T_j iid Gumbel(b_T, a_T).

    max(Z) = E > 0 on every row.
    """
    if n < 1:
        raise DomainError(f"Sample size must be at least 1, got {n}")
    e = rng.standard_exponential(n)
    t = rng.gumbel(loc=p.b_T, scale=p.a_T, size=(n, 2))
    s = t.max(axis=1, keepdims=True) - t
    return e[:, None] - s


def to_gp_margins(z: np.ndarray, xi: float, sigma: float) -> np.ndarray:
    """Z' = sigma (exp(xi Z) - 1) / xi, or sigma Z when xi = 0; increasing in Z."""
    if xi == 0:
        return sigma * z
    return sigma * np.expm1(xi * z) / xi


def sample_bgp(p: BgpParams, n: int, rng: RngState) -> np.ndarray:
    """
    Draw n rows from the bivariate GP law with GP margins.

    Returns:
        Array of shape (n, 2)
    """
    z = sample_standardised(p, n, rng)
    out = np.empty_like(z)
    out[:, 0] = to_gp_margins(z[:, 0], p.xi1, p.sigma1)
    out[:, 1] = to_gp_margins(z[:, 1], p.xi2, p.sigma2)
    return out


def bgp_exceedances_above(z: np.ndarray, v: float) -> np.ndarray:
    """Z - v 1 given max(Z) > v, on the standardised scale."""
    z = np.asarray(z, dtype=float)
    return z[z.max(axis=1) > v] - v


def fit_bgp(sample_: np.ndarray, wts) -> BgpParams:
    """
    Point estimate of the BGP parameters with a trained six-output network.

    Raises:
        WeightsFormatError: If the weights belong to another model family
        UntrainedWeightsError: If the weights never went through training
    """
    # local import: sbgp.nbe.network imports this module through sbgp.nbe.family
    from sbgp.nbe.network import estimate

    theta = estimate(wts, sample_, family="bgp").as_array()
    return BgpParams.from_theta(theta)
