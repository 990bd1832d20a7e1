"""
Model Family abstraction layer.
Supports the estimator's two model families: the sBGP model and the
bivariate GP baseline. A family knows its parameter ordering, output
activations, prior and simulator, so training and inference stay generic.
"""

import os
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from sbgp.exceptions import DomainError
from sbgp.models.bgp import BGP_PARAM_ORDER, BgpParams, sample_bgp
from sbgp.models.distributions import RngState
from sbgp.models.sbgp_model import PARAM_ORDER, SbgpParams, sample
from sbgp.nbe.prior import (
    BgpPriorConfig,
    PriorConfig,
    project_feasible,
    sample_bgp_prior,
    sample_prior,
)


class ModelFamily(ABC):
    """Abstract base class for simulable parametric families."""

    name: str
    param_names: Tuple[str, ...]
    # Output transform per coordinate: half_sigmoid, sigmoid, softplus or identity
    output_activations: Tuple[str, ...]
    # Coordinate anchored by the penalized loss, None if the family has none
    penalty_index: Optional[int] = None

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @abstractmethod
    def sample_prior(self, rng: RngState) -> Tuple[np.ndarray, int]:
        """
        Draw a parameter vector and a sample size from the prior.

        Returns:
            Tuple (theta, n)
        """
        pass

    @abstractmethod
    def simulate(self, theta: np.ndarray, n: int, rng: RngState) -> np.ndarray:
        """Simulate an n x 2 sample at the canonical vector theta."""
        pass

    @abstractmethod
    def scale_diag(self) -> np.ndarray:
        """Default diagonal of the loss scale matrix D."""
        pass

    @abstractmethod
    def params_from_theta(self, theta: np.ndarray):
        """Validated parameter object for a canonical vector."""
        pass

    @abstractmethod
    def theta_from_json(self, data: Dict[str, Any]) -> np.ndarray:
        """Canonical vector from a parameter JSON object."""
        pass

    def params_to_json(self, theta: np.ndarray) -> Dict[str, Any]:
        """JSON object for a canonical vector, including the vector itself."""
        out = self.params_from_theta(theta).to_json()
        out["family"] = self.name
        out["theta"] = {key: float(v) for key, v in zip(self.param_names, theta)}
        return out


class SbgpFamily(ModelFamily):
    """Sub-asymptotic bivariate GP family."""

    name = "sbgp"
    param_names = PARAM_ORDER
    output_activations = ("half_sigmoid", "softplus", "softplus", "softplus",
                          "softplus", "softplus", "sigmoid")
    penalty_index = 0

    def __init__(self, prior: Optional[PriorConfig] = None):
        """
        Initialize the sBGP family.

        Args:
            prior: Prior configuration (default: PriorConfig())
        """
        self.prior = prior or PriorConfig()

    def sample_prior(self, rng: RngState) -> Tuple[np.ndarray, int]:
        return sample_prior(self.prior, rng)

    def simulate(self, theta: np.ndarray, n: int, rng: RngState) -> np.ndarray:
        return sample(self.params_from_theta(theta), n, rng)

    def scale_diag(self) -> np.ndarray:
        return self.prior.scale_diag()

    def params_from_theta(self, theta: np.ndarray) -> SbgpParams:
        # network outputs are not jointly constrained, so eta is clamped first
        return SbgpParams.from_theta(project_feasible(theta))

    def theta_from_json(self, data: Dict[str, Any]) -> np.ndarray:
        return SbgpParams.from_json(data).to_theta()


class BgpFamily(ModelFamily):
    """Bivariate GP family with Gumbel generator."""

    name = "bgp"
    param_names = BGP_PARAM_ORDER
    output_activations = ("softplus", "softplus", "softplus", "softplus", "softplus", "identity")

    def __init__(self, prior: Optional[BgpPriorConfig] = None):
        """
        Initialize the bivariate GP family.

        Args:
            prior: Prior configuration (default: BgpPriorConfig())
        """
        self.prior = prior or BgpPriorConfig()

    def sample_prior(self, rng: RngState) -> Tuple[np.ndarray, int]:
        return sample_bgp_prior(self.prior, rng)

    def simulate(self, theta: np.ndarray, n: int, rng: RngState) -> np.ndarray:
        return sample_bgp(self.params_from_theta(theta), n, rng)

    def scale_diag(self) -> np.ndarray:
        return self.prior.scale_diag()

    def params_from_theta(self, theta: np.ndarray) -> BgpParams:
        return BgpParams.from_theta(theta)

    def theta_from_json(self, data: Dict[str, Any]) -> np.ndarray:
        return BgpParams.from_json(data).to_theta()


FAMILIES = ("sbgp", "bgp")


def create_family(family_type: Optional[str] = None, prior: Any = None) -> ModelFamily:
    """
    Factory function to create model families.

    Args:
        family_type: 'sbgp' or 'bgp' (default: SBGP_FAMILY environment variable, else 'sbgp')
        prior: PriorConfig / BgpPriorConfig, or a plain dict parsed into one

    Returns:
        ModelFamily instance

    Raises:
        DomainError: If family_type is unknown
    """
    family_type = (family_type or os.getenv("SBGP_FAMILY", "sbgp")).lower()

    if family_type == "sbgp":
        if isinstance(prior, dict):
            prior = PriorConfig.model_validate(prior)
        return SbgpFamily(prior)

    elif family_type == "bgp":
        if isinstance(prior, dict):
            prior = BgpPriorConfig.model_validate(prior)
        return BgpFamily(prior)

    else:
        raise DomainError(f"Unknown model family: {family_type}. Supported: {', '.join(FAMILIES)}")


def family_names() -> List[str]:
    return list(FAMILIES)
