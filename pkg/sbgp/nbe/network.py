"""
DeepSets Network
Permutation-invariant estimator theta_hat = phi(mean_i psi(Y_i), S) where S is
the vector of empirical chi(q) summaries. Dense layers are plain numpy arrays
so that the forward pass, the reverse pass and serialization stay explicit.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from sbgp.exceptions import DomainError, StructuralError, UntrainedWeightsError, WeightsFormatError
from sbgp.models.dependence import chi_curve
from sbgp.models.distributions import RngState
from sbgp.nbe.family import ModelFamily, create_family

logger = logging.getLogger(__name__)

SUMMARY_LEVELS = (0.50, 0.60, 0.70, 0.80, 0.85, 0.90, 0.95, 0.98)
PSI_DIMS = (2, 64, 64, 128, 128)
PHI_HIDDEN = (128, 64, 64)
ACTIVATIONS = ("half_sigmoid", "sigmoid", "softplus", "identity")

# Keeps sigmoid outputs strictly inside (0, 1) in double precision
SIGMOID_CLIP = 1e-12
SOFTPLUS_FLOOR = np.finfo(float).tiny


@dataclass
class NetworkWeights:
    """Dense layers of the psi and phi networks plus the metadata needed to use them."""
    params: Dict[str, np.ndarray]
    psi_dims: Tuple[int, ...]
    phi_dims: Tuple[int, ...]
    activations: Tuple[str, ...]
    family: str
    param_order: Tuple[str, ...]
    summary_levels: Tuple[float, ...] = SUMMARY_LEVELS
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def trained(self) -> bool:
        return bool(self.metadata.get("trained", False))

    @property
    def n_outputs(self) -> int:
        return self.phi_dims[-1]

    def layer_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Expected shape of every array, in serialization order."""
        shapes: Dict[str, Tuple[int, ...]] = {}
        for prefix, dims in (("psi", self.psi_dims), ("phi", self.phi_dims)):
            for i in range(len(dims) - 1):
                shapes[f"{prefix}.{i}.weight"] = (dims[i], dims[i + 1])
                shapes[f"{prefix}.{i}.bias"] = (dims[i + 1],)
        return shapes

    def validate(self) -> None:
        """
        Check layer dimensions and entries.

        Raises:
            StructuralError: On mismatched dimensions or non-finite entries
        """
        if self.phi_dims[0] != self.psi_dims[-1] + len(self.summary_levels):
            raise StructuralError(
                f"phi input {self.phi_dims[0]} != psi output {self.psi_dims[-1]} "
                f"+ {len(self.summary_levels)} summaries"
            )
        if len(self.activations) != self.n_outputs or len(self.param_order) != self.n_outputs:
            raise StructuralError(f"{self.n_outputs} outputs need as many activations and parameter names")
        unknown = set(self.activations) - set(ACTIVATIONS)
        if unknown:
            raise StructuralError(f"Unknown output activations: {sorted(unknown)}")
        expected = self.layer_shapes()
        if set(expected) != set(self.params):
            raise StructuralError(f"Layer names differ: expected {sorted(expected)}")
        for key, shape in expected.items():
            if self.params[key].shape != shape:
                raise StructuralError(f"{key}: expected shape {shape}, got {self.params[key].shape}")
            if not np.all(np.isfinite(self.params[key])):
                raise StructuralError(f"{key}: non-finite entries")

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            params={key: value.copy() for key, value in self.params.items()},
            psi_dims=self.psi_dims,
            phi_dims=self.phi_dims,
            activations=self.activations,
            family=self.family,
            param_order=self.param_order,
            summary_levels=self.summary_levels,
            metadata=dict(self.metadata),
        )


class EstimatorOutput(BaseModel):
    """Point estimate in the family's canonical parameter order."""
    theta_hat: List[float] = Field(description="Estimated parameter vector")
    param_names: Tuple[str, ...] = Field(description="Name of each coordinate")
    family: str = "sbgp"

    def as_array(self) -> np.ndarray:
        return np.array(self.theta_hat, dtype=float)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.param_names, self.theta_hat))


def init_weights(family: Union[str, ModelFamily], rng: RngState) -> NetworkWeights:
    """
    Fresh weights for a family, entries ~ Unif(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Args:
        family: ModelFamily instance or family name
        rng: Random generator

    Returns:
        Untrained NetworkWeights
    """
    if isinstance(family, str):
        family = create_family(family)
    psi_dims = PSI_DIMS
    phi_dims = (PSI_DIMS[-1] + len(SUMMARY_LEVELS),) + PHI_HIDDEN + (family.n_params,)

    params: Dict[str, np.ndarray] = {}
    for prefix, dims in (("psi", psi_dims), ("phi", phi_dims)):
        for i in range(len(dims) - 1):
            bound = 1.0 / np.sqrt(dims[i])
            params[f"{prefix}.{i}.weight"] = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
            params[f"{prefix}.{i}.bias"] = rng.uniform(-bound, bound, size=dims[i + 1])

    return NetworkWeights(
        params=params,
        psi_dims=psi_dims,
        phi_dims=phi_dims,
        activations=tuple(family.output_activations),
        family=family.name,
        param_order=tuple(family.param_names),
        metadata={"trained": False, "steps": 0},
    )


def summary_stats(sample_: np.ndarray, levels: Sequence[float] = SUMMARY_LEVELS) -> np.ndarray:
    """Empirical chi(q) at the summary levels, in order."""
    return np.array(chi_curve(sample_, levels).values, dtype=float)


def canonical_order(sample_: np.ndarray) -> np.ndarray:
    """
    Rows sorted lexicographically.

    Raises:
        StructuralError: If the sample is not n x 2
        DomainError: If n < 2
    """
    data = np.asarray(sample_, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise StructuralError(f"Expected an n x 2 sample, got shape {data.shape}")
    if data.shape[0] < 2:
        raise DomainError(f"Need at least 2 rows, got {data.shape[0]}")
    return data[np.lexsort((data[:, 1], data[:, 0]))]


def _relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def _apply_output(z: np.ndarray, activations: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Output transforms and their derivatives with respect to z."""
    out = np.empty_like(z)
    slope = np.empty_like(z)
    for k, kind in enumerate(activations):
        if kind == "identity":
            out[k], slope[k] = z[k], 1.0
            continue
        s = expit(z[k])
        if kind == "softplus":
            out[k] = max(np.logaddexp(0.0, z[k]), SOFTPLUS_FLOOR)
            slope[k] = s
            continue
        clipped = min(max(s, SIGMOID_CLIP), 1.0 - SIGMOID_CLIP)
        if kind == "sigmoid":
            out[k], slope[k] = clipped, s * (1.0 - s)
        else:
            out[k], slope[k] = 0.5 + 0.5 * clipped, 0.5 * s * (1.0 - s)
    return out, slope


def psi_aggregate(wts: NetworkWeights, sample_: np.ndarray) -> np.ndarray:
    """Mean over rows of the psi features, a vector of length psi_dims[-1]."""
    h = canonical_order(sample_)
    for i in range(len(wts.psi_dims) - 1):
        h = _relu(h @ wts.params[f"psi.{i}.weight"] + wts.params[f"psi.{i}.bias"])
    return h.mean(axis=0)


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by backward()."""
    psi_inputs: List[np.ndarray]
    psi_pre: List[np.ndarray]
    phi_inputs: List[np.ndarray]
    phi_pre: List[np.ndarray]
    output_slope: np.ndarray
    n_rows: int


def forward_cached(wts: NetworkWeights, sample_: np.ndarray,
                   summary: Optional[np.ndarray] = None) -> Tuple[np.ndarray, ForwardCache]:
    """
    Forward pass keeping the activations for the reverse pass.

    Args:
        wts: Network weights
        sample_: n x 2 sample
        summary: Precomputed summary statistics of the sample

    Returns:
        Tuple (theta_hat array, cache)
    """
    h = canonical_order(sample_)
    if summary is None:
        summary = summary_stats(h, wts.summary_levels)

    psi_inputs, psi_pre = [], []
    for i in range(len(wts.psi_dims) - 1):
        psi_inputs.append(h)
        a = h @ wts.params[f"psi.{i}.weight"] + wts.params[f"psi.{i}.bias"]
        psi_pre.append(a)
        h = _relu(a)

    u = np.concatenate([h.mean(axis=0), summary])
    phi_inputs, phi_pre = [], []
    n_phi = len(wts.phi_dims) - 1
    for i in range(n_phi):
        phi_inputs.append(u)
        a = u @ wts.params[f"phi.{i}.weight"] + wts.params[f"phi.{i}.bias"]
        phi_pre.append(a)
        u = _relu(a) if i < n_phi - 1 else a

    theta_hat, slope = _apply_output(u, wts.activations)
    cache = ForwardCache(psi_inputs, psi_pre, phi_inputs, phi_pre, slope, h.shape[0])
    return theta_hat, cache


def backward(wts: NetworkWeights, cache: ForwardCache, d_theta: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Gradient of a scalar with respect to every weight, given its gradient d_theta
    with respect to the outputs. Summary statistics are constants.
    """
    grads: Dict[str, np.ndarray] = {}
    d = d_theta * cache.output_slope

    n_phi = len(wts.phi_dims) - 1
    for i in reversed(range(n_phi)):
        if i < n_phi - 1:
            d = d * (cache.phi_pre[i] > 0)
        grads[f"phi.{i}.weight"] = np.outer(cache.phi_inputs[i], d)
        grads[f"phi.{i}.bias"] = d
        d = wts.params[f"phi.{i}.weight"] @ d

    n_psi_out = wts.psi_dims[-1]
    d_rows = np.broadcast_to(d[:n_psi_out] / cache.n_rows, (cache.n_rows, n_psi_out))
    for i in reversed(range(len(wts.psi_dims) - 1)):
        d_rows = d_rows * (cache.psi_pre[i] > 0)
        grads[f"psi.{i}.weight"] = cache.psi_inputs[i].T @ d_rows
        grads[f"psi.{i}.bias"] = d_rows.sum(axis=0)
        if i > 0:
            d_rows = d_rows @ wts.params[f"psi.{i}.weight"].T
    return grads


def forward(wts: NetworkWeights, sample_: np.ndarray) -> EstimatorOutput:
    """
    Point estimate for one sample.

    Rows are put in canonical order first, so any row permutation of the
    sample gives a bitwise-identical output.

    Raises:
        StructuralError: If the sample is not n x 2
        DomainError: If n < 2
    """
    theta_hat, _ = forward_cached(wts, sample_)
    return EstimatorOutput(theta_hat=theta_hat.tolist(), param_names=wts.param_order, family=wts.family)


def estimate(wts: NetworkWeights, sample_: np.ndarray, family: Optional[str] = None) -> EstimatorOutput:
    """
    Amortized point estimate with trained weights.

    Args:
        wts: Trained or loaded weights
        sample_: n x 2 sample
        family: Expected model family, checked against the weights

    Raises:
        WeightsFormatError: If the weights belong to another family
        UntrainedWeightsError: If the weights never went through training
    """
    if family is not None and wts.family != family:
        raise WeightsFormatError(f"Weights are for the '{wts.family}' family, expected '{family}'")
    if not wts.trained:
        raise UntrainedWeightsError("Weights are untrained; run `train` first or load a weights file")
    return forward(wts, sample_)


def fit_json(wts: NetworkWeights, sample_: np.ndarray) -> Dict[str, Any]:
    """Estimate and report it as the family's parameter JSON (derived quantities included)."""
    theta_hat = estimate(wts, sample_).as_array()
    family = create_family(wts.family)
    out = family.params_to_json(theta_hat)
    out["n"] = int(np.asarray(sample_).shape[0])
    out["penalized"] = float(wts.metadata.get("loss_lambda", 0.0)) > 0
    return out
