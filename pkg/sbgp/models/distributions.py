"""
Core Distributions
Scalar building-block laws of the sBGP construction: generalized Pareto,
gamma, the hypoexponential numerator wE + (1-w)E_j, the half-normal shift
and the latent ratio V_j = N_j / (G + G_j).

All evaluators accept scalars or numpy arrays; scalar input gives a float back.
"""

import logging
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from sbgp.exceptions import DomainError

logger = logging.getLogger(__name__)

RngState = np.random.Generator
ArrayLike = Union[float, Sequence[float], np.ndarray]

# Branch switches for the weight w
HALF_WEIGHT_BAND = 1e-6
DEGENERATE_WEIGHT_BAND = 1e-12


class GpParams(BaseModel):
    """Generalized Pareto law with non-negative tail index."""
    model_config = ConfigDict(frozen=True)

    xi: float = Field(ge=0.0, description="Tail index")
    sigma: float = Field(gt=0.0, description="Scale")


class VjLaw(BaseModel):
    """Law of the latent ratio V_j = (wE + (1-w)E_j) / Gamma(1/xi, 1)."""
    model_config = ConfigDict(frozen=True)

    xi: float = Field(gt=0.0, description="Tail index, equals 1/(alpha + alpha_j)")
    w: float = Field(ge=0.0, le=1.0, description="Weight of the shared exponential")


class ShiftLaw(BaseModel):
    """Law of S_j = max(T_1, T_2) - T_j with T_j iid N(0, sigma_T^2)."""
    model_config = ConfigDict(frozen=True)

    sigma_T: float = Field(ge=0.0, description="Dispersion of the Gaussian generators")


def make_rng(seed: int | None = None) -> RngState:
    """Create a seedable generator; the same seed replays the same stream."""
    return np.random.default_rng(seed)


def split_rng(rng: RngState, n_streams: int) -> list[RngState]:
    """Spawn independent child streams, one per simulated dataset or job."""
    return rng.spawn(n_streams)


def _to_output(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def _weight_kind(w: float) -> str:
    if min(w, 1.0 - w) < DEGENERATE_WEIGHT_BAND:
        return "degenerate"
    if abs(2.0 * w - 1.0) < HALF_WEIGHT_BAND:
        return "half"
    return "generic"


def _scaled_difference(log_a: np.ndarray, log_b: np.ndarray, w: float) -> np.ndarray:
    """(exp(log_a) - exp(log_b)) / (2w - 1), evaluated without cancellation.

    For w > 1/2 the first term dominates, for w < 1/2 the second one does.
    """
    denom = 2.0 * w - 1.0
    if denom > 0:
        return np.exp(log_a) * -np.expm1(log_b - log_a) / denom
    return np.exp(log_b) * -np.expm1(log_a - log_b) / -denom


# ---------------------------------------------------------------------------
# Generalized Pareto and gamma
# ---------------------------------------------------------------------------

def gp_survival(p: GpParams, z: ArrayLike):
    """
    Survival function of the GP law.

    Args:
        p: GP parameters
        z: Non-negative evaluation point(s)

    Returns:
        (1 + xi z / sigma)^(-1/xi), or exp(-z / sigma) when xi = 0

    Raises:
        DomainError: If any z is negative
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError(f"GP survival is defined for z >= 0, got min(z) = {z.min()}")
    return _to_output(stats.genpareto.sf(z, c=p.xi, scale=p.sigma), scalar)


def gp_density(p: GpParams, z: ArrayLike):
    """GP density, zero below the origin."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    return _to_output(stats.genpareto.pdf(z, c=p.xi, scale=p.sigma), scalar)


def sample_gamma(shape: float, rate: float, rng: RngState, size=None):
    """
    Draw from the gamma law with density rate^a / Gamma(a) g^(a-1) exp(-rate g).

    numpy's generator uses the Marsaglia-Tsang squeeze for shape >= 1 and the
    power boost U^(1/a) for shape < 1.

    Raises:
        DomainError: If shape or rate is not positive
    """
    if shape <= 0 or rate <= 0:
        raise DomainError(f"Gamma law needs shape > 0 and rate > 0, got ({shape}, {rate})")
    return rng.gamma(shape, 1.0 / rate, size)


def sample_gamma_or_zero(shape: float, rng: RngState, size: int) -> np.ndarray:
    """Gamma(shape, 1) draws with Gamma(0, 1) read as the constant 0."""
    if shape == 0:
        return np.zeros(size)
    return sample_gamma(shape, 1.0, rng, size)


# ---------------------------------------------------------------------------
# Hypoexponential numerator
# ---------------------------------------------------------------------------

def sample_numerator(w: float, rng: RngState, size: int) -> np.ndarray:
    """Draws of N = wE + (1-w)E' for independent unit exponentials."""
    return w * rng.standard_exponential(size) + (1.0 - w) * rng.standard_exponential(size)


def hypoexp_survival(w: float, u: ArrayLike):
    """
    Survival function of N = wE + (1-w)E'.

    The generic branch is [w e^(-u/w) - (1-w) e^(-u/(1-w))] / (2w - 1); it
    equals 1 at u = 0 and mixes over Gamma(1/xi) into the survival of V_j.

    Args:
        w: Weight in [0, 1]
        u: Non-negative evaluation point(s)
    """
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"Weight must lie in [0, 1], got {w}")
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("Hypoexponential survival is defined for u >= 0")

    kind = _weight_kind(w)
    if kind == "degenerate":
        out = np.exp(-u)
    elif kind == "half":
        out = (1.0 + 2.0 * u) * np.exp(-2.0 * u)
    else:
        out = _scaled_difference(np.log(w) - u / w, np.log1p(-w) - u / (1.0 - w), w)
    return _to_output(np.clip(out, 0.0, 1.0), scalar)


# ---------------------------------------------------------------------------
# Shift vector
# ---------------------------------------------------------------------------

def sample_shift(law: ShiftLaw, rng: RngState, size: int | None = None) -> Tuple:
    """
    Draw (S_1, S_2) = (max(T) - T_1, max(T) - T_2) with T_j iid N(0, sigma_T^2).

    Exactly one component is zero almost surely. With size=None a pair of
    floats is returned, otherwise a pair of arrays.
    """
    shape = (1 if size is None else size, 2)
    if law.sigma_T == 0:
        t = np.zeros(shape)
    else:
        t = rng.normal(0.0, law.sigma_T, shape)
    top = t.max(axis=1)
    s1, s2 = top - t[:, 0], top - t[:, 1]
    if size is None:
        return float(s1[0]), float(s2[0])
    return s1, s2


def shift_mean(law: ShiftLaw) -> float:
    """E[S_j] = sigma_T / sqrt(pi)."""
    return law.sigma_T / np.sqrt(np.pi)


def shift_variance(law: ShiftLaw) -> float:
    """Var[S_j] = (1 - 1/pi) sigma_T^2."""
    return (1.0 - 1.0 / np.pi) * law.sigma_T ** 2


def _halfnormal_scale(law: ShiftLaw) -> float:
    if law.sigma_T <= 0:
        raise DomainError("S_j | S_j > 0 is degenerate when sigma_T = 0")
    return np.sqrt(2.0) * law.sigma_T


def halfnormal_cond_cdf(law: ShiftLaw, s: ArrayLike):
    """
    Cdf of S_j | S_j > 0, the half-normal law 2 Phi(s / (sqrt(2) sigma_T)) - 1.

    Raises:
        DomainError: If sigma_T = 0
    """
    scale = _halfnormal_scale(law)
    scalar = np.ndim(s) == 0
    return _to_output(stats.halfnorm.cdf(np.asarray(s, dtype=float), scale=scale), scalar)


def halfnormal_cond_pdf(law: ShiftLaw, s: ArrayLike):
    """Density of S_j | S_j > 0."""
    scale = _halfnormal_scale(law)
    scalar = np.ndim(s) == 0
    return _to_output(stats.halfnorm.pdf(np.asarray(s, dtype=float), scale=scale), scalar)


def halfnormal_cond_upper(law: ShiftLaw) -> float:
    """Upper integration bound for S_j | S_j > 0: its mean plus 8 sqrt(2) sigma_T."""
    return 2.0 * law.sigma_T / np.sqrt(np.pi) + 8.0 * np.sqrt(2.0) * law.sigma_T


# ---------------------------------------------------------------------------
# Latent ratio V_j
# ---------------------------------------------------------------------------

def v_survival(law: VjLaw, x: ArrayLike):
    """
    Survival function of V_j.

    Generic weights give [w(1+x/w)^(-1/xi) - (1-w)(1+x/(1-w))^(-1/xi)] / (2w-1);
    w in {0, 1} reduces to the GP(xi, xi) survival (1+x)^(-1/xi) and w = 1/2
    to (1+2x)^(-1/xi-1) (1 + 2x(1 + 1/xi)). Powers are taken in log space.

    Raises:
        DomainError: If any x is negative
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("V_j survival is defined for x >= 0")

    a, w = 1.0 / law.xi, law.w
    kind = _weight_kind(w)
    if kind == "degenerate":
        out = np.exp(-a * np.log1p(x))
    elif kind == "half":
        out = np.exp(-(a + 1.0) * np.log1p(2.0 * x)) * (1.0 + 2.0 * x * (1.0 + a))
    else:
        out = _scaled_difference(
            np.log(w) - a * np.log1p(x / w),
            np.log1p(-w) - a * np.log1p(x / (1.0 - w)),
            w,
        )
    return _to_output(np.clip(out, 0.0, 1.0), scalar)


def v_cdf(law: VjLaw, x: ArrayLike):
    """Cdf of V_j, zero on the negative half-line."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    positive = x > 0
    out[positive] = 1.0 - v_survival(law, x[positive])
    return _to_output(out, scalar)


def v_density(law: VjLaw, x: ArrayLike):
    """
    Density of V_j; zero for x < 0.

    Generic weights give
    [(1+x/w)^(-1/xi-1) - (1+x/(1-w))^(-1/xi-1)] / (xi (2w-1)).
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x >= 0
    xp = x[pos]

    a, w = 1.0 / law.xi, law.w
    kind = _weight_kind(w)
    if kind == "degenerate":
        out[pos] = a * np.exp(-(a + 1.0) * np.log1p(xp))
    elif kind == "half":
        out[pos] = 4.0 * xp * a * (a + 1.0) * np.exp(-(a + 2.0) * np.log1p(2.0 * xp))
    else:
        out[pos] = _scaled_difference(
            np.log(a) - (a + 1.0) * np.log1p(xp / w),
            np.log(a) - (a + 1.0) * np.log1p(xp / (1.0 - w)),
            w,
        )
    return _to_output(out, scalar)


def v_tail_constants(law: VjLaw) -> Tuple[float, float]:
    """
    Constants (C, D) of the expansion x^(1/xi) P(V_j > x) = C (1 - D/(xi x) + ...).

    Returns:
        Tuple (C, D); C = D = 1 for w in {0, 1}
    """
    a, w = 1.0 / law.xi, law.w
    kind = _weight_kind(w)
    if kind == "degenerate":
        return 1.0, 1.0
    if kind == "half":
        return 2.0 ** (-a) * (a + 1.0), (1.0 + 2.0 * law.xi) / (2.0 + 2.0 * law.xi)
    top1 = w ** (a + 1.0) - (1.0 - w) ** (a + 1.0)
    top2 = w ** (a + 2.0) - (1.0 - w) ** (a + 2.0)
    return top1 / (2.0 * w - 1.0), top2 / top1
