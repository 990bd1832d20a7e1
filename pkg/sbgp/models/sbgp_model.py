"""
sBGP Model
The sub-asymptotic bivariate generalized Pareto distribution

    Y_j = beta_j ( (wE + (1-w)E_j) / (G + G_j) - S_j ),   j = 1, 2,

with E, E_1, E_2 unit exponentials, G ~ Gamma(alpha), G_j ~ Gamma(alpha_j)
and the shift S_j = max(T_1, T_2) - T_j of Gaussian generators.

Provides parameter models, the (eta, xi1, xi2) <-> (alpha, alpha1, alpha2)
reparameterization, the exact sampler, marginal density / cdf / quantile /
moments, the GP tail approximation and closed-form tail coefficients.
"""

import logging
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, optimize

from sbgp.exceptions import ConstraintViolationError, DomainError, UndefinedMomentError
from sbgp.models.distributions import (
    GpParams,
    RngState,
    ShiftLaw,
    VjLaw,
    gp_survival,
    halfnormal_cond_cdf,
    halfnormal_cond_pdf,
    halfnormal_cond_upper,
    sample_gamma_or_zero,
    sample_numerator,
    sample_shift,
    shift_mean,
    shift_variance,
    v_cdf,
    v_density,
    v_survival,
    v_tail_constants,
)

logger = logging.getLogger(__name__)

# Canonical ordering of parameter vectors across the toolkit
PARAM_ORDER = ("eta", "xi1", "xi2", "beta1", "beta2", "sigma_T", "w")
NATURAL_KEYS = ("alpha", "alpha1", "alpha2", "beta1", "beta2", "sigma_T", "w")
DERIVED_KEYS = ("eta", "xi1", "xi2", "chi")

SPECIAL_WEIGHT_BAND = 1e-6
QUAD_ABS_TOL = 1e-9


class SbgpParams(BaseModel):
    """Natural parameters (alpha, alpha1, alpha2, beta1, beta2, sigma_T, w)."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(ge=0.0, description="Shape of the shared gamma component G")
    alpha1: float = Field(ge=0.0, description="Shape of the first individual gamma component")
    alpha2: float = Field(ge=0.0, description="Shape of the second individual gamma component")
    beta1: float = Field(gt=0.0, description="Scale of the first margin")
    beta2: float = Field(gt=0.0, description="Scale of the second margin")
    sigma_T: float = Field(ge=0.0, description="Dispersion of the Gaussian shift generators")
    w: float = Field(ge=0.0, le=1.0, description="Weight of the shared exponential")

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.alpha + min(self.alpha1, self.alpha2) <= 0:
            raise ValueError("alpha + min(alpha1, alpha2) must be positive")
        return self

    def alpha_j(self, j: int) -> float:
        return (self.alpha1, self.alpha2)[_margin_index(j)]

    def beta(self, j: int) -> float:
        return (self.beta1, self.beta2)[_margin_index(j)]

    def xi(self, j: int) -> float:
        return 1.0 / (self.alpha + self.alpha_j(j))

    @property
    def xi1(self) -> float:
        return self.xi(1)

    @property
    def xi2(self) -> float:
        return self.xi(2)

    def vj_law(self, j: int) -> VjLaw:
        return VjLaw(xi=self.xi(j), w=self.w)

    @property
    def shift_law(self) -> ShiftLaw:
        return ShiftLaw(sigma_T=self.sigma_T)

    def beta_star(self, j: int) -> float:
        """Scale rescaled by the mean of the latent ratio, beta_j xi_j / (1 - xi_j)."""
        xi = self.xi(j)
        return self.beta(j) * xi / (1.0 - xi) if xi < 1 else float("inf")

    def to_theta(self) -> np.ndarray:
        """Canonical vector (eta, xi1, xi2, beta1, beta2, sigma_T, w)."""
        derived = derived_from_natural(self)
        return np.array([derived.eta, derived.xi1, derived.xi2,
                         self.beta1, self.beta2, self.sigma_T, self.w])

    @classmethod
    def from_theta(cls, theta) -> "SbgpParams":
        """Build natural parameters from a canonical vector."""
        eta, xi1, xi2, beta1, beta2, sigma_T, w = (float(v) for v in theta)
        alpha, alpha1, alpha2 = natural_from_reparam(ReparamTriple(eta=eta, xi1=xi1, xi2=xi2))
        return cls(alpha=alpha, alpha1=alpha1, alpha2=alpha2, beta1=beta1, beta2=beta2,
                   sigma_T=sigma_T, w=w)

    def to_json(self) -> Dict[str, Any]:
        """Natural parameters plus read-only derived fields."""
        derived = derived_from_natural(self)
        out: Dict[str, Any] = {key: getattr(self, key) for key in NATURAL_KEYS}
        out.update(eta=derived.eta, xi1=derived.xi1, xi2=derived.xi2, chi=derived.chi)
        out.update(beta1_star=self.beta_star(1), beta2_star=self.beta_star(2))
        return out

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SbgpParams":
        """Parse the JSON object; derived fields are ignored on input."""
        missing = [key for key in NATURAL_KEYS if key not in data]
        if missing:
            raise ValueError(f"sBGP parameter object is missing keys: {', '.join(missing)}")
        return cls(**{key: data[key] for key in NATURAL_KEYS})


class DerivedParams(BaseModel):
    """Marginal tail indices and tail dependence coefficients."""
    xi1: float = Field(gt=0.0, description="Tail index of the first margin")
    xi2: float = Field(gt=0.0, description="Tail index of the second margin")
    eta: float = Field(ge=0.5, le=1.0, description="Residual tail dependence coefficient")
    chi: float = Field(ge=0.0, le=1.0, description="Tail dependence coefficient")


class ReparamTriple(BaseModel):
    """Prior coordinates (eta, xi1, xi2)."""
    eta: float = Field(ge=0.5, le=1.0, description="Residual tail dependence coefficient")
    xi1: float = Field(gt=0.0, description="Tail index of the first margin")
    xi2: float = Field(gt=0.0, description="Tail index of the second margin")


class TailApprox(BaseModel):
    """Upper GP tail H(x) of a margin with its first-order correction Delta."""
    xi: float = Field(gt=0.0)
    sigma: float = Field(gt=0.0)
    delta: float

    def survival(self, x):
        return gp_survival(GpParams(xi=self.xi, sigma=self.sigma), x)

    def quantile(self, q: float) -> float:
        """Level-q quantile of the approximating GP law."""
        return self.sigma / self.xi * ((1.0 - q) ** (-self.xi) - 1.0)


REFERENCE_THETAS = {
    1: SbgpParams(alpha=3, alpha1=0, alpha2=0, beta1=20, beta2=30, sigma_T=0.1, w=0.8),
    2: SbgpParams(alpha=2, alpha1=1, alpha2=1, beta1=20, beta2=30, sigma_T=0.1, w=0.6),
    3: SbgpParams(alpha=1, alpha1=2, alpha2=2, beta1=20, beta2=30, sigma_T=0.1, w=0.2),
}


def reference_params(k: int) -> SbgpParams:
    """
    Fixed configurations used in the simulation study.

    1: asymptotic dependence (eta = 1); 2: eta = 0.75; 3: eta = 0.6.
    """
    if k not in REFERENCE_THETAS:
        raise DomainError(f"Reference configuration must be 1, 2 or 3, got {k}")
    return REFERENCE_THETAS[k]


def _margin_index(j: int) -> int:
    if j not in (1, 2):
        raise DomainError(f"Margin index must be 1 or 2, got {j}")
    return j - 1


# ---------------------------------------------------------------------------
# Tail coefficients and reparameterization
# ---------------------------------------------------------------------------

def ad_chi(alpha: float, w: float) -> float:
    """
    Tail dependence coefficient in the asymptotically dependent case.

    chi = [(2w-1)/(3w-1)] [2w^(a+1) - 2^(-a)(1-w)^(a+1)] / [w^(a+1) - (1-w)^(a+1)]
    with its continuous extensions at w = 1/3 and w = 1/2.
    """
    if w < 1e-12:
        return 2.0 ** (-alpha)
    if 1.0 - w < 1e-12:
        return 1.0
    if abs(w - 1.0 / 3.0) < SPECIAL_WEIGHT_BAND:
        return (alpha + 1.0) / (2.0 ** (alpha + 1.0) - 1.0)
    if abs(w - 0.5) < SPECIAL_WEIGHT_BAND:
        return (2.0 - 2.0 ** (-alpha)) / (alpha + 1.0)
    a1 = alpha + 1.0
    top = 2.0 * w ** a1 - 2.0 ** (-alpha) * (1.0 - w) ** a1
    bottom = w ** a1 - (1.0 - w) ** a1
    return float(np.clip((2.0 * w - 1.0) / (3.0 * w - 1.0) * top / bottom, 0.0, 1.0))


def derived_from_natural(p: SbgpParams) -> DerivedParams:
    """
    Marginal tail indices and the coefficients (eta, chi).

    Args:
        p: Natural parameters

    Returns:
        DerivedParams; chi = 0 whenever max(alpha1, alpha2) > 0, eta = 1
        when alpha1 = alpha2 = 0. sigma_T never enters.
    """
    top = max(p.alpha1, p.alpha2)
    if top > 0:
        eta = (p.alpha + top) / (p.alpha + 2.0 * top)
        chi = 0.0
    else:
        eta = 1.0
        chi = ad_chi(p.alpha, p.w)
    return DerivedParams(xi1=p.xi1, xi2=p.xi2, eta=eta, chi=chi)


def reparam_upper_bound(xi1: float, xi2: float) -> float:
    """Largest feasible eta for the pair of tail indices, 1 / (2 - min/max)."""
    ratio = min(xi1, xi2) / max(xi1, xi2)
    return 1.0 / (2.0 - ratio)


def natural_from_reparam(t: ReparamTriple, tol: float = 1e-9) -> Tuple[float, float, float]:
    """
    Invert (eta, xi1, xi2) to (alpha, alpha1, alpha2).

    alpha = (2 eta - 1) / (eta min(xi1, xi2)) and alpha_j = 1/xi_j - alpha.

    Args:
        t: Triple to invert
        tol: Relative slack for round-off at the feasibility boundary

    Raises:
        ConstraintViolationError: If eta exceeds 1 / (2 - min(xi)/max(xi)),
            or eta = 1 with xi1 != xi2
    """
    bound = reparam_upper_bound(t.xi1, t.xi2)
    if t.eta > bound * (1.0 + tol):
        raise ConstraintViolationError(
            f"Infeasible triple (eta={t.eta}, xi1={t.xi1}, xi2={t.xi2}): "
            f"eta must not exceed 1/(2 - min(xi)/max(xi)) = {bound:.6g}"
        )
    if t.eta >= 1.0:
        if abs(t.xi1 - t.xi2) > tol * max(t.xi1, t.xi2):
            raise ConstraintViolationError(
                f"eta = 1 requires xi1 == xi2, got ({t.xi1}, {t.xi2})"
            )
        return 1.0 / min(t.xi1, t.xi2), 0.0, 0.0

    alpha = (2.0 * t.eta - 1.0) / (t.eta * min(t.xi1, t.xi2))
    alphas = []
    for xi in (t.xi1, t.xi2):
        a_j = 1.0 / xi - alpha
        if a_j < 0:
            # round-off on the boundary eta = bound
            if a_j < -tol * (1.0 / xi):
                raise ConstraintViolationError(
                    f"Infeasible triple (eta={t.eta}, xi1={t.xi1}, xi2={t.xi2}): negative alpha_j"
                )
            a_j = 0.0
        alphas.append(a_j)
    return alpha, alphas[0], alphas[1]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample(p: SbgpParams, n: int, rng: RngState) -> np.ndarray:
    """
    Exact simulation of n iid rows from the sBGP law.

    Args:
        p: Natural parameters
        n: Number of rows
        rng: Generator driving all draws

    Returns:
        Array of shape (n, 2)

    Raises:
        DomainError: If n < 1
    """
    if n < 1:
        raise DomainError(f"Sample size must be at least 1, got {n}")

    shared = rng.standard_exponential(n)
    g = sample_gamma_or_zero(p.alpha, rng, n)
    s1, s2 = sample_shift(p.shift_law, rng, n)

    out = np.empty((n, 2))
    for col, (alpha_j, beta_j, s_j) in enumerate(((p.alpha1, p.beta1, s1), (p.alpha2, p.beta2, s2))):
        numerator = p.w * shared + (1.0 - p.w) * rng.standard_exponential(n)
        denominator = g + sample_gamma_or_zero(alpha_j, rng, n)
        out[:, col] = beta_j * (numerator / denominator - s_j)
    return out


def sample_latent_v(law: VjLaw, n: int, rng: RngState) -> np.ndarray:
    """Draws of V_j = N_j / Gamma(1/xi, 1)."""
    return sample_numerator(law.w, rng, n) / rng.gamma(1.0 / law.xi, 1.0, n)


# ---------------------------------------------------------------------------
# Marginal law
# ---------------------------------------------------------------------------

def _vectorize(func, y):
    scalar = np.ndim(y) == 0
    values = np.array([func(float(v)) for v in np.atleast_1d(np.asarray(y, dtype=float))])
    return float(values[0]) if scalar else values


def marginal_density(p: SbgpParams, j: int, y):
    """
    Density of Y_j:

        f(y) = 1/(2 beta) [ f_V(y/beta) + int_0^inf f_V(y/beta + s) f_{S|S>0}(s) ds ],

    the integral taken by adaptive Gauss-Kronrod quadrature on
    [max(0, -y/beta), mean + 8 sqrt(2) sigma_T].
    """
    law, beta, shift = p.vj_law(j), p.beta(j), p.shift_law
    if shift.sigma_T == 0:
        return _vectorize(lambda v: v_density(law, v / beta) / beta, y)

    upper = halfnormal_cond_upper(shift)

    def _one(v: float) -> float:
        x = v / beta
        lower = max(0.0, -x)
        mixed = 0.0
        if lower < upper:
            mixed, _ = integrate.quad(
                lambda s: v_density(law, x + s) * halfnormal_cond_pdf(shift, s),
                lower, upper, epsabs=QUAD_ABS_TOL, limit=200,
            )
        return (v_density(law, x) + mixed) / (2.0 * beta)

    return _vectorize(_one, y)


def marginal_survival(p: SbgpParams, j: int, y):
    """P(Y_j > y) computed directly, accurate in the upper tail."""
    law, beta, shift = p.vj_law(j), p.beta(j), p.shift_law

    def _sv(x: float) -> float:
        return 1.0 if x <= 0 else v_survival(law, x)

    if shift.sigma_T == 0:
        return _vectorize(lambda v: _sv(v / beta), y)

    upper = halfnormal_cond_upper(shift)

    def _one(v: float) -> float:
        x = v / beta
        start = min(max(0.0, -x), upper)
        # S below -x pushes V - S above zero surely
        certain = halfnormal_cond_cdf(shift, start) if start > 0 else 0.0
        tail, _ = integrate.quad(
            lambda s: _sv(x + s) * halfnormal_cond_pdf(shift, s),
            start, upper, epsabs=0.0, epsrel=1e-10, limit=200,
        )
        return 0.5 * _sv(x) + 0.5 * (certain + tail)

    return _vectorize(_one, y)


def marginal_cdf(p: SbgpParams, j: int, y):
    """
    Cdf of Y_j, F(y) = 1/2 [F_V(y/beta) + E(F_V(y/beta + S) | S > 0)].

    Below the origin the mixture integral is evaluated directly; above it the
    complement of marginal_survival is used.
    """
    law, beta, shift = p.vj_law(j), p.beta(j), p.shift_law

    def _one(v: float) -> float:
        if v > 0:
            return 1.0 - marginal_survival(p, j, v)
        x = v / beta
        if shift.sigma_T == 0:
            return 0.0
        upper = halfnormal_cond_upper(shift)
        lower = -x
        if lower >= upper:
            return 0.0
        mixed, _ = integrate.quad(
            lambda s: v_cdf(law, x + s) * halfnormal_cond_pdf(shift, s),
            lower, upper, epsabs=QUAD_ABS_TOL, limit=200,
        )
        return 0.5 * mixed

    return _vectorize(_one, y)


def marginal_quantile(p: SbgpParams, j: int, q: float) -> float:
    """
    Solve F(y) = q by bracketing from the GP tail approximation and Brent's method.

    Raises:
        DomainError: If q is not in (0, 1)
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"Quantile level must lie in (0, 1), got {q}")
    beta, shift = p.beta(j), p.shift_law
    lower = -beta * halfnormal_cond_upper(shift) if shift.sigma_T > 0 else 0.0

    tail = gp_tail_approx(p, j)
    upper = max(beta, tail.quantile(q))
    while marginal_cdf(p, j, upper) < q:
        upper *= 2.0
        if upper > 1e300:
            raise DomainError(f"Could not bracket the level-{q} quantile")

    return float(optimize.brentq(lambda v: marginal_cdf(p, j, v) - q, lower, upper,
                                 xtol=1e-12, maxiter=500))


def marginal_mean(p: SbgpParams, j: int) -> float:
    """E[Y_j] = beta_j (xi_j/(1-xi_j) - sigma_T/sqrt(pi)); independent of w."""
    xi = p.xi(j)
    if not 0 < xi < 1:
        raise UndefinedMomentError(f"The mean of Y_{j} needs xi_{j} in (0, 1), got {xi:.4g}")
    return p.beta(j) * (xi / (1.0 - xi) - shift_mean(p.shift_law))


def marginal_variance(p: SbgpParams, j: int) -> float:
    """Var[Y_j]; needs xi_j < 1/2."""
    xi, w = p.xi(j), p.w
    if not 0 < xi < 0.5:
        raise UndefinedMomentError(f"The variance of Y_{j} needs xi_{j} in (0, 1/2), got {xi:.4g}")
    latent = (w ** 2 + (1 - w) ** 2 + 2 * xi * w * (1 - w)) / ((1 / xi - 1) ** 2 * (1 - 2 * xi))
    return p.beta(j) ** 2 * (latent + shift_variance(p.shift_law))


def marginal_moments(p: SbgpParams, j: int) -> Tuple[float, float]:
    """Mean and variance of Y_j (UndefinedMomentError when either does not exist)."""
    return marginal_mean(p, j), marginal_variance(p, j)


def gp_tail_approx(p: SbgpParams, j: int) -> TailApprox:
    """
    Upper GP tail of Y_j: xi_j, sigma_j = beta_j C^xi_j xi_j and the first
    order correction Delta = (E[S_j] + D - C^xi_j) / (xi_j / beta_j).
    """
    xi, beta = p.xi(j), p.beta(j)
    c, d = v_tail_constants(p.vj_law(j))
    c_xi = c ** xi
    return TailApprox(
        xi=xi,
        sigma=beta * c_xi * xi,
        delta=(shift_mean(p.shift_law) + d - c_xi) / (xi / beta),
    )


# ---------------------------------------------------------------------------
# Asymptotically dependent case, sigma_T = 0
# ---------------------------------------------------------------------------

def ad_survival_pair(alpha: float, w: float, x, s: int):
    """
    p_s(x) for alpha1 = alpha2 = 0: p_1 = P(V > x), p_2 = P(V_1 > x, V_2 > x).

        p_s(x) = [s w / c] (1 + x/w)^(-alpha) - [(1-w)/c] (1 + s x/(1-w))^(-alpha),
        c = (s+1) w - 1,

    continuously extended at w = 1/(s+1) by z^(-alpha-1) (z + alpha (z-1)),
    z = 1 + (s+1) x.
    """
    if s not in (1, 2):
        raise DomainError(f"s must be 1 or 2, got {s}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("p_s(x) is defined for x >= 0")

    c = (s + 1) * w - 1.0
    if w < 1e-12:
        out = np.exp(-alpha * np.log1p(s * x))
    elif 1.0 - w < 1e-12:
        out = np.exp(-alpha * np.log1p(x))
    elif abs(c) < SPECIAL_WEIGHT_BAND:
        z = 1.0 + (s + 1) * x
        out = np.exp(-(alpha + 1.0) * np.log(z)) * (z + alpha * (z - 1.0))
    else:
        log_a = np.log(s * w) - alpha * np.log1p(x / w)
        log_b = np.log1p(-w) - alpha * np.log1p(s * x / (1.0 - w))
        if c > 0:
            out = np.exp(log_a) * -np.expm1(log_b - log_a) / c
        else:
            out = np.exp(log_b) * -np.expm1(log_a - log_b) / -c
    out = np.clip(out, 0.0, 1.0)
    return float(out) if scalar else out


def _ad_level_point(alpha: float, w: float, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError(f"Level must lie in (0, 1), got {q}")
    target = 1.0 - q
    upper = 1.0
    while ad_survival_pair(alpha, w, upper, 1) > target:
        upper *= 2.0
    return float(optimize.brentq(lambda v: ad_survival_pair(alpha, w, v, 1) - target,
                                 0.0, upper, xtol=1e-14, rtol=1e-14, maxiter=500))


def ad_chi_at_level(alpha: float, w: float, q: float) -> float:
    """
    chi(q) = p_2(x_q) / (1 - q) where p_1(x_q) = 1 - q (alpha1 = alpha2 = 0, sigma_T = 0).

    Raises:
        DomainError: If q is not in (0, 1)
    """
    x_q = _ad_level_point(alpha, w, q)
    return ad_survival_pair(alpha, w, x_q, 2) / (1.0 - q)


def ad_eta_at_level(alpha: float, w: float, q: float) -> float:
    """Companion eta(q) of ad_chi_at_level."""
    # local import: sbgp.models.dependence imports this module
    from sbgp.models.dependence import eta_from_chi

    return eta_from_chi(q, ad_chi_at_level(alpha, w, q))
