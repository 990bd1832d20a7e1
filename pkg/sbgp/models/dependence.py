"""
Dependence
Rank-based tail dependence machinery: ranks, the empirical chi(q), eta(q)
from chi(q), the Hill-type eta estimator and model-implied curves obtained
from one large simulated sample.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import stats

from sbgp.exceptions import DomainError, NoJointExceedancesError
from sbgp.models.distributions import RngState
from sbgp.models.sbgp_model import SbgpParams, sample

logger = logging.getLogger(__name__)

# Sample sizes for model-implied curves: per fitted model / reference curve
PER_FIT_MC_SIZE = 10_000
REFERENCE_MC_SIZE = 100_000


class ChiCurve(BaseModel):
    """Paired grid of levels q and chi(q) values."""
    levels: List[float] = Field(description="Strictly increasing probability levels in [0, 1)")
    values: List[float] = Field(description="chi(q) at each level")

    @field_validator("levels")
    @classmethod
    def _check_levels(cls, levels: List[float]) -> List[float]:
        if any(q < 0 or q >= 1 for q in levels):
            raise ValueError("Levels must lie in [0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("Levels must be strictly increasing")
        return levels

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.levels) != len(self.values):
            raise ValueError("levels and values must have the same length")
        if not all(np.isfinite(self.values)):
            raise ValueError("chi(q) values must be finite")
        return self

    def eta_values(self) -> List[float]:
        """eta(q) per level, NaN where there is no joint exceedance."""
        out = []
        for q, chi in zip(self.levels, self.values):
            try:
                out.append(eta_from_chi(q, chi))
            except (NoJointExceedancesError, DomainError):
                out.append(float("nan"))
        return out

    def to_frame(self, with_eta: bool = False) -> pd.DataFrame:
        """Table with columns q, chi (and eta)."""
        frame = pd.DataFrame({"q": self.levels, "chi": self.values})
        if with_eta:
            frame["eta"] = self.eta_values()
        return frame


def _check_sample(sample_: np.ndarray, min_rows: int) -> np.ndarray:
    data = np.asarray(sample_, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DomainError(f"Expected an n x 2 sample, got shape {data.shape}")
    if data.shape[0] < min_rows:
        raise DomainError(f"Need at least {min_rows} rows, got {data.shape[0]}")
    return data


def ranks(sample_: np.ndarray) -> np.ndarray:
    """
    Column-wise ranks, 1 = smallest; ties are broken by row order.

    Raises:
        DomainError: If fewer than two rows
    """
    data = _check_sample(sample_, 2)
    return stats.rankdata(data, method="ordinal", axis=0).astype(np.int64)


def _chi_from_ranks(rank_matrix: np.ndarray, q: float) -> float:
    if not 0.0 <= q < 1.0:
        raise DomainError(f"Level must lie in [0, 1), got {q}")
    n = rank_matrix.shape[0]
    cut = (n + 1) * q
    joint = np.count_nonzero((rank_matrix[:, 0] > cut) & (rank_matrix[:, 1] > cut))
    return joint / (n * (1.0 - q))


def chi_hat(sample_: np.ndarray, q: float) -> float:
    """
    Empirical chi(q): joint exceedances of the rank threshold (N+1)q,
    normalized by N(1-q).

    Raises:
        DomainError: If q is outside [0, 1) or fewer than two rows
    """
    return _chi_from_ranks(ranks(sample_), q)


def eta_from_chi(q: float, chi_q: float) -> float:
    """
    eta(q) = log(1-q) / (log(1-q) + log chi(q)).

    Raises:
        DomainError: If q is outside (0, 1)
        NoJointExceedancesError: If chi(q) <= 0
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"Level must lie in (0, 1), got {q}")
    if chi_q <= 0:
        raise NoJointExceedancesError(f"No joint exceedances at level {q}; eta(q) is undefined")
    log_tail = np.log1p(-q)
    return float(log_tail / (log_tail + np.log(chi_q)))


def eta_hill(sample_: np.ndarray, k: Optional[int] = None) -> float:
    """
    Hill-type estimator of eta from pseudo-observations U = R / (n+1).

    With Z_i = min((1-U_i1)^-1, (1-U_i2)^-1) and k = floor(n/10),
    eta = mean_{j<=k} log(Z_(n-j+1) / Z_(n-k)).

    Args:
        sample_: n x 2 sample, n >= 20
        k: Number of upper order statistics, overrides floor(n/10)

    Raises:
        DomainError: If n < 20 or k is out of range
    """
    data = _check_sample(sample_, 20)
    n = data.shape[0]
    u = ranks(data) / (n + 1.0)
    z = np.sort(np.minimum(1.0 / (1.0 - u[:, 0]), 1.0 / (1.0 - u[:, 1])))
    k = n // 10 if k is None else int(k)
    if not 1 <= k < n:
        raise DomainError(f"Hill k must lie in [1, n), got {k}")
    return float(np.mean(np.log(z[n - k:] / z[n - k - 1])))


def chi_curve(sample_: np.ndarray, levels: Sequence[float]) -> ChiCurve:
    """chi_hat at every level, sharing one rank matrix."""
    rank_matrix = ranks(sample_)
    levels = [float(q) for q in levels]
    return ChiCurve(levels=levels, values=[_chi_from_ranks(rank_matrix, q) for q in levels])


def mc_chi_curve(p: SbgpParams, levels: Sequence[float], N: int, rng: RngState) -> ChiCurve:
    """
    Model-implied chi(q) from one simulated sample of size N.

    Raises:
        DomainError: If N < 1000
    """
    if N < 1000:
        raise DomainError(f"Monte-Carlo curves need N >= 1000, got {N}")
    return chi_curve(sample(p, N, rng), levels)


def mc_eta_curve(p: SbgpParams, levels: Sequence[float], N: int, rng: RngState) -> List[float]:
    """Model-implied eta(q) from the simulated chi(q), NaN without joint exceedances."""
    return mc_chi_curve(p, levels, N, rng).eta_values()


def parse_levels(text: str) -> List[float]:
    """
    Parse a level grid: either "start:stop:count" or a comma separated list.

    Examples:
        "0.5:0.999:50" -> 50 evenly spaced levels
        "0.5,0.9" -> [0.5, 0.9]
    """
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Level grid must be start:stop:count, got '{text}'")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("Level grid needs a positive count")
        return [float(q) for q in np.linspace(start, stop, count)]
    return [float(part) for part in text.split(",") if part.strip()]
