"""
Bootstrap
Nonparametric and parametric bootstrap around a fitted estimator, percentile
confidence intervals and pointwise chi(q) bands from the replicates.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from sbgp.exceptions import DomainError
from sbgp.models.dependence import ChiCurve, chi_curve
from sbgp.models.distributions import RngState, split_rng
from sbgp.nbe.family import ModelFamily, create_family
from sbgp.nbe.network import NetworkWeights, estimate

logger = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.95
# Resample counts used for simulation studies and for application curves
DEFAULT_B = 200
DEFAULT_B_CURVES = 100

Refit = Callable[[np.ndarray], np.ndarray]
Simulate = Callable[[np.ndarray, int, RngState], np.ndarray]


def default_workers() -> int:
    return max(1, int(os.getenv("SBGP_WORKERS", "1")))


def percentile_intervals(replicates: np.ndarray, level: float) -> np.ndarray:
    """Empirical (1-level)/2 and 1-(1-level)/2 quantiles per column, shape (k, 2)."""
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(replicates, [tail, 1.0 - tail], axis=0)
    return np.column_stack([lo, hi])


@dataclass
class BootstrapResult:
    """B x k matrix of refitted parameter vectors with percentile intervals."""
    replicates: np.ndarray
    param_names: Tuple[str, ...]
    level: float = DEFAULT_LEVEL
    family: str = "sbgp"

    def __post_init__(self):
        self.replicates = np.atleast_2d(np.asarray(self.replicates, dtype=float))
        if self.replicates.shape[1] != len(self.param_names):
            raise DomainError(
                f"Replicates have {self.replicates.shape[1]} columns for {len(self.param_names)} parameters"
            )
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"Confidence level must lie in (0, 1), got {self.level}")

    @property
    def B(self) -> int:
        return self.replicates.shape[0]

    @property
    def intervals(self) -> np.ndarray:
        return percentile_intervals(self.replicates, self.level)

    def interval(self, name: str) -> Tuple[float, float]:
        lo, hi = self.intervals[self.param_names.index(name)]
        return float(lo), float(hi)

    def to_frame(self) -> pd.DataFrame:
        """One replicate per row."""
        return pd.DataFrame(self.replicates, columns=list(self.param_names))

    def summary_json(self) -> Dict[str, Any]:
        intervals = self.intervals
        return {
            "family": self.family,
            "B": self.B,
            "level": self.level,
            "intervals": {
                name: {"lo": float(lo), "hi": float(hi), "median": float(med)}
                for name, (lo, hi), med in zip(self.param_names, intervals, np.median(self.replicates, axis=0))
            },
        }

    def save(self, csv_path: Union[str, Path]) -> Tuple[Path, Path]:
        """Write the replicate CSV and a JSON summary next to it."""
        csv_path = Path(csv_path)
        self.to_frame().to_csv(csv_path, index=False)
        json_path = csv_path.with_suffix(".json")
        with open(json_path, "w") as f:
            json.dump(self.summary_json(), f, indent=2)
        return csv_path, json_path


def _run_replicates(job: Callable[[RngState], np.ndarray], B: int, rng: RngState,
                    desc: str, workers: Optional[int]) -> np.ndarray:
    # one child stream per replicate; map() keeps the gather order fixed
    streams = split_rng(rng, B)
    workers = workers or default_workers()
    quiet = B < 20 or not logger.isEnabledFor(logging.INFO)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(tqdm(pool.map(job, streams), total=B, desc=desc, disable=quiet))
    return np.vstack(rows)


def nonparam_bootstrap(sample_: np.ndarray, wts: NetworkWeights, B: int, rng: RngState,
                       level: float = DEFAULT_LEVEL, workers: Optional[int] = None) -> BootstrapResult:
    """
    Resample n rows with replacement B times and re-estimate each resample.

    Raises:
        DomainError: If B < 2
    """
    if B < 2:
        raise DomainError(f"Nonparametric bootstrap needs B >= 2, got {B}")
    data = np.asarray(sample_, dtype=float)
    n = data.shape[0]

    def job(stream: RngState) -> np.ndarray:
        rows = stream.integers(0, n, size=n)
        return estimate(wts, data[rows]).as_array()

    replicates = _run_replicates(job, B, rng, "Bootstrap", workers)
    logger.info(f"Nonparametric bootstrap: {B} replicates of n = {n}")
    return BootstrapResult(replicates, tuple(wts.param_order), level, wts.family)


def param_bootstrap(theta: np.ndarray, n: int, simulate: Simulate, refit: Refit, B: int, rng: RngState,
                    param_names: Sequence[str], level: float = DEFAULT_LEVEL, family: str = "sbgp",
                    workers: Optional[int] = None) -> BootstrapResult:
    """
    Simulate B datasets of size n at the fitted theta and refit each.

    Args:
        theta: Fitted parameter vector
        n: Size of every simulated dataset
        simulate: (theta, n, rng) -> n x 2 sample
        refit: sample -> parameter vector
        B: Number of replicates, B >= 1
        rng: Random generator
        param_names: Column names of the replicate matrix
    """
    if B < 1:
        raise DomainError(f"Parametric bootstrap needs B >= 1, got {B}")
    theta = np.asarray(theta, dtype=float)

    def job(stream: RngState) -> np.ndarray:
        return np.asarray(refit(simulate(theta, n, stream)), dtype=float)

    replicates = _run_replicates(job, B, rng, "Parametric bootstrap", workers)
    return BootstrapResult(replicates, tuple(param_names), level, family)


def param_bootstrap_nbe(theta: np.ndarray, n: int, wts: NetworkWeights, B: int, rng: RngState,
                        family: Optional[ModelFamily] = None, level: float = DEFAULT_LEVEL,
                        workers: Optional[int] = None) -> BootstrapResult:
    """Parametric bootstrap refitting with the network behind wts."""
    family = family or create_family(wts.family)
    return param_bootstrap(
        theta, n, family.simulate, lambda data: estimate(wts, data).as_array(), B, rng,
        wts.param_order, level, family.name, workers,
    )


def replicate_chi_curves(result: BootstrapResult, levels: Sequence[float], N_mc: int, rng: RngState,
                         family: Optional[ModelFamily] = None, workers: Optional[int] = None) -> np.ndarray:
    """
    Model-implied chi(q) at each replicate, one simulated sample of N_mc rows per replicate.

    Returns:
        Array of shape (B, len(levels))
    """
    if N_mc < 1000:
        raise DomainError(f"Monte-Carlo curves need N >= 1000, got {N_mc}")
    family = family or create_family(result.family)
    levels = [float(q) for q in levels]
    replicates = result.replicates
    streams = split_rng(rng, result.B)

    def job(b: int) -> List[float]:
        data = family.simulate(replicates[b], N_mc, streams[b])
        return chi_curve(data, levels).values

    with ThreadPoolExecutor(max_workers=workers or default_workers()) as pool:
        rows = list(pool.map(job, range(result.B)))
    return np.array(rows, dtype=float)


def bootstrap_chi_bands(result: BootstrapResult, levels: Sequence[float], N_mc: int, rng: RngState,
                        family: Optional[ModelFamily] = None, band_level: float = 0.95,
                        workers: Optional[int] = None) -> Tuple[ChiCurve, ChiCurve]:
    """
    Pointwise lower / upper envelopes of the replicate chi(q) curves.

    Returns:
        Tuple (lower, upper) of ChiCurve
    """
    if result.B < 1:
        raise DomainError("Bootstrap result has no replicates")
    curves = replicate_chi_curves(result, levels, N_mc, rng, family, workers)
    bounds = percentile_intervals(curves, band_level)
    levels = [float(q) for q in levels]
    return (
        ChiCurve(levels=levels, values=bounds[:, 0].tolist()),
        ChiCurve(levels=levels, values=bounds[:, 1].tolist()),
    )


def interval_coverage(results: Sequence[BootstrapResult], truth: np.ndarray) -> pd.DataFrame:
    """
    Empirical coverage of the true parameter and mean interval width over repeated bootstraps.

    Returns:
        Frame with columns param, coverage, mean_width
    """
    truth = np.asarray(truth, dtype=float)
    if not results:
        raise DomainError("Coverage needs at least one bootstrap result")
    intervals = np.stack([r.intervals for r in results])
    covered = (intervals[:, :, 0] <= truth) & (truth <= intervals[:, :, 1])
    return pd.DataFrame({
        "param": list(results[0].param_names),
        "coverage": covered.mean(axis=0),
        "mean_width": (intervals[:, :, 1] - intervals[:, :, 0]).mean(axis=0),
    })
