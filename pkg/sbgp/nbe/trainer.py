"""
Neural Bayes Estimator Training
Empirical risk minimization on data simulated on the fly from the prior:
classical squared loss, the eta-penalized variant, exact gradients through
the DeepSets network and an Adam loop with validation early stopping.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from sbgp.exceptions import DomainError, TrainingDivergedError
from sbgp.models.dependence import eta_hill
from sbgp.models.distributions import RngState, split_rng
from sbgp.nbe.family import ModelFamily
from sbgp.nbe.network import (
    NetworkWeights,
    backward,
    canonical_order,
    forward_cached,
    init_weights,
    summary_stats,
)
from sbgp.nbe.optimizer import Adam

logger = logging.getLogger(__name__)

# Consecutive non-finite draws tolerated before simulation is declared broken
MAX_REDRAWS = 1000


class TrainConfig(BaseModel):
    """Training hyperparameters."""
    model_config = ConfigDict(populate_by_name=True)

    learning_rate: float = Field(default=1e-4, gt=0.0, description="Adam step size")
    batch_size: int = Field(default=32, ge=1, description="Simulated datasets per step")
    num_steps: int = Field(default=20_000, ge=0, description="Adam steps")
    loss_lambda: float = Field(default=0.0, ge=0.0, alias="lambda",
                               description="Weight of the eta penalty, 0 gives the classical loss")
    scale_matrix_diag: Optional[List[float]] = Field(default=None,
                                                     description="Diagonal of D, defaults to prior SDs")
    validation_size: int = Field(default=256, ge=1, description="Held-out simulated datasets")
    eval_every: int = Field(default=200, ge=1, description="Steps between validation evaluations")
    patience: int = Field(default=20, ge=1, description="Evaluations without improvement before stopping")

    @field_validator("scale_matrix_diag")
    @classmethod
    def _positive_scale(cls, value):
        if value is not None and any(not d > 0 for d in value):
            raise ValueError("scale_matrix_diag entries must be positive")
        return value

    def scale_for(self, family: ModelFamily) -> np.ndarray:
        """
        The loss scale diagonal for a family.

        Raises:
            DomainError: If an explicit diagonal has the wrong length
        """
        if self.scale_matrix_diag is None:
            return family.scale_diag()
        scale = np.asarray(self.scale_matrix_diag, dtype=float)
        if scale.shape != (family.n_params,):
            raise DomainError(f"scale_matrix_diag needs {family.n_params} entries, got {scale.size}")
        return scale


@dataclass
class TrainingItem:
    """One simulated dataset with the statistics that stay constant during training."""
    theta: np.ndarray
    sample: np.ndarray
    summary: np.ndarray
    eta_emp: Optional[float] = None


@dataclass
class TrainingResult:
    """Outcome of a training run."""
    weights: NetworkWeights
    validation_trace: List[Tuple[int, float]] = field(default_factory=list)
    train_losses: List[float] = field(default_factory=list)
    steps_run: int = 0
    best_step: int = 0
    rejected: int = 0
    stopped_early: bool = False

    @property
    def best_risk(self) -> Optional[float]:
        if not self.validation_trace:
            return None
        return min(risk for _, risk in self.validation_trace)


def prepare_item(theta: np.ndarray, sample_: np.ndarray, with_eta: bool = False) -> TrainingItem:
    """Canonical row order, summaries and (optionally) the Hill eta of a dataset."""
    data = canonical_order(sample_)
    return TrainingItem(
        theta=np.asarray(theta, dtype=float),
        sample=data,
        summary=summary_stats(data),
        eta_emp=eta_hill(data) if with_eta else None,
    )


def loss(theta: np.ndarray, theta_hat: np.ndarray, sample_: Optional[np.ndarray], cfg: TrainConfig,
         scale: Optional[np.ndarray] = None, eta_emp: Optional[float] = None,
         penalty_index: Optional[int] = 0) -> float:
    """
    ||D^-1 (theta - theta_hat)||^2 + lambda D_kk^-2 (theta_hat_k - eta_emp)^2.

    The penalty acts on coordinate penalty_index (eta for the sBGP family)
    and is dropped entirely when lambda = 0.

    Args:
        theta: True parameter vector
        theta_hat: Estimate
        sample_: Dataset behind the estimate, used for eta_hill when eta_emp is None
        cfg: Training configuration
        scale: Diagonal of D (default: cfg.scale_matrix_diag, else identity)
        eta_emp: Precomputed Hill estimate
        penalty_index: Penalized coordinate, None disables the penalty
    """
    theta = np.asarray(theta, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if scale is None:
        scale = np.ones_like(theta) if cfg.scale_matrix_diag is None else np.asarray(cfg.scale_matrix_diag)
    value = float(np.sum(((theta - theta_hat) / scale) ** 2))
    if cfg.loss_lambda > 0 and penalty_index is not None:
        if eta_emp is None:
            eta_emp = eta_hill(sample_)
        k = penalty_index
        value += cfg.loss_lambda * float((theta_hat[k] - eta_emp) ** 2 / scale[k] ** 2)
    return value


def _item_loss_and_grad(wts: NetworkWeights, item: TrainingItem, scale: np.ndarray,
                        lam: float, penalty_index: Optional[int]):
    theta_hat, cache = forward_cached(wts, item.sample, item.summary)
    diff = theta_hat - item.theta
    value = float(np.sum((diff / scale) ** 2))
    d_theta = 2.0 * diff / scale ** 2
    if lam > 0 and penalty_index is not None:
        k = penalty_index
        gap = theta_hat[k] - item.eta_emp
        value += lam * float(gap ** 2 / scale[k] ** 2)
        d_theta[k] += 2.0 * lam * gap / scale[k] ** 2
    return value, backward(wts, cache, d_theta)


def gradient(wts: NetworkWeights, batch: Sequence[Union[TrainingItem, Tuple[np.ndarray, np.ndarray]]],
             cfg: TrainConfig, scale: np.ndarray, penalty_index: Optional[int] = 0):
    """
    Mean batch loss and its exact gradient with respect to every weight.

    Datasets are reduced in batch order, so the result is deterministic.

    Args:
        wts: Network weights
        batch: TrainingItems or (theta, sample) pairs
        cfg: Training configuration (lambda)
        scale: Diagonal of D
        penalty_index: Penalized coordinate, None disables the penalty

    Returns:
        Tuple (mean loss, dict of gradients keyed like wts.params)

    Raises:
        DomainError: If the batch is empty
    """
    if len(batch) == 0:
        raise DomainError("Gradient needs a nonempty batch")
    with_eta = cfg.loss_lambda > 0 and penalty_index is not None
    total = 0.0
    grads = {key: np.zeros_like(value) for key, value in wts.params.items()}
    for entry in batch:
        item = entry if isinstance(entry, TrainingItem) else prepare_item(entry[0], entry[1], with_eta)
        if with_eta and item.eta_emp is None:
            item.eta_emp = eta_hill(item.sample)
        value, item_grads = _item_loss_and_grad(wts, item, scale, cfg.loss_lambda, penalty_index)
        total += value
        for key in grads:
            grads[key] += item_grads[key]
    size = float(len(batch))
    for key in grads:
        grads[key] /= size
    return total / size, grads


def simulate_items(family: ModelFamily, count: int, rng: RngState,
                   with_eta: bool = False) -> Tuple[List[TrainingItem], int]:
    """
    Draw count datasets from the prior predictive, rejecting non-finite ones.

    Returns:
        Tuple (items, number of rejected draws)
    """
    items: List[TrainingItem] = []
    rejected = 0
    while len(items) < count:
        theta, n = family.sample_prior(rng)
        data = family.simulate(theta, n, rng)
        if not np.all(np.isfinite(data)):
            rejected += 1
            if rejected >= MAX_REDRAWS * count:
                raise TrainingDivergedError(f"{rejected} simulated datasets were non-finite")
            continue
        items.append(prepare_item(theta, data, with_eta))
    return items, rejected


def validation_risk(wts: NetworkWeights, items: Sequence[TrainingItem], scale: np.ndarray) -> float:
    """Mean classical loss over a held-out set."""
    values = []
    for item in items:
        theta_hat, _ = forward_cached(wts, item.sample, item.summary)
        values.append(float(np.sum(((theta_hat - item.theta) / scale) ** 2)))
    return float(np.mean(values))


def coordinate_rmse(wts: NetworkWeights, items: Sequence[TrainingItem], index: int) -> float:
    """RMSE of one estimated coordinate over a set of datasets."""
    errors = []
    for item in items:
        theta_hat, _ = forward_cached(wts, item.sample, item.summary)
        errors.append(theta_hat[index] - item.theta[index])
    return float(np.sqrt(np.mean(np.square(errors))))


def train(family: ModelFamily, cfg: TrainConfig, rng: RngState,
          init: Optional[NetworkWeights] = None, progress: bool = True) -> TrainingResult:
    """
    Train the estimator on freshly simulated data.

    Every step draws batch_size (theta, n) pairs from the prior, simulates each
    dataset and takes one Adam step. The validation risk on a fixed held-out
    set is evaluated every eval_every steps; training stops after `patience`
    evaluations without improvement and the best weights are returned.

    Args:
        family: Model family (prior and simulator)
        cfg: Training configuration
        rng: Random generator; identical seeds give identical weights
        init: Starting weights (default: fresh initialization)
        progress: Show a tqdm progress bar

    Returns:
        TrainingResult

    Raises:
        TrainingDivergedError: If the batch loss becomes non-finite
    """
    init_rng, val_rng, train_rng = split_rng(rng, 3)
    wts = init.copy() if init is not None else init_weights(family, init_rng)
    scale = cfg.scale_for(family)
    penalty_index = family.penalty_index
    with_eta = cfg.loss_lambda > 0 and penalty_index is not None

    result = TrainingResult(weights=wts)
    wts.metadata.update(loss_lambda=cfg.loss_lambda, steps=wts.metadata.get("steps", 0))
    if cfg.num_steps == 0:
        logger.info("num_steps = 0, returning the initial weights")
        return result

    validation, rejected = simulate_items(family, cfg.validation_size, val_rng)
    result.rejected += rejected
    best_risk = validation_risk(wts, validation, scale)
    result.validation_trace.append((0, best_risk))
    best_params = {key: value.copy() for key, value in wts.params.items()}
    logger.info(f"Initial validation risk: {best_risk:.6g}")

    optimizer = Adam(lr=cfg.learning_rate)
    stale = 0
    bar = tqdm(range(1, cfg.num_steps + 1), desc=f"Training {family.name}", disable=not progress)
    for step in bar:
        batch, rejected = simulate_items(family, cfg.batch_size, train_rng, with_eta)
        if rejected:
            result.rejected += rejected
            logger.debug(f"Step {step}: redrew {rejected} non-finite datasets")

        batch_loss, grads = gradient(wts, batch, cfg, scale, penalty_index)
        if not np.isfinite(batch_loss):
            worst = batch[0].theta.round(4).tolist()
            raise TrainingDivergedError(
                f"Non-finite loss at step {step} (first theta in batch: {worst}); "
                f"try a smaller learning rate"
            )
        optimizer.step(wts.params, grads)
        result.train_losses.append(batch_loss)
        result.steps_run = step

        if step % cfg.eval_every == 0 or step == cfg.num_steps:
            risk = validation_risk(wts, validation, scale)
            result.validation_trace.append((step, risk))
            bar.set_postfix_str(f"loss {batch_loss:.4g}, val {risk:.4g}")
            logger.info(f"Step {step}: validation risk {risk:.6g}")
            if risk < best_risk:
                best_risk, stale, result.best_step = risk, 0, step
                best_params = {key: value.copy() for key, value in wts.params.items()}
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.info(f"Early stopping at step {step}, best step {result.best_step}")
                    result.stopped_early = True
                    break
    bar.close()

    wts.params = best_params
    # only weights that took an optimizer step count as trained
    wts.metadata["trained"] = wts.trained or result.steps_run > 0
    wts.metadata["steps"] = int(wts.metadata.get("steps", 0)) + result.steps_run
    wts.metadata["best_validation_risk"] = best_risk
    if result.rejected:
        logger.warning(f"Rejected {result.rejected} non-finite simulated datasets")
    return result
