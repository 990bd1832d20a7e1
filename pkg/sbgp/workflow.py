"""
LangGraph Workflow
Staged analysis of one pair of sites: ingest the daily CSV, extract the
exceedance set, fit with trained weights, bootstrap the fit and write the
fitted chi(q) curve with its bootstrap bands.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from sbgp.bootstrap import DEFAULT_B_CURVES, bootstrap_chi_bands, nonparam_bootstrap
from sbgp.data_source_manager import (
    exceedance_set,
    load_csv,
    season_filter,
    weekly_maxima,
    write_exceedances,
)
from sbgp.models.dependence import PER_FIT_MC_SIZE, chi_curve
from sbgp.models.distributions import make_rng, split_rng
from sbgp.nbe.family import create_family
from sbgp.nbe.network import fit_json
from sbgp.nbe.serialization import load_weights

logger = logging.getLogger(__name__)


class PipelineState(TypedDict, total=False):
    """State passed through the workflow."""
    # inputs
    csv_path: str
    date_col: str
    columns: List[str]
    weekly: bool
    season: Optional[str]
    level: float
    weights_path: str
    B: int
    seed: int
    levels: List[float]
    N_mc: int
    out_dir: str
    # intermediate
    series: Any
    exceedances: Any
    weights: Any
    bootstrap: Any
    # outputs
    fit: Dict[str, Any]
    artifacts: Dict[str, str]


def _out(state: PipelineState, name: str) -> Path:
    out_dir = Path(state["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def ingest_node(state: PipelineState) -> PipelineState:
    """Node to read, reduce and season-filter the raw series."""
    logger.info("Ingesting data")
    series = load_csv(state["csv_path"], state.get("date_col", "date"), state["columns"])
    if state.get("weekly", True):
        series = weekly_maxima(series)
    if state.get("season"):
        start, end = state["season"].split(":")
        series = season_filter(series, start, end)
    logger.info(f"{len(series)} rows after reduction")
    state["series"] = series
    return state


def exceedances_node(state: PipelineState) -> PipelineState:
    """Node to extract the L-shaped exceedance set."""
    logger.info("Extracting exceedances")
    es = exceedance_set(state["series"], state.get("level", 0.7))
    path, meta = write_exceedances(es, _out(state, "exceedances.csv"))
    state["exceedances"] = es
    state.setdefault("artifacts", {}).update(exceedances=str(path), exceedances_meta=str(meta))
    logger.info(f"Kept {es.rows.shape[0]} of {es.total_n} rows")
    return state


def fit_node(state: PipelineState) -> PipelineState:
    """Node to fit the exceedance set with trained weights."""
    logger.info("Fitting")
    wts = load_weights(state["weights_path"])
    fitted = fit_json(wts, state["exceedances"].excesses)
    fitted["thresholds"] = list(state["exceedances"].thresholds)
    path = _out(state, "fit.json")
    with open(path, "w") as f:
        json.dump(fitted, f, indent=2)
    state["weights"] = wts
    state["fit"] = fitted
    state["artifacts"]["fit"] = str(path)
    return state


def bootstrap_node(state: PipelineState) -> PipelineState:
    """Node to bootstrap the fit."""
    B = state.get("B", DEFAULT_B_CURVES)
    logger.info(f"Bootstrapping ({B} resamples)")
    boot_rng, _ = split_rng(make_rng(state.get("seed")), 2)
    result = nonparam_bootstrap(state["exceedances"].excesses, state["weights"], B, boot_rng)
    csv_path, json_path = result.save(_out(state, "bootstrap.csv"))
    state["bootstrap"] = result
    state["artifacts"].update(bootstrap=str(csv_path), bootstrap_summary=str(json_path))
    return state


def chi_curve_node(state: PipelineState) -> PipelineState:
    """Node to write empirical, fitted and banded chi(q) curves."""
    logger.info("Computing chi(q) curves")
    _, curve_rng = split_rng(make_rng(state.get("seed")), 2)
    fit_rng, band_rng = split_rng(curve_rng, 2)
    levels = state["levels"]
    n_mc = state.get("N_mc", PER_FIT_MC_SIZE)
    family = create_family(state["weights"].family)

    theta = [state["fit"]["theta"][name] for name in family.param_names]
    empirical = chi_curve(state["exceedances"].excesses, levels)
    fitted = chi_curve(family.simulate(theta, n_mc, fit_rng), levels)
    lower, upper = bootstrap_chi_bands(state["bootstrap"], levels, n_mc, band_rng, family)

    frame = empirical.to_frame().rename(columns={"chi": "empirical"})
    frame["fitted"] = fitted.values
    frame["lower"] = lower.values
    frame["upper"] = upper.values
    path = _out(state, "chi_curve.csv")
    frame.to_csv(path, index=False)
    state["artifacts"]["chi_curve"] = str(path)
    return state


def create_workflow():
    """Create the LangGraph workflow."""
    workflow = StateGraph(PipelineState)

    # Add nodes
    workflow.add_node("ingest", ingest_node)
    workflow.add_node("exceedances", exceedances_node)
    workflow.add_node("fit", fit_node)
    workflow.add_node("bootstrap", bootstrap_node)
    workflow.add_node("chi_curve", chi_curve_node)

    # Add edges
    workflow.set_entry_point("ingest")
    workflow.add_edge("ingest", "exceedances")
    workflow.add_edge("exceedances", "fit")
    workflow.add_edge("fit", "bootstrap")
    workflow.add_edge("bootstrap", "chi_curve")
    workflow.add_edge("chi_curve", END)

    return workflow.compile()


def run_pipeline(
    csv_path: str,
    columns: List[str],
    weights_path: str,
    out_dir: str,
    date_col: str = "date",
    weekly: bool = True,
    season: Optional[str] = None,
    level: float = 0.7,
    B: int = DEFAULT_B_CURVES,
    seed: Optional[int] = None,
    levels: Optional[List[float]] = None,
    N_mc: int = PER_FIT_MC_SIZE,
) -> PipelineState:
    """
    Run the complete workflow.

    Args:
        csv_path: Daily CSV with a date column and the two site columns
        columns: The two site columns
        weights_path: Trained weights file
        out_dir: Directory receiving every artefact
        seed: Seed of the bootstrap and Monte-Carlo streams (default: SBGP_SEED)

    Returns:
        Final state; state["artifacts"] maps artefact names to paths
    """
    seed = seed if seed is not None else int(os.getenv("SBGP_SEED", "2024"))
    levels = levels or [0.5 + 0.01 * i for i in range(49)]

    logger.info(f"Starting sBGP pipeline ({columns[0]} vs {columns[1]})")

    workflow = create_workflow()
    initial_state: PipelineState = {
        "csv_path": csv_path,
        "date_col": date_col,
        "columns": list(columns),
        "weekly": weekly,
        "season": season,
        "level": level,
        "weights_path": weights_path,
        "B": B,
        "seed": seed,
        "levels": levels,
        "N_mc": N_mc,
        "out_dir": out_dir,
        "artifacts": {},
    }
    final_state = workflow.invoke(initial_state)

    logger.info("Pipeline completed")
    return final_state
