"""
Command-line entry point.

    python -m sbgp.main <command> [options]

Exit codes: 0 success, 1 computation failure, 2 usage error.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

import numpy as np
import pandas as pd
from pydantic import ValidationError

from sbgp.bootstrap import (
    DEFAULT_B,
    DEFAULT_B_CURVES,
    bootstrap_chi_bands,
    default_workers,
    interval_coverage,
    nonparam_bootstrap,
    param_bootstrap_nbe,
)
from sbgp.crud import FitRecordService, TrainingRunService, fit_record_to_dict
from sbgp.data_source_manager import (
    DataSourceManager,
    exceedance_set,
    load_csv,
    read_meta,
    read_sample,
    season_filter,
    weekly_maxima,
    write_exceedances,
    write_sample,
)
from sbgp.database import get_database
from sbgp.exceptions import (
    SbgpError,
    TrainingDivergedError,
    UntrainedWeightsError,
    WeightsFormatError,
)
from sbgp.models.dependence import (
    PER_FIT_MC_SIZE,
    REFERENCE_MC_SIZE,
    chi_curve,
    parse_levels,
)
from sbgp.models.distributions import make_rng, split_rng
from sbgp.models.sbgp_model import SbgpParams, marginal_cdf, marginal_density, marginal_quantile
from sbgp.nbe.family import ModelFamily, create_family
from sbgp.nbe.network import NetworkWeights, estimate, fit_json
from sbgp.nbe.serialization import load_weights, save_weights
from sbgp.nbe.trainer import TrainConfig, train
from sbgp.workflow import run_pipeline

logger = logging.getLogger("sbgp")

DEFAULT_LEVELS = "0.5:0.99:50"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input files or options; exit code 2."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"File not found: {path}")
    return p


def _read_json(path: str) -> Dict[str, Any]:
    try:
        with open(_require_file(path), "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise UsageError(f"Invalid JSON in {path}: {e}")


def _write_json(data: Dict[str, Any], path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def _seed(args) -> int:
    return args.seed if args.seed is not None else int(os.getenv("SBGP_SEED", "2024"))


def _levels(args) -> List[float]:
    try:
        return parse_levels(args.levels)
    except ValueError as e:
        raise UsageError(f"Invalid --levels: {e}")


def _load_weights(path: str, family: Optional[str] = None) -> NetworkWeights:
    wts = load_weights(_require_file(path))
    if family is not None and wts.family != family:
        raise UsageError(f"{path} holds '{wts.family}' weights, expected '{family}'")
    return wts


def _load_params(path: str) -> Tuple[ModelFamily, np.ndarray]:
    """Family and canonical vector of a parameter (or fit) JSON file."""
    data = _read_json(path)
    name = data.get("family") or ("bgp" if "a_T" in data else "sbgp")
    try:
        family = create_family(name)
        return family, family.theta_from_json(data)
    except ValueError as e:
        raise UsageError(f"Invalid parameters in {path}: {e}")


def _read_sample(path: str) -> np.ndarray:
    return read_sample(_require_file(path))


def _record_fit(db_url: Optional[str], fitted: Dict[str, Any], **kwargs) -> None:
    if not db_url:
        return
    record_id = DataSourceManager(db_url, record=True).record_fit(fitted, **kwargs)
    print(f"✓ Recorded fit #{record_id} in {db_url}")


def _model_quantiles(family: ModelFamily, theta: np.ndarray, j: int, probs: np.ndarray, rng) -> np.ndarray:
    """Margin-j quantiles: exact for sBGP, from a reference-size simulation for BGP."""
    if family.name == "sbgp":
        params = family.params_from_theta(theta)
        return np.array([marginal_quantile(params, j, float(p)) for p in probs])
    simulated = family.simulate(theta, REFERENCE_MC_SIZE, rng)
    return np.quantile(simulated[:, j - 1], probs)


def _qq_frame(data: np.ndarray, family: ModelFamily, theta: np.ndarray, points: int,
              thresholds, rng) -> pd.DataFrame:
    probs = np.arange(1, points + 1) / (points + 1.0)
    frames = []
    for j in (1, 2):
        shift = thresholds[j - 1] if thresholds is not None else 0.0
        frames.append(pd.DataFrame({
            "margin": j,
            "p": probs,
            "empirical": np.quantile(data[:, j - 1], probs) + shift,
            "model": _model_quantiles(family, theta, j, probs, rng) + shift,
        }))
    return pd.concat(frames, ignore_index=True)


def _theta_from_fit(family: ModelFamily, fitted: Dict[str, Any]) -> np.ndarray:
    return np.array([fitted["theta"][name] for name in family.param_names])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    family, theta = _load_params(args.params)
    data = family.simulate(theta, args.n, make_rng(_seed(args)))
    write_sample(data, args.out)
    print(f"✓ Simulated {args.n} {family.name} rows to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    wts = _load_weights(args.weights)
    penalized = float(wts.metadata.get("loss_lambda", 0.0)) > 0
    if args.penalized and not penalized:
        raise UsageError(f"{args.weights} was trained with the classical loss; --penalized needs lambda > 0 weights")
    data = _read_sample(args.data)
    fitted = fit_json(wts, data)
    fitted["source"] = str(args.data)
    _write_json(fitted, args.out)
    print(f"✓ Fitted {wts.family} model to {len(data)} rows: {args.out}")
    _record_fit(args.db, fitted, source=str(args.data), n=len(data), weights_path=str(args.weights))
    return EXIT_OK


def cmd_train(args) -> int:
    family_name = args.model or os.getenv("SBGP_FAMILY", "sbgp")
    prior = _read_json(args.prior) if args.prior else None
    config = _read_json(args.config) if args.config else {}
    try:
        family = create_family(family_name, prior)
        cfg = TrainConfig.model_validate(config)
        if args.steps is not None:
            cfg = cfg.model_copy(update={"num_steps": args.steps})
    except ValidationError as e:
        raise UsageError(f"Invalid training configuration:\n{e}")

    print(f"✓ Training {family.name} estimator for up to {cfg.num_steps} steps (lambda = {cfg.loss_lambda})")
    result = train(family, cfg, make_rng(_seed(args)), progress=logger.isEnabledFor(logging.INFO))
    save_weights(result.weights, args.out)
    if result.validation_trace:
        trace = pd.DataFrame(result.validation_trace, columns=["step", "risk"])
        trace.to_csv(Path(args.out).with_suffix(".trace.csv"), index=False)
    best = result.best_risk
    print(f"✓ Saved weights to {args.out} after {result.steps_run} steps"
          + (f" (best validation risk {best:.4g})" if best is not None else ""))

    if args.db:
        session = get_database(args.db).get_session()
        try:
            TrainingRunService.create(
                session, family=family.name, steps=result.steps_run, loss_lambda=cfg.loss_lambda,
                best_validation_risk=best, weights_path=str(args.out),
                config=cfg.model_dump(by_alias=True),
            )
        finally:
            session.close()
    return EXIT_OK


def cmd_chi_curve(args) -> int:
    levels = _levels(args)
    if bool(args.data) == bool(args.params):
        raise UsageError("chi-curve needs exactly one of --data or --params")
    if args.data:
        curve = chi_curve(_read_sample(args.data), levels)
    else:
        family, theta = _load_params(args.params)
        curve = chi_curve(family.simulate(theta, args.n_mc, make_rng(_seed(args))), levels)
    curve.to_frame(with_eta=args.eta).to_csv(args.out, index=False)
    print(f"✓ Wrote {len(levels)} levels to {args.out}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    wts = _load_weights(args.weights)
    data = _read_sample(args.data)
    rng = make_rng(_seed(args))
    if args.parametric:
        theta = estimate(wts, data).as_array()
        result = param_bootstrap_nbe(theta, len(data), wts, args.B, rng, level=args.level)
    else:
        result = nonparam_bootstrap(data, wts, args.B, rng, level=args.level)

    frame = result.to_frame()
    frame.insert(0, "rep", np.arange(1, result.B + 1))
    frame.to_csv(args.out, index=False)
    summary_path = Path(args.out).with_suffix(".json")
    _write_json(result.summary_json(), str(summary_path))
    print(f"✓ {result.B} bootstrap replicates to {args.out}, intervals to {summary_path}")
    return EXIT_OK


def _reduce(series, weekly: bool, season: Optional[str]):
    if weekly:
        series = weekly_maxima(series)
    if season:
        if ":" not in season:
            raise UsageError(f"--season must be MM-DD:MM-DD, got '{season}'")
        start, end = season.split(":")
        series = season_filter(series, start, end)
    return series


def cmd_ingest(args) -> int:
    columns = [c.strip() for c in args.cols.split(",") if c.strip()]
    if len(columns) != 2:
        raise UsageError("--cols needs exactly two columns")
    series = load_csv(_require_file(args.csv), args.date_col, columns)
    print(f"✓ Loaded {len(series)} daily rows")
    series = _reduce(series, args.weekly, args.season)
    es = exceedance_set(series, args.level)
    path, meta = write_exceedances(es, args.out)
    print(f"✓ Kept {es.rows.shape[0]} of {es.total_n} rows above the {args.level} quantiles: {path} ({meta.name})")
    return EXIT_OK


def cmd_batch_fit(args) -> int:
    csv_dir = Path(args.csv_dir)
    if not csv_dir.is_dir():
        raise UsageError(f"Directory not found: {args.csv_dir}")
    wts = _load_weights(args.weights)
    manager = DataSourceManager(args.db, record=bool(args.db))
    series = _reduce(manager.load_directory(csv_dir, args.date_col), args.weekly, args.season)
    if args.ref_col not in series.site_labels:
        raise UsageError(f"Reference column '{args.ref_col}' not found; sites: {', '.join(series.site_labels)}")

    frame = manager.batch_fit(series, args.ref_col, args.level, lambda data: fit_json(wts, data),
                              workers=default_workers(), source=str(csv_dir))
    frame.to_csv(args.out, index=False)
    print(f"✓ Wrote {len(frame)} pairwise fits to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    sbgp_wts = _load_weights(args.sbgp_weights, "sbgp")
    bgp_wts = _load_weights(args.bgp_weights, "bgp")
    data = _read_sample(args.data)
    levels = _levels(args)
    meta = read_meta(args.data)
    thresholds = meta["thresholds"] if meta else None
    streams = split_rng(make_rng(_seed(args)), 6)

    out_path = Path(args.out)
    chi_path = out_path.with_name(out_path.stem + "_chi.csv")
    qq_path = out_path.with_name(out_path.stem + "_qq.csv")
    curves = chi_curve(data, levels).to_frame().rename(columns={"chi": "empirical"})
    qq_frames = []
    report: Dict[str, Any] = {"data": str(args.data), "n": len(data), "levels": levels}

    for k, wts in enumerate((sbgp_wts, bgp_wts)):
        family = create_family(wts.family)
        fitted = fit_json(wts, data)
        theta = _theta_from_fit(family, fitted)
        curves[family.name] = chi_curve(family.simulate(theta, args.n_mc, streams[3 * k]), levels).values

        if args.B > 0:
            # sBGP bands from resampling the data, BGP bands from its fitted law
            if family.name == "sbgp":
                result = nonparam_bootstrap(data, wts, max(args.B, 2), streams[3 * k + 1])
            else:
                result = param_bootstrap_nbe(theta, len(data), wts, args.B, streams[3 * k + 1], family)
            lower, upper = bootstrap_chi_bands(result, levels, args.n_mc, streams[3 * k + 2], family)
            curves[f"{family.name}_lower"] = lower.values
            curves[f"{family.name}_upper"] = upper.values
            fitted["bootstrap"] = result.summary_json()

        qq = _qq_frame(data, family, theta, args.points, thresholds, streams[3 * k + 2])
        qq.insert(0, "model_family", family.name)
        qq_frames.append(qq)
        report[family.name] = fitted

    curves.to_csv(chi_path, index=False)
    pd.concat(qq_frames, ignore_index=True).to_csv(qq_path, index=False)
    report["chi_curves"] = str(chi_path)
    report["qq"] = str(qq_path)
    _write_json(report, args.out)
    print(f"✓ Compared sBGP and BGP fits: {args.out}, {chi_path.name}, {qq_path.name}")
    return EXIT_OK


def cmd_qq(args) -> int:
    data = _read_sample(args.data)
    family, theta = _load_params(args.fit)
    meta = read_meta(args.data)
    thresholds = meta["thresholds"] if meta else None
    if thresholds is None:
        logger.info("No threshold metadata found; quantiles stay on the excess scale")
    frame = _qq_frame(data, family, theta, args.points, thresholds, make_rng(_seed(args)))
    frame.to_csv(args.out, index=False)
    print(f"✓ Wrote {len(frame)} QQ pairs to {args.out}")
    return EXIT_OK


def cmd_density(args) -> int:
    family, theta = _load_params(args.params)
    if family.name != "sbgp":
        raise UsageError("density needs sBGP parameters")
    if args.margin not in (1, 2):
        raise UsageError("--margin must be 1 or 2")
    params: SbgpParams = family.params_from_theta(theta)
    grid = np.linspace(args.lo, args.hi, args.points)
    frame = pd.DataFrame({
        "y": grid,
        "density": marginal_density(params, args.margin, grid),
        "cdf": marginal_cdf(params, args.margin, grid),
    })
    frame.to_csv(args.out, index=False)
    print(f"✓ Wrote margin-{args.margin} density on {args.points} points to {args.out}")
    return EXIT_OK


def cmd_simstudy(args) -> int:
    family, theta = _load_params(args.params)
    wts = _load_weights(args.weights, family.name)
    levels = _levels(args)
    sim_rng, curve_rng, boot_rng = split_rng(make_rng(_seed(args)), 3)
    data_streams = split_rng(sim_rng, args.K)
    curve_streams = split_rng(curve_rng, args.K)

    estimates, curve_rows, boot_results = [], [], []
    for k in range(args.K):
        data = family.simulate(theta, args.n, data_streams[k])
        theta_hat = estimate(wts, data).as_array()
        estimates.append(theta_hat)
        if args.chi_out:
            fitted_curve = chi_curve(family.simulate(theta_hat, args.n_mc, curve_streams[k]), levels)
            curve_rows.extend({"rep": k + 1, "q": q, "chi": c}
                              for q, c in zip(fitted_curve.levels, fitted_curve.values))
        if args.B > 0 and k < args.coverage_reps:
            boot_results.append(nonparam_bootstrap(data, wts, args.B, boot_rng))

    frame = pd.DataFrame(estimates, columns=list(family.param_names))
    frame.insert(0, "rep", np.arange(1, args.K + 1))
    frame.to_csv(args.out, index=False)
    print(f"✓ {args.K} estimates at n = {args.n} written to {args.out}")
    if args.chi_out:
        pd.DataFrame(curve_rows).to_csv(args.chi_out, index=False)
        print(f"✓ Fitted chi(q) curves written to {args.chi_out}")
    if boot_results:
        out_path = Path(args.out)
        coverage_path = out_path.with_name(out_path.stem + "_coverage.csv")
        interval_coverage(boot_results, theta).to_csv(coverage_path, index=False)
        print(f"✓ Bootstrap coverage over {len(boot_results)} datasets written to {coverage_path}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    columns = [c.strip() for c in args.cols.split(",") if c.strip()]
    if len(columns) != 2:
        raise UsageError("--cols needs exactly two columns")
    _require_file(args.csv)
    _require_file(args.weights)
    state = run_pipeline(
        csv_path=args.csv, columns=columns, weights_path=args.weights, out_dir=args.out_dir,
        date_col=args.date_col, weekly=not args.no_weekly, season=args.season, level=args.level,
        B=args.B, seed=_seed(args), levels=_levels(args), N_mc=args.n_mc,
    )
    for name, path in state["artifacts"].items():
        print(f"✓ {name}: {path}")
    return EXIT_OK


def cmd_history(args) -> int:
    session = get_database(args.db).get_session()
    try:
        if args.runs:
            runs = TrainingRunService.get_history(session, args.limit, args.family)
            rows = [{"id": r.id, "family": r.family, "steps": r.steps, "lambda": r.loss_lambda,
                     "best_validation_risk": r.best_validation_risk, "weights": r.weights_path}
                    for r in runs]
        else:
            rows = [fit_record_to_dict(r) for r in FitRecordService.get_history(session, args.limit, args.family)]
    finally:
        session.close()

    frame = pd.DataFrame(rows)
    if args.out:
        frame.to_csv(args.out, index=False)
        print(f"✓ Exported {len(frame)} record(s) to {args.out}")
    elif frame.empty:
        print("No records found")
    else:
        print(frame.to_string(index=False))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbgp", description="Sub-asymptotic bivariate GP toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=None, help="Random seed (default: SBGP_SEED or 2024)")
        return p

    p = seeded(sub.add_parser("simulate", help="Simulate a sample from a parameter file"))
    p.add_argument("--params", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", help="Estimate parameters with trained weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--penalized", action="store_true", help="Require weights trained with the penalized loss")
    p.add_argument("--db", default=None, help="Record the fit in this database URL")
    p.set_defaults(handler=cmd_fit)

    p = seeded(sub.add_parser("train", help="Train a neural estimator on simulated data"))
    p.add_argument("--prior", default=None, help="Prior configuration JSON")
    p.add_argument("--config", default=None, help="Training configuration JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=["sbgp", "bgp"], default=None)
    p.add_argument("--steps", type=int, default=None, help="Override num_steps")
    p.add_argument("--db", default=None, help="Record the run in this database URL")
    p.set_defaults(handler=cmd_train)

    p = seeded(sub.add_parser("chi-curve", help="chi(q) curve of a sample or of a parameter file"))
    p.add_argument("--data", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--n-mc", type=int, default=REFERENCE_MC_SIZE)
    p.add_argument("--eta", action="store_true", help="Add the eta(q) column")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_chi_curve)

    p = seeded(sub.add_parser("bootstrap", help="Bootstrap a fit"))
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("-B", type=int, default=DEFAULT_B)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--parametric", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_bootstrap)

    p = sub.add_parser("ingest", help="Daily CSV to an exceedance set")
    p.add_argument("--csv", required=True)
    p.add_argument("--date-col", default="date")
    p.add_argument("--cols", required=True, help="Two comma-separated site columns")
    p.add_argument("--weekly", action="store_true")
    p.add_argument("--season", default=None, help="MM-DD:MM-DD")
    p.add_argument("--level", type=float, default=0.7)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("batch-fit", help="Pairwise fits against a reference site")
    p.add_argument("--csv-dir", required=True)
    p.add_argument("--ref-col", required=True)
    p.add_argument("--date-col", default="date")
    p.add_argument("--weekly", action="store_true")
    p.add_argument("--season", default=None)
    p.add_argument("--level", type=float, default=0.7)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--db", default=None)
    p.set_defaults(handler=cmd_batch_fit)

    p = seeded(sub.add_parser("compare", help="sBGP against the bivariate GP baseline"))
    p.add_argument("--data", required=True)
    p.add_argument("--sbgp-weights", required=True)
    p.add_argument("--bgp-weights", required=True)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--n-mc", type=int, default=PER_FIT_MC_SIZE)
    p.add_argument("-B", type=int, default=0, help="Bootstrap replicates for chi(q) bands (0: none)")
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_compare)

    p = seeded(sub.add_parser("qq", help="Empirical against model quantiles"))
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_qq)

    p = sub.add_parser("density", help="Marginal density and cdf on a grid")
    p.add_argument("--params", required=True)
    p.add_argument("--margin", type=int, default=1)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_density)

    p = seeded(sub.add_parser("simstudy", help="Repeated estimation at fixed parameters"))
    p.add_argument("--params", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--n-mc", type=int, default=PER_FIT_MC_SIZE)
    p.add_argument("--chi-out", default=None)
    p.add_argument("-B", type=int, default=0, help="Bootstrap replicates for coverage (0: none)")
    p.add_argument("--coverage-reps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simstudy)

    p = seeded(sub.add_parser("pipeline", help="Ingest, fit, bootstrap and chi(q) bands in one run"))
    p.add_argument("--csv", required=True)
    p.add_argument("--cols", required=True)
    p.add_argument("--date-col", default="date")
    p.add_argument("--no-weekly", action="store_true")
    p.add_argument("--season", default=None)
    p.add_argument("--level", type=float, default=0.7)
    p.add_argument("--weights", required=True)
    p.add_argument("-B", type=int, default=DEFAULT_B_CURVES)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--n-mc", type=int, default=PER_FIT_MC_SIZE)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("history", help="Stored fits or training runs")
    p.add_argument("--db", default=None)
    p.add_argument("--limit", type=int, default=50)
    p.add_argument("--family", default=None)
    p.add_argument("--runs", action="store_true", help="Show training runs instead of fits")
    p.add_argument("--out", default=None, help="Export as CSV")
    p.set_defaults(handler=cmd_history)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    logging.basicConfig(
        level=os.getenv("SBGP_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        return args.handler(args)
    except (UsageError, WeightsFormatError, UntrainedWeightsError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SbgpError, TrainingDivergedError, ValidationError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        print(f"\n❌ Error running {args.command}: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
