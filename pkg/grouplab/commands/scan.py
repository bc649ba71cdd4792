"""Phase-boundary scan over (M, p, seed[, lr]) cells"""
import argparse
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import EXIT_OK, LabError, UsageError
from ..schemas import ExperimentConfig
from ..storage import make_run_dir, write_json, write_table_csv
from ..theoremlab import boundary_fit
from ..workers import run_pool
from .common import add_config_arguments, load_config, write_manifest
from .train import fit

logger = logging.getLogger(__name__)

BOUNDARY_COLUMNS = [
    "group", "M", "p", "seed", "lr", "final_train_acc", "final_test_acc",
    "grokking_delay", "converged", "diverged",
]


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("scan", help="Sweep M, p and seeds and fit the phase boundary")
    add_config_arguments(parser)
    parser.add_argument("--full-grid", action="store_true", help="Orders up to 127 with 20 seeds")
    parser.set_defaults(handler=run)


def cells(cfg: ExperimentConfig) -> list[tuple[int, float, int, float]]:
    orders, seeds = cfg.scan.grid()
    lrs = cfg.scan.learning_rates or [cfg.train.lr]
    return [(size, p, seed, lr) for size in orders for lr in lrs for p in cfg.scan.ratios for seed in seeds]


def run_cell(job: tuple[ExperimentConfig, tuple[int, float, int, float]]) -> dict:
    """Train one cell; divergence is recorded, not raised"""
    base, (size, p, seed, lr) = job
    cfg = base.model_copy(deep=True)
    cfg.group = base.group.with_size(size)
    cfg.task.p = p
    cfg.task.split_seed = seed
    cfg.train.seed = seed
    cfg.train.lr = lr
    dataset, _, log, _ = fit(cfg, progress=False)
    final = log.final
    return {
        "group": dataset.group.name,
        "M": dataset.group.order,
        "p": p,
        "seed": seed,
        "lr": lr,
        "final_train_acc": final.train_acc,
        "final_test_acc": final.test_acc,
        "grokking_delay": log.grokking_delay,
        "converged": log.diverged_epoch is None and final.train_acc >= cfg.train.threshold,
        "diverged": log.diverged_epoch is not None,
    }


def p_star(medians: pd.Series, threshold: float) -> float:
    """Smallest grid p whose median test accuracy reaches threshold, interpolated from the grid point below"""
    medians = medians.sort_index()
    prev_p: Optional[float] = None
    prev_acc: Optional[float] = None
    for p, acc in medians.items():
        if acc >= threshold:
            if prev_p is None or prev_acc is None or acc == prev_acc:
                return float(p)
            return float(prev_p + (threshold - prev_acc) * (p - prev_p) / (acc - prev_acc))
        prev_p, prev_acc = p, acc
    return math.nan


def boundary(table: pd.DataFrame, threshold: float) -> pd.DataFrame:
    """p* per (M, lr) from converged runs, with the count of excluded runs"""
    rows = []
    for (M, lr), block in table.groupby(["M", "lr"], sort=True):
        kept = block[block["converged"]]
        medians = kept.groupby("p")["final_test_acc"].median()
        value = p_star(medians, threshold) if len(medians) else math.nan
        rows.append({
            "M": int(M),
            "lr": float(lr),
            "p_star": value,
            "scaled": value * M / math.log(M) if np.isfinite(value) else math.nan,
            "nonconverged": int(len(block) - len(kept)),
        })
    return pd.DataFrame(rows)


def cmd_scan(cfg: ExperimentConfig) -> Path:
    """Write boundary.csv (one row per cell) and boundary_fit.json"""
    if cfg.group.kind == "file":
        raise UsageError("scan needs a cyclic, product or dihedral recipe; an imported table has a fixed order")
    for size in cfg.scan.grid()[0]:
        try:
            cfg.group.with_size(size)
        except ValueError as exc:
            raise UsageError(f"scan size {size} is invalid for a {cfg.group.kind} recipe: {exc}")
    jobs = [(cfg, cell) for cell in cells(cfg)]
    logger.info("Scanning %d cells on %d workers", len(jobs), cfg.workers)
    results = run_pool(run_cell, jobs, workers=cfg.workers, desc="scan")
    table = pd.DataFrame(results, columns=BOUNDARY_COLUMNS)
    if not cfg.scan.learning_rates:
        table = table.drop(columns=["lr"])

    run_dir = make_run_dir(cfg.output_dir, cfg.tag)
    orders, seeds = cfg.scan.grid()
    write_manifest(run_dir, cfg, seeds={f"seed_{i}": s for i, s in enumerate(seeds)}, source=f"scan {cfg.group.kind} sizes {orders}")
    write_table_csv(run_dir / "boundary.csv", table)

    summary = boundary(table.assign(lr=[r["lr"] for r in results]), cfg.train.threshold)
    fits = []
    for lr, block in summary.groupby("lr", sort=True):
        points = [(m, q) for m, q in zip(block["M"], block["p_star"]) if np.isfinite(q)]
        entry = {"lr": float(lr), "points": [[int(m), float(q)] for m, q in points], "c": None, "max_rel_residual": None}
        if len(points) >= 3:
            try:
                entry["c"], entry["max_rel_residual"] = boundary_fit(points)
            except LabError as exc:
                logger.warning("Boundary fit skipped at lr=%g: %s", lr, exc)
        else:
            logger.warning("Boundary fit needs 3 finite p* values at lr=%g, got %d", lr, len(points))
        scaled = block["scaled"].dropna()
        entry["scaled_spread"] = float(scaled.max() / scaled.min()) if len(scaled) else None
        fits.append(entry)
    write_json(run_dir / "boundary_fit.json", {
        "threshold": cfg.train.threshold,
        "p_star": summary.to_dict(orient="records"),
        "fits": fits,
        "nonconverged_total": int(summary["nonconverged"].sum()),
    })
    logger.info("Scan finished: %d cells, %d non-converged", len(table), int(summary["nonconverged"].sum()))
    return run_dir


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    if args.full_grid:
        cfg.scan.full_grid = True
    print(cmd_scan(cfg))
    return EXIT_OK
