import argparse
import logging
from collections import Counter
from pathlib import Path
from typing import Any

from ..energyscape import (
    AscentConfig,
    Objective,
    ascend_many,
    dataset_task,
    full_energy_task,
    memorization_profile,
    modulated_objective,
    profile_weight,
    weighted_task,
)
from ..errors import EXIT_OK, UsageError
from ..schemas import ExperimentConfig
from ..storage import make_run_dir, write_json, write_maxima_csv
from ..taskgen import full_task, single_target_task, split
from .common import add_config_arguments, build_group, load_config, model_activation, require_catalog, write_manifest

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("ascend", help="Survey energy maxima on the unit sphere")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def cmd_ascend(cfg: ExperimentConfig) -> Path:
    """One maxima.csv row per seed plus a label histogram in summary.json"""
    group, catalog, source = build_group(cfg.group)
    activation = model_activation(cfg)
    spec = cfg.ascent
    summary: dict[str, Any] = {"group": group.name, "activation": activation.kind}
    init = "normal"

    if spec.single_target is not None:
        if spec.suppressed:
            raise UsageError("a single-target task cannot be combined with suppressed irreps")
        st = spec.single_target
        pairs = single_target_task(group, st.target, st.weights)
        objective: Objective = weighted_task(pairs, activation)
        init = "positive"
        task_kind = "single-target"
    elif cfg.task.p < 1.0:
        dataset = split(full_task(group), cfg.task.p, cfg.task.split_seed, cfg.task.mode)
        objective = dataset_task(dataset, activation)
        task_kind = "split"
    else:
        objective = full_energy_task(group, activation)
        task_kind = "full"
    if spec.suppressed:
        objective = modulated_objective(objective, spec.suppressed, require_catalog(catalog, "modulated ascent"))
        task_kind = f"modulated {task_kind}"
    summary["task"] = task_kind

    seeds = range(cfg.train.seed, cfg.train.seed + spec.seeds)
    results = ascend_many(
        objective,
        seeds,
        AscentConfig(lr=spec.lr, max_steps=spec.max_steps, tol=spec.tol),
        catalog=catalog,
        workers=cfg.workers,
        init=init,
        with_flatness=spec.flatness,
    )

    converged = [r for r in results if r.converged]
    labels = Counter(r.classification.label for r in converged if r.classification and r.classification.label is not None)
    summary.update({
        "seeds": spec.seeds,
        "converged": len(converged),
        "single_irrep": sum(bool(r.classification and r.classification.single_irrep) for r in converged),
        "label_histogram": {str(k): n for k, n in sorted(labels.items())},
        "catalog": catalog is not None,
    })
    if spec.single_target is not None:
        profile = memorization_profile(pairs.weights, activation)
        summary["profile"] = profile.kind
        if profile.s is not None:
            target = profile_weight(pairs, profile.s)
            summary["predicted_s"] = profile.s.tolist()
            summary["profile_overlap"] = [abs(float(r.w @ target)) for r in results]
    if catalog is None:
        logger.warning("No irrep catalog for %s; maxima are unclassified", group.name)

    run_dir = make_run_dir(cfg.output_dir, cfg.tag)
    write_manifest(run_dir, cfg, seeds={"first_seed": cfg.train.seed, "count": spec.seeds}, source=source)
    write_maxima_csv(run_dir / "maxima.csv", results)
    write_json(run_dir / "summary.json", summary)
    logger.info("%d/%d converged; labels %s", len(converged), len(results), dict(labels))
    return run_dir


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    print(cmd_ascend(cfg))
    return EXIT_OK
