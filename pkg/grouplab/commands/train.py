import argparse
import logging
from pathlib import Path

from ..errors import EXIT_OK
from ..netdyn import ModelState, RunLog, init_model, train
from ..numkit import derive_rng
from ..schemas import ExperimentConfig, RunSummary
from ..storage import make_run_dir, save_weights, write_json, write_runlog_csv
from ..taskgen import Dataset, dataset_manifest, full_task, split
from .common import add_config_arguments, build_group, load_config, model_activation, write_manifest

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="Train one network and record its telemetry")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def fit(cfg: ExperimentConfig, progress: bool | None = None) -> tuple[Dataset, ModelState, RunLog, str]:
    """Split, initialize and train as the config says"""
    group, _, source = build_group(cfg.group)
    dataset = split(full_task(group), cfg.task.p, cfg.task.split_seed, cfg.task.mode, cfg.task.centering)
    model = cfg.model
    state = init_model(
        group.order,
        model.K,
        model_activation(cfg),
        derive_rng(cfg.train.seed),
        depth=model.depth,
        residual=model.residual,
        init_scale=model.init_scale,
    )
    logger.info(
        "Training %s: n=%d K=%d depth=%d %s lr=%g η=%g",
        group.name, dataset.n, model.K, model.depth, cfg.train.optimizer, cfg.train.lr, cfg.train.weight_decay,
    )
    log = train(state, dataset, cfg.train, progress=progress)
    return dataset, state, log, source


def summarize(log: RunLog) -> RunSummary:
    final = log.final
    return RunSummary(
        epochs_run=final.epoch,
        final_train_acc=final.train_acc,
        final_test_acc=final.test_acc,
        first_train_epoch=-1 if log.first_train_epoch is None else log.first_train_epoch,
        first_test_epoch=-1 if log.first_test_epoch is None else log.first_test_epoch,
        grokking_delay=log.grokking_delay,
        diverged_epoch=log.diverged_epoch,
        min_muon_inner=log.min_muon_inner,
    )


def cmd_train(cfg: ExperimentConfig) -> Path:
    """Train and write manifest.json, runlog.csv, weights.bin and summary.json"""
    dataset, state, log, source = fit(cfg)
    run_dir = make_run_dir(cfg.output_dir, cfg.tag)
    write_manifest(
        run_dir,
        cfg,
        seeds={"split": cfg.task.split_seed, "init": cfg.train.seed},
        source=source,
        dataset=dataset_manifest(dataset, source),
    )
    write_runlog_csv(run_dir / "runlog.csv", log)
    save_weights(run_dir / "weights.bin", state.matrices())
    summary = summarize(log)
    write_json(run_dir / "summary.json", summary)
    logger.info(
        "Finished: train acc %.4f, test acc %.4f, grokking delay %d",
        summary.final_train_acc, summary.final_test_acc, summary.grokking_delay,
    )
    return run_dir


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    run_dir = cmd_train(cfg)
    print(run_dir)
    return EXIT_OK
