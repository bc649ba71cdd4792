import argparse
import json
import logging
from typing import Optional

from ..errors import EXIT_OK, GatingFailure
from ..schemas import VerifyReport
from ..storage import make_run_dir, write_json
from ..theoremlab import run_suite
from .common import add_config_arguments, load_config

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("verify", help="Run numeric verification suites")
    parser.add_argument("suite", nargs="?", help="Suite name or 'all' (default from config)")
    parser.add_argument("--slow", action="store_true", help="Include training-based suites in 'all'")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--no-save", action="store_true", help="Print the report without writing a run directory")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def aggregate(reports: list[VerifyReport]) -> dict:
    return {
        "pass": all(r.passed for r in reports if r.gating),
        "checks": [r.dump() for r in reports],
        "failed": [r.check for r in reports if r.gating and not r.passed],
        "soft_failed": [r.check for r in reports if not r.gating and not r.passed],
    }


def cmd_verify(suite: str, seed: int = 0, slow: bool = False, output_dir: Optional[str] = None, tag: str = "verify") -> dict:
    """Run a suite; raise GatingFailure when a gating check fails"""
    reports = run_suite(suite, seed=seed, include_slow=slow)
    report = aggregate(reports)
    if output_dir is not None:
        write_json(make_run_dir(output_dir, tag) / "report.json", report)
    print(json.dumps(report, indent=2, default=str))
    if not report["pass"]:
        raise GatingFailure("gating checks failed: " + ", ".join(report["failed"]))
    logger.info("%d checks, all gating checks passed", len(reports))
    return report


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    suite = args.suite or cfg.verify.suite
    seed = cfg.verify.seed if args.seed is None else args.seed
    slow = args.slow or cfg.verify.slow
    cmd_verify(suite, seed=seed, slow=slow, output_dir=None if args.no_save else cfg.output_dir, tag=cfg.tag)
    return EXIT_OK
