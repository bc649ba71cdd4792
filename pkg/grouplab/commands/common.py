"""Shared plumbing for subcommands: config loading, group building, manifests"""
import argparse
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from .. import __version__
from ..activations import Activation, activation_from_spec
from ..errors import ConfigError, LabError
from ..groupkit import (
    Group,
    IrrepCatalog,
    catalog_for,
    load_cayley,
    load_catalog,
    make_cyclic,
    make_dihedral,
    make_product,
)
from ..schemas import DatasetManifest, ExperimentConfig, GroupRecipe, RunManifest
from ..storage import content_hash, write_json

logger = logging.getLogger(__name__)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config field by dotted path, e.g. model.K=512",
    )


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(document: dict[str, Any], assignment: str) -> None:
    """Set a dotted key in a nested dict; the value is parsed as JSON when possible"""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError([f"override {assignment!r} is not KEY=VALUE"])
    parts = key.strip().split(".")
    node = document
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError([f"override {key!r}: {part!r} is not a section"])
        node = child
    node[parts[-1]] = _parse_value(raw)


def load_config(path: Optional[str], overrides: list[str]) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON file and --set overrides, listing every problem"""
    document: dict[str, Any] = {}
    if path:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {path}"])
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file {path} is not valid JSON: {exc}"])
        if not isinstance(document, dict):
            raise ConfigError([f"config file {path} must hold a JSON object"])
    for assignment in overrides:
        apply_override(document, assignment)
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        problems = [
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        ]
        raise ConfigError(problems)


def build_group(recipe: GroupRecipe) -> tuple[Group, Optional[IrrepCatalog], str]:
    """Group, its catalog (None when unknown) and a source label for manifests"""
    if recipe.kind == "cyclic":
        group = make_cyclic(recipe.order)
        catalog = catalog_for(group, ("cyclic", [recipe.order]))
        source = recipe.label()
    elif recipe.kind == "product":
        group = make_product([make_cyclic(m) for m in recipe.factors])
        catalog = catalog_for(group, ("product", recipe.factors))
        source = recipe.label()
    elif recipe.kind == "dihedral":
        group = make_dihedral(recipe.n)
        catalog = catalog_for(group, ("dihedral", [recipe.n]))
        source = recipe.label()
    else:
        raw = Path(recipe.path).read_bytes()
        group = load_cayley(raw)
        catalog = None
        source = content_hash(raw)
    if recipe.catalog:
        catalog = load_catalog(Path(recipe.catalog).read_bytes(), group)
    return group, catalog, source


def require_catalog(catalog: Optional[IrrepCatalog], what: str) -> IrrepCatalog:
    if catalog is None:
        raise LabError(f"{what} needs an irrep catalog: use a cyclic/product/dihedral recipe or group.catalog")
    return catalog


def model_activation(cfg: ExperimentConfig) -> Activation:
    return activation_from_spec(cfg.model.activation, cfg.model.act_a, cfg.model.act_b)


def write_manifest(
    run_dir: Path,
    cfg: ExperimentConfig,
    seeds: dict[str, int],
    source: str,
    dataset: Optional[DatasetManifest] = None,
) -> RunManifest:
    """manifest.json: full config, resolved seeds and the input hash"""
    config_json = cfg.model_dump_json()
    manifest = RunManifest(
        created=datetime.now(),
        version=__version__,
        config=cfg.model_dump(mode="json"),
        seeds=seeds,
        input_hash=content_hash(f"{source}\n{config_json}"),
        dataset=dataset,
    )
    write_json(run_dir / "manifest.json", manifest)
    return manifest
