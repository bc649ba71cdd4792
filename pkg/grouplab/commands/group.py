import argparse
import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from ..errors import EXIT_OK, UsageError
from ..groupkit import Group, IrrepCatalog, dump_catalog, dump_cayley, find_isomorphism, validate_catalog
from ..schemas import GroupRecipe
from .common import build_group

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("group", help="Build, validate and emit a Cayley table")
    parser.add_argument("recipe", nargs="*", help="cyclic M | product M1 M2 ... | dihedral n")
    parser.add_argument("--file", help="Import a Cayley-table file instead of a recipe")
    parser.add_argument("--sidecar", help="Irrep sidecar JSON to validate against an imported table")
    parser.add_argument("-o", "--output", help="Write the canonical table here (default: stdout)")
    parser.add_argument("--catalog", help="Write the irrep catalog JSON here")
    parser.add_argument("--compare", nargs="+", metavar="WORD", help="Recipe or file path to test for isomorphism")
    parser.set_defaults(handler=run)


def parse_recipe(words: list[str], path: Optional[str] = None, sidecar: Optional[str] = None) -> GroupRecipe:
    """'cyclic 7', 'product 2 3', 'dihedral 4' or a file path"""
    try:
        if path is not None:
            if words:
                raise UsageError("give either a recipe or --file, not both")
            return GroupRecipe(kind="file", path=path, catalog=sidecar)
        if len(words) == 1 and Path(words[0]).is_file():
            return GroupRecipe(kind="file", path=words[0], catalog=sidecar)
        if not words:
            raise UsageError("missing group recipe")
        kind, params = words[0], words[1:]
        try:
            numbers = [int(x) for x in params]
        except ValueError:
            raise UsageError(f"recipe parameters must be integers: {' '.join(params)}")
        if kind == "cyclic" and len(numbers) == 1:
            return GroupRecipe(kind="cyclic", order=numbers[0], catalog=sidecar)
        if kind == "product" and numbers:
            return GroupRecipe(kind="product", factors=numbers, catalog=sidecar)
        if kind == "dihedral" and len(numbers) == 1:
            return GroupRecipe(kind="dihedral", n=numbers[0], catalog=sidecar)
    except ValidationError as exc:
        raise UsageError("; ".join(err["msg"] for err in exc.errors()))
    raise UsageError(f"unknown recipe {' '.join(words)!r}; use cyclic M, product M1 M2 ..., dihedral n")


def describe(group: Group, catalog: Optional[IrrepCatalog]) -> dict:
    report = {
        "name": group.name,
        "order": group.order,
        "abelian": bool(group.abelian),
        "valid": True,
        "element_orders": sorted({int(group.element_order(a)) for a in range(group.order)}),
    }
    if catalog is not None:
        validate_catalog(catalog, group)
        report["irreps"] = [{"k": i.k, "dim": i.dim, "kind": i.kind, "partner": i.partner} for i in catalog]
    return report


def cmd_group(
    recipe: GroupRecipe,
    output: Optional[str] = None,
    catalog_path: Optional[str] = None,
    compare: Optional[GroupRecipe] = None,
) -> dict:
    """Build and validate a group, emit its canonical table and report"""
    group, catalog, _ = build_group(recipe)
    report = describe(group, catalog)
    text = dump_cayley(group)
    if output:
        Path(output).write_text(text, encoding="utf-8")
        logger.info("Wrote %s (order %d) to %s", group.name, group.order, output)
    else:
        print(text, end="")
    if catalog_path:
        if catalog is None:
            raise UsageError(f"no irrep catalog known for {group.name}")
        Path(catalog_path).write_text(dump_catalog(catalog), encoding="utf-8")
    if compare is not None:
        other, _, _ = build_group(compare)
        mapping = find_isomorphism(group, other)
        report["isomorphic_to"] = {"group": other.name, "isomorphic": mapping is not None}
        if mapping is not None:
            report["isomorphic_to"]["map"] = mapping.tolist()
    return report


def run(args: argparse.Namespace) -> int:
    recipe = parse_recipe(args.recipe, args.file, args.sidecar)
    compare = parse_recipe(args.compare) if args.compare else None
    report = cmd_group(recipe, args.output, args.catalog, compare)
    if args.output:
        print(json.dumps(report, indent=2))
    else:
        logger.info("Validation report: %s", json.dumps(report))
    return EXIT_OK
