import json
import math

import pandas as pd
import pytest

from grouplab.commands.ascend import cmd_ascend
from grouplab.commands.common import apply_override, build_group, load_config
from grouplab.commands.group import cmd_group, describe, parse_recipe
from grouplab.commands.scan import boundary, cmd_scan, p_star
from grouplab.commands.train import cmd_train
from grouplab.commands.verify import aggregate, cmd_verify
from grouplab.errors import EXIT_GATING_FAILURE, EXIT_OK, EXIT_USAGE, ConfigError, GatingFailure, UsageError
from grouplab.logging_config import configure_logging
from grouplab.main import main
from grouplab.netdyn import CSV_COLUMNS
from grouplab.schemas import VerifyReport
from grouplab.storage import MAXIMA_COLUMNS, load_weights, read_json, read_runlog_csv

SMALL = [
    "group.order=5",
    "model.K=8",
    "task.p=0.6",
    "train.epochs=20",
    "train.eval_every=10",
    "ascent.seeds=3",
]


def small_config(output_dir, *extra):
    cfg = load_config(None, [*SMALL, *extra])
    cfg.output_dir = str(output_dir)
    return cfg


def test_overrides_reach_nested_fields():
    cfg = load_config(None, ["model.K=16", "train.lr=0.01", "train.optimizer=muon", "tag=sweep"])
    assert cfg.model.K == 16
    assert cfg.train.lr == 0.01
    assert cfg.train.optimizer == "muon"
    assert cfg.tag == "sweep"


def test_config_file_and_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"group": {"kind": "dihedral", "n": 4}, "model": {"K": 32}}))
    cfg = load_config(str(path), ["model.K=64"])
    assert cfg.group.n == 4
    assert cfg.model.K == 64


def test_config_lists_every_problem():
    with pytest.raises(ConfigError) as info:
        load_config(None, ["model.K=0", "task.p=2", "model.bogus=1"])
    problems = info.value.problems
    assert len(problems) == 3
    assert any(p.startswith("model.K:") for p in problems)
    assert any(p.startswith("task.p:") for p in problems)
    assert any(p.startswith("model.bogus:") for p in problems)


@pytest.mark.parametrize("contents", ["{", "[1, 2]"])
def test_bad_config_files(tmp_path, contents):
    path = tmp_path / "cfg.json"
    path.write_text(contents)
    with pytest.raises(ConfigError):
        load_config(str(path), [])


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"), [])


def test_override_syntax():
    doc = {"model": 3}
    with pytest.raises(ConfigError):
        apply_override(doc, "novalue")
    with pytest.raises(ConfigError):
        apply_override(doc, "model.K=4")
    apply_override(doc, "tag=plain words")
    assert doc["tag"] == "plain words"


@pytest.mark.parametrize(
    "words, kind",
    [(["cyclic", "7"], "cyclic"), (["product", "2", "3"], "product"), (["dihedral", "4"], "dihedral")],
)
def test_parse_recipe(words, kind):
    assert parse_recipe(words).kind == kind


@pytest.mark.parametrize("words", [[], ["cyclic", "x"], ["torus", "3"], ["dihedral", "2"], ["cyclic", "3", "4"]])
def test_parse_recipe_errors(words):
    with pytest.raises(UsageError):
        parse_recipe(words)


def test_describe_dihedral(d4, d4_catalog):
    report = describe(d4, d4_catalog)
    assert report["abelian"] is False
    assert report["element_orders"] == [1, 2, 4]
    assert sorted(i["dim"] for i in report["irreps"]) == [1, 1, 1, 1, 2]
    json.dumps(report)


def test_group_file_round_trip(tmp_path, capsys):
    table = tmp_path / "d3.txt"
    sidecar = tmp_path / "d3.json"
    cmd_group(parse_recipe(["dihedral", "3"]), str(table), str(sidecar))
    imported = parse_recipe([], str(table), str(sidecar))
    report = cmd_group(imported, compare=parse_recipe(["dihedral", "3"]))
    assert report["name"] == "D_3"
    assert report["isomorphic_to"]["isomorphic"]
    assert len(report["irreps"]) == 3
    assert capsys.readouterr().out.startswith("6\n0 1 2 3 4 5\n")

    group, catalog, source = build_group(imported)
    assert catalog is not None
    assert len(source) == 40


def test_group_without_catalog_refuses_export(tmp_path):
    table = tmp_path / "z4.txt"
    cmd_group(parse_recipe(["cyclic", "4"]), str(table))
    with pytest.raises(UsageError):
        cmd_group(parse_recipe([str(table)]), str(tmp_path / "copy.txt"), str(tmp_path / "cat.json"))


def test_group_compare_non_isomorphic():
    report = cmd_group(parse_recipe(["cyclic", "6"]), compare=parse_recipe(["dihedral", "3"]))
    assert report["isomorphic_to"] == {"group": "D_3", "isomorphic": False}


def test_cmd_train_writes_run(output_dir):
    run_dir = cmd_train(small_config(output_dir))
    assert {p.name for p in run_dir.iterdir()} == {"manifest.json", "runlog.csv", "weights.bin", "summary.json"}
    manifest = read_json(run_dir / "manifest.json")
    assert manifest["seeds"] == {"split": 0, "init": 0}
    assert len(manifest["dataset"]["train"]) == 15
    assert manifest["config"]["model"]["K"] == 8
    log = read_runlog_csv(run_dir / "runlog.csv")
    assert list(log.columns) == CSV_COLUMNS
    assert log["epoch"].tolist() == [0, 10, 20]
    shapes = [W.shape for W in load_weights(run_dir / "weights.bin")]
    assert shapes == [(10, 8), (8, 5)]
    assert read_json(run_dir / "summary.json")["epochs_run"] == 20


def test_cmd_train_same_config_same_hash(output_dir):
    first = read_json(cmd_train(small_config(output_dir)) / "manifest.json")
    second = read_json(cmd_train(small_config(output_dir)) / "manifest.json")
    assert first["input_hash"] == second["input_hash"]
    assert first["dataset"] == second["dataset"]


def test_cmd_ascend_full(output_dir):
    run_dir = cmd_ascend(small_config(output_dir, "ascent.max_steps=20000"))
    maxima = pd.read_csv(run_dir / "maxima.csv")
    assert list(maxima.columns) == MAXIMA_COLUMNS
    assert maxima["seed"].tolist() == [0, 1, 2]
    summary = read_json(run_dir / "summary.json")
    assert summary["task"] == "split"
    assert summary["seeds"] == 3


def test_cmd_ascend_single_target(output_dir):
    cfg = small_config(
        output_dir,
        "task.p=1.0",
        "ascent.single_target={\"target\": 0, \"weights\": [0.5, 0.3, 0.2, 0, 0]}",
        "ascent.flatness=false",
    )
    summary = read_json(cmd_ascend(cfg) / "summary.json")
    assert summary["task"] == "single-target"
    assert summary["profile"] == "focused"
    assert len(summary["profile_overlap"]) == 3


def test_cmd_ascend_modulated(output_dir):
    cfg = small_config(output_dir, "task.p=1.0", "ascent.suppressed=[1, 4]", "ascent.flatness=false")
    summary = read_json(cmd_ascend(cfg) / "summary.json")
    assert summary["task"] == "modulated full"
    assert set(summary["label_histogram"]) <= {"2"}


def test_p_star_interpolates():
    medians = pd.Series({0.1: 0.2, 0.2: 0.5, 0.3: 1.0})
    assert p_star(medians, 0.99) == pytest.approx(0.298)
    assert p_star(pd.Series({0.1: 1.0, 0.2: 1.0}), 0.99) == pytest.approx(0.1)
    assert math.isnan(p_star(pd.Series({0.1: 0.1, 0.2: 0.2}), 0.99))


def test_boundary_excludes_nonconverged():
    table = pd.DataFrame({
        "M": [11] * 4,
        "lr": [0.001] * 4,
        "p": [0.2, 0.2, 0.4, 0.4],
        "final_test_acc": [0.3, 1.0, 1.0, 1.0],
        "converged": [True, False, True, True],
    })
    row = boundary(table, 0.99).iloc[0]
    assert row["nonconverged"] == 1
    assert row["p_star"] == pytest.approx(0.2 + 0.69 * 0.2 / 0.7)
    assert row["scaled"] == pytest.approx(row["p_star"] * 11 / math.log(11))


def test_cmd_scan_small(output_dir):
    cfg = small_config(output_dir, "scan.orders=[5, 7, 11]", "scan.ratios=[0.6, 0.9]", "scan.seeds=[0]")
    run_dir = cmd_scan(cfg)
    table = pd.read_csv(run_dir / "boundary.csv")
    assert len(table) == 6
    assert "lr" not in table.columns
    fit = read_json(run_dir / "boundary_fit.json")
    assert fit["threshold"] == 0.99
    assert len(fit["fits"]) == 1


def test_cmd_scan_keeps_product_family(output_dir):
    cfg = small_config(
        output_dir, "group.kind=product", "group.factors=[2, 3]",
        "scan.orders=[3, 5]", "scan.ratios=[0.6]", "scan.seeds=[0]",
    )
    table = pd.read_csv(cmd_scan(cfg) / "boundary.csv")
    assert table["group"].tolist() == ["Z_2xZ_3", "Z_2xZ_5"]
    assert table["M"].tolist() == [6, 10]


def test_cmd_scan_keeps_dihedral_family(output_dir):
    cfg = small_config(
        output_dir, "group.kind=dihedral", "group.n=3",
        "scan.orders=[3, 4]", "scan.ratios=[0.6]", "scan.seeds=[0]",
    )
    table = pd.read_csv(cmd_scan(cfg) / "boundary.csv")
    assert table["group"].tolist() == ["D_3", "D_4"]
    assert table["M"].tolist() == [6, 8]


def test_cmd_scan_rejects_invalid_family_size(output_dir):
    cfg = small_config(output_dir, "group.kind=dihedral", "group.n=3", "scan.orders=[2, 3]")
    with pytest.raises(UsageError, match="scan size 2"):
        cmd_scan(cfg)


def test_aggregate_separates_soft_failures():
    reports = [
        VerifyReport(check="a", passed=True),
        VerifyReport(check="b", passed=False, gating=False),
        VerifyReport(check="c", passed=False),
    ]
    result = aggregate(reports)
    assert result["pass"] is False
    assert result["failed"] == ["c"]
    assert result["soft_failed"] == ["b"]
    assert result["checks"][0]["pass"] is True


def test_cmd_verify_writes_report(output_dir, capsys):
    report = cmd_verify("boundary_fit", output_dir=str(output_dir))
    assert report["pass"]
    [run_dir] = list(output_dir.iterdir())
    assert read_json(run_dir / "report.json")["checks"][0]["check"] == "boundary_fit"
    assert json.loads(capsys.readouterr().out)["pass"] is True


def test_cmd_verify_gating_failure(monkeypatch):
    failing = VerifyReport(check="x", passed=False)
    monkeypatch.setattr("grouplab.commands.verify.run_suite", lambda *a, **k: [failing])
    with pytest.raises(GatingFailure):
        cmd_verify("anything")


def test_main_exit_codes(output_dir, monkeypatch):
    assert main(["verify", "nope", "--no-save"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["train", "--set", "model.K=0"]) == EXIT_USAGE
    assert main(["verify", "boundary_fit", "--no-save"]) == EXIT_OK
    assert not output_dir.exists()
    monkeypatch.setattr(
        "grouplab.commands.verify.run_suite", lambda *a, **k: [VerifyReport(check="x", passed=False)]
    )
    assert main(["verify", "all", "--no-save"]) == EXIT_GATING_FAILURE


def test_main_group_prints_table(capsys):
    assert main(["group", "cyclic", "3"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("3\n0 1 2\n1 2 0\n2 0 1\nname: Z_3\n")


def test_main_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert "grouplab" in capsys.readouterr().out


def test_main_rejects_unknown_log_level(capsys):
    assert main(["--log-level", "LOUD", "group", "cyclic", "3"]) == EXIT_USAGE
    assert capsys.readouterr().out == ""


def test_configure_logging_rejects_unknown_level():
    with pytest.raises(UsageError, match="LOUD"):
        configure_logging("LOUD")
    configure_logging("debug")


def test_main_bad_cayley_file(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("2\n0 1\n")
    assert main(["group", "--file", str(bad)]) == EXIT_USAGE


def test_scan_is_worker_independent(output_dir):
    extra = ("scan.orders=[5, 7]", "scan.ratios=[0.6]", "scan.seeds=[0, 1]")
    serial = pd.read_csv(cmd_scan(small_config(output_dir, *extra)) / "boundary.csv")
    pooled = pd.read_csv(cmd_scan(small_config(output_dir, *extra, "workers=2")) / "boundary.csv")
    pd.testing.assert_frame_equal(serial, pooled)


@pytest.mark.slow
def test_main_verify_all_passes(output_dir):
    assert main(["verify", "all", "--no-save"]) == EXIT_OK
