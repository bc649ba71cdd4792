import json
from datetime import datetime

import numpy as np
import pytest

from grouplab.energyscape import AscentResult, Classification
from grouplab.errors import LabError
from grouplab.netdyn import CSV_COLUMNS, RunLog, RunRecord
from grouplab.schemas import RunSummary
from grouplab.storage import (
    MAXIMA_COLUMNS,
    _fmt,
    content_hash,
    load_weights,
    make_run_dir,
    read_json,
    read_runlog_csv,
    save_weights,
    write_json,
    write_maxima_csv,
    write_runlog_csv,
)


def test_content_hash_matches_git():
    assert content_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_run_dir_collision(tmp_path):
    now = datetime(2024, 5, 1, 12, 30, 0)
    first = make_run_dir(tmp_path, "scan", now)
    second = make_run_dir(tmp_path, "scan", now)
    assert first.name == "20240501-123000-scan"
    assert second.name == "20240501-123000-scan-1"
    assert first.is_dir() and second.is_dir()


def test_weights_round_trip(tmp_path, rng):
    matrices = [rng.normal(size=(6, 4)), rng.normal(size=(4, 4)), rng.normal(size=(4, 3))]
    path = save_weights(tmp_path / "weights.bin", matrices)
    assert path.stat().st_size == sum(4 * 3 + 8 * W.size for W in matrices)
    loaded = load_weights(path)
    assert len(loaded) == 3
    for a, b in zip(matrices, loaded):
        assert np.array_equal(a, b)


def test_weights_header_is_little_endian(tmp_path):
    path = save_weights(tmp_path / "w.bin", [np.ones((2, 3))])
    raw = path.read_bytes()
    assert raw[:12] == bytes([2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0])


def test_truncated_weights(tmp_path):
    path = save_weights(tmp_path / "w.bin", [np.ones((2, 3))])
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(LabError):
        load_weights(path)


@pytest.mark.parametrize(
    "value, text",
    [(None, ""), (True, "1"), (np.bool_(False), "0"), (7, "7"), (np.int64(3), "3"), (0.1, "0.1"), (1 / 3, "0.333333333")],
)
def test_number_format(value, text):
    assert _fmt(value) == text


def test_runlog_csv(tmp_path):
    log = RunLog()
    for epoch in (0, 100):
        values = dict.fromkeys(CSV_COLUMNS, 0.25)
        values["epoch"] = epoch
        values["dW_cos"] = float("nan")
        log.append(RunRecord(**values))
    path = write_runlog_csv(tmp_path / "runlog.csv", log)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    frame = read_runlog_csv(path)
    assert list(frame.columns) == CSV_COLUMNS
    assert frame["epoch"].tolist() == [0, 100]
    assert frame["dW_cos"].isna().all()


def test_maxima_csv(tmp_path):
    classified = AscentResult(
        w=np.ones(4) / 2, energy=2.75, steps=12, grad_norm=0.0, converged=True, seed=3,
        classification=Classification(label=2, c_max=1.0, sign=-1, struct_residual=0.0, theory_energy=2.75),
    )
    bare = AscentResult(w=np.ones(4) / 2, energy=1.0, steps=5000, grad_norm=0.1, converged=False, seed=4)
    path = write_maxima_csv(tmp_path / "maxima.csv", [classified, bare])
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(MAXIMA_COLUMNS)
    assert lines[1] == "3,1,2.75,2.75,2,1,-1,0,,12"
    assert lines[2] == "4,0,1,,,,,,,5000"


def test_json_documents(tmp_path):
    path = write_json(tmp_path / "a.json", {"b": np.float64(0.5), "a": np.arange(3)})
    assert read_json(path) == {"a": [0, 1, 2], "b": 0.5}
    model = RunSummary(epochs_run=10, final_train_acc=1.0, final_test_acc=0.5)
    assert json.loads(write_json(tmp_path / "s.json", model).read_text())["grokking_delay"] == -1


def test_read_json_errors(tmp_path):
    with pytest.raises(LabError):
        read_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(LabError):
        read_json(bad)
