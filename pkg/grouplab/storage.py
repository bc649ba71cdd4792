import csv
import hashlib
import json
import logging
import struct
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .energyscape import AscentResult
from .errors import LabError
from .netdyn import CSV_COLUMNS, RunLog

logger = logging.getLogger(__name__)

MAXIMA_COLUMNS = [
    "seed", "converged", "energy", "theory_energy", "label_k", "c_max",
    "sign", "struct_residual", "flat_lambda_min", "steps",
]


# Run directories
def make_run_dir(output_dir: str | Path, tag: str, now: datetime | None = None) -> Path:
    """Create <out>/<timestamp>-<tag>/, suffixing a counter on collision"""
    stamp = (now or datetime.now()).strftime("%Y%m%d-%H%M%S")
    root = Path(output_dir)
    path = root / f"{stamp}-{tag}"
    counter = 1
    while path.exists():
        path = root / f"{stamp}-{tag}-{counter}"
        counter += 1
    path.mkdir(parents=True)
    logger.info("Run directory %s", path)
    return path


def content_hash(data: bytes | str) -> str:
    """Git-style blob hash: sha1("blob <len>\\0" + bytes)"""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# JSON documents
def write_json(path: str | Path, document: BaseModel | dict[str, Any] | list[Any]) -> Path:
    path = Path(path)
    if isinstance(document, BaseModel):
        text = document.model_dump_json(indent=2, by_alias=True)
    else:
        text = json.dumps(document, indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LabError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise LabError(f"{path} is not valid JSON: {exc}")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (datetime, Path)):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


# CSV tables
def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def write_runlog_csv(path: str | Path, log: RunLog) -> Path:
    """One row per eval record, floats at 9 significant digits"""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in log.records:
            writer.writerow([_fmt(x) for x in record.row()])
    return path


def read_runlog_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path)


def write_maxima_csv(path: str | Path, results: Iterable[AscentResult]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MAXIMA_COLUMNS)
        for r in results:
            c = r.classification
            writer.writerow([
                _fmt(r.seed),
                _fmt(r.converged),
                _fmt(r.energy),
                _fmt(c.theory_energy if c else None),
                _fmt(c.label if c else None),
                _fmt(c.c_max if c else None),
                _fmt(c.sign if c else None),
                _fmt(c.struct_residual if c else None),
                _fmt(r.flatness.lam_min_abs if r.flatness else None),
                _fmt(r.steps),
            ])
    return path


def write_table_csv(path: str | Path, table: pd.DataFrame) -> Path:
    path = Path(path)
    table.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
    return path


# Weights
def save_weights(path: str | Path, matrices: Sequence[np.ndarray]) -> Path:
    """Little-endian [u32 rank][u32 dims...][f64 row-major data] per matrix, in order"""
    path = Path(path)
    with path.open("wb") as fh:
        for W in matrices:
            W = np.ascontiguousarray(W, dtype="<f8")
            fh.write(struct.pack(f"<{W.ndim + 1}I", W.ndim, *W.shape))
            fh.write(W.tobytes(order="C"))
    return path


def load_weights(path: str | Path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    matrices = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise LabError(f"{path}: truncated header at byte {offset}")
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        if offset + 8 * count > len(data):
            raise LabError(f"{path}: truncated matrix data at byte {offset}")
        matrices.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy())
        offset += 8 * count
    return matrices
