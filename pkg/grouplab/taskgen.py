"""Group-arithmetic prediction tasks: pair tables, splits and one-hot encodings"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import SplitError, WeightError
from .groupkit import Group
from .schemas import DatasetManifest

logger = logging.getLogger(__name__)

SplitMode = Literal["fixed-count", "bernoulli"]
CenteringMode = Literal["exact-projection", "train-statistics"]


@dataclass(frozen=True, eq=False)
class PairTable:
    """All M² pairs (h1, h2, h1h2), ordered by target block then h1"""
    group: Group
    rows: np.ndarray  # (M², 3) int

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    def block(self, h: int) -> np.ndarray:
        M = self.group.order
        return np.arange(h * M, (h + 1) * M)


@dataclass(frozen=True, eq=False)
class Dataset:
    table: PairTable
    train_idx: np.ndarray
    test_idx: np.ndarray
    p: float
    seed: int
    mode: SplitMode = "fixed-count"
    centering: CenteringMode = "exact-projection"

    @property
    def n(self) -> int:
        return int(self.train_idx.shape[0])

    @property
    def group(self) -> Group:
        return self.table.group


@dataclass(frozen=True, eq=False)
class WeightedPairs:
    """Single-target task: rows (g, g^-1 h) with weight p_g"""
    group: Group
    target: int
    rows: np.ndarray  # (M, 3) int
    weights: np.ndarray  # (M,)


def full_task(group: Group) -> PairTable:
    """Every ordered pair, block h holds (h1, h1^-1 h) for h1 = 0..M-1"""
    M = group.order
    h = np.repeat(np.arange(M), M)
    h1 = np.tile(np.arange(M), M)
    h2 = group.cayley[group.inverse[h1], h]
    rows = np.stack([h1, h2, h], axis=1)
    rows.flags.writeable = False
    return PairTable(group=group, rows=rows)


def fixed_count(p: float, total: int) -> int:
    """Training rows for keep ratio p; p·M² is floored (n=2016 at M=71, p=0.4)"""
    return int(math.floor(p * total + 1e-9))


def split(
    table: PairTable,
    p: float,
    seed: int,
    mode: SplitMode = "fixed-count",
    centering: CenteringMode = "exact-projection",
) -> Dataset:
    """Deterministic train/test split of a pair table"""
    if not 0.0 < p <= 1.0:
        raise SplitError(f"keep ratio must be in (0, 1], got {p}")
    total = table.size
    rng = np.random.default_rng(seed)
    if mode == "fixed-count":
        n = fixed_count(p, total)
        train = np.sort(rng.permutation(total)[:n])
    elif mode == "bernoulli":
        train = np.flatnonzero(rng.random(total) < p)
    else:
        raise SplitError(f"unknown split mode {mode!r}")
    if train.size == 0:
        raise SplitError(f"p={p} leaves an empty training set for {total} rows")
    mask = np.zeros(total, dtype=bool)
    mask[train] = True
    test = np.flatnonzero(~mask)
    logger.debug("Split %s p=%s seed=%d: %d train, %d test", table.group.name, p, seed, train.size, test.size)
    return Dataset(table, train, test, float(p), int(seed), mode, centering)


def one_hot_pairs(group: Group, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """X = [e_h1, e_h2] (n×2M) and Y = e_h (n×M)"""
    M = group.order
    n = rows.shape[0]
    X = np.zeros((n, 2 * M))
    Y = np.zeros((n, M))
    arange = np.arange(n)
    X[arange, rows[:, 0]] = 1.0
    X[arange, M + rows[:, 1]] = 1.0
    Y[arange, rows[:, 2]] = 1.0
    return X, Y


def encode(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(X_train, Y_train, X_test, Y_test) as float64 one-hot matrices"""
    rows = dataset.table.rows
    X_train, Y_train = one_hot_pairs(dataset.group, rows[dataset.train_idx])
    X_test, Y_test = one_hot_pairs(dataset.group, rows[dataset.test_idx])
    return X_train, Y_train, X_test, Y_test


def center_rows(A: np.ndarray, mean: Optional[np.ndarray] = None) -> np.ndarray:
    """P⊥₁A (subtract the column means) or subtract a stored mean"""
    if mean is None:
        mean = A.mean(axis=0, keepdims=True) if A.shape[0] else np.zeros((1, A.shape[1]))
    return A - mean


def single_target_task(group: Group, h: int, weights: Sequence[float]) -> WeightedPairs:
    """Rows (g, g^-1 h) weighted by the normalized p_g"""
    M = group.order
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (M,):
        raise WeightError(f"expected {M} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise WeightError("weights must be nonnegative")
    if w.sum() <= 0:
        raise WeightError("weights must not all be zero")
    g = np.arange(M)
    rows = np.stack([g, group.cayley[group.inverse[g], h], np.full(M, h)], axis=1)
    return WeightedPairs(group=group, target=int(h), rows=rows, weights=w / w.sum())


def pair_rows(task: WeightedPairs) -> tuple[np.ndarray, np.ndarray]:
    return one_hot_pairs(task.group, task.rows)


def dataset_manifest(dataset: Dataset, source: str) -> DatasetManifest:
    """Replay record; source is a recipe string or the table's content hash"""
    return DatasetManifest(
        source=source,
        p=dataset.p,
        seed=dataset.seed,
        mode=dataset.mode,
        train=dataset.train_idx.tolist(),
        test=dataset.test_idx.tolist(),
    )


def dataset_from_manifest(table: PairTable, manifest: DatasetManifest) -> Dataset:
    train = np.asarray(manifest.train, dtype=np.int64)
    test = np.asarray(manifest.test, dtype=np.int64)
    if train.size + test.size != table.size or np.intersect1d(train, test).size:
        raise SplitError("manifest indices do not partition the pair table")
    return Dataset(table, train, test, manifest.p, manifest.seed, manifest.mode)
