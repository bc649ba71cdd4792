"""Depth-configurable network Ŷ = σ(…σ(XW₁)…W_L)V, its centered ℓ2 loss, optimizers and telemetry.

Loss: J = ½‖P⊥₁(Y − F_L V)‖²_F + (η/2)(Σ‖W_l‖² + ‖V‖²), with P⊥₁ = I − 11ᵀ/n.
The backpropagated signal to the last hidden layer is G_F = P⊥₁(Y − F_L V)Vᵀ.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm import tqdm

from . import config as env
from .activations import Activation
from .errors import NonFiniteError, ShapeError, SingularSystemError
from .numkit import diag_err, frobenius_cosine, polar_factor, solve_spd
from .schemas import TrainConfig
from .taskgen import Dataset, center_rows, encode

logger = logging.getLogger(__name__)

DIVERGENCE_LOSS = 1e12


@dataclass
class ModelState:
    hidden: list[np.ndarray]
    V: np.ndarray
    activation: Activation
    residual: bool = False
    init_scale: float = 1.0

    @property
    def depth(self) -> int:
        return len(self.hidden) + 1

    @property
    def width(self) -> int:
        return int(self.V.shape[0])

    def matrices(self) -> list[np.ndarray]:
        """Weights in layer order, V last"""
        return [*self.hidden, self.V]

    def copy(self) -> "ModelState":
        return ModelState([W.copy() for W in self.hidden], self.V.copy(), self.activation, self.residual, self.init_scale)


def init_model(
    M: int,
    K: int,
    activation: Activation,
    rng: np.random.Generator,
    depth: int = 2,
    residual: bool = False,
    init_scale: float = 1.0,
) -> ModelState:
    """Normal init with std init_scale/sqrt(fan-in)"""
    if depth < 2:
        raise ShapeError("depth counts weight layers and must be at least 2")
    if residual and depth <= 2:
        raise ShapeError("residual connections need depth > 2")
    hidden = [rng.normal(0.0, init_scale / np.sqrt(2 * M), size=(2 * M, K))]
    for _ in range(depth - 2):
        hidden.append(rng.normal(0.0, init_scale / np.sqrt(K), size=(K, K)))
    V = rng.normal(0.0, init_scale / np.sqrt(K), size=(K, M))
    return ModelState(hidden, V, activation, residual, init_scale)


def _forward_full(state: ModelState, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    if X.ndim != 2 or X.shape[1] != state.hidden[0].shape[0]:
        raise ShapeError(f"input has {X.shape[-1]} columns, first layer expects {state.hidden[0].shape[0]}")
    pre: list[np.ndarray] = []
    feats: list[np.ndarray] = []
    F = X
    for layer, W in enumerate(state.hidden):
        Z = F @ W
        out = state.activation(Z)
        if state.residual and layer > 0:
            out = out + F
        pre.append(Z)
        feats.append(out)
        F = out
    return pre, feats, F @ state.V


def forward(state: ModelState, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Hidden activations per layer and predictions F_L V"""
    _, feats, preds = _forward_full(state, X)
    return feats, preds


def loss_and_grads(
    state: ModelState, X: np.ndarray, Y: np.ndarray, eta: float
) -> tuple[float, list[np.ndarray], np.ndarray]:
    """Loss J, its gradient per matrix (layer order, V last) and G_F"""
    pre, feats, preds = _forward_full(state, X)
    if not np.all(np.isfinite(preds)):
        raise NonFiniteError("non-finite values in the forward pass")
    F_top = feats[-1]
    residual = center_rows(Y - preds)
    G_F = residual @ state.V.T

    weight_sq = sum(float(np.sum(W * W)) for W in state.matrices())
    loss = 0.5 * float(np.sum(residual * residual)) + 0.5 * eta * weight_sq

    grads: list[np.ndarray] = [np.empty(0)] * len(state.hidden)
    dV = -(F_top.T @ residual) + eta * state.V
    upstream = -G_F
    for layer in range(len(state.hidden) - 1, -1, -1):
        W = state.hidden[layer]
        below = feats[layer - 1] if layer > 0 else X
        dZ = upstream * state.activation.deriv(pre[layer])
        grads[layer] = below.T @ dZ + eta * W
        if layer > 0:
            passed = dZ @ W.T
            upstream = passed + upstream if state.residual else passed
    grads.append(dV)
    return loss, grads, G_F


def ridge_top(F: np.ndarray, Y: np.ndarray, eta: float) -> np.ndarray:
    """V = (F̃ᵀF̃ + ηI)⁻¹F̃ᵀỸ"""
    F_c, Y_c = center_rows(F), center_rows(Y)
    A = F_c.T @ F_c + eta * np.eye(F.shape[1])
    B = F_c.T @ Y_c
    if eta == 0.0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystemError("F̃ᵀF̃ is singular; ridge_top needs η > 0")
    return solve_spd(A, B)


def independent_direction(W: np.ndarray, X: np.ndarray, Y_c: np.ndarray, activation: Activation) -> np.ndarray:
    """Columns XᵀD_jỸỸᵀσ(Xw_j): the weight update each hidden node follows on its own"""
    Z = X @ W
    return X.T @ (activation.deriv(Z) * (Y_c @ (Y_c.T @ activation(Z))))


def accuracy(preds: np.ndarray, Y: np.ndarray) -> float:
    """Row argmax of raw logits against the label; ties go to the lowest index"""
    if Y.shape[0] == 0:
        return float("nan")
    return float(np.mean(np.argmax(preds, axis=1) == np.argmax(Y, axis=1)))


@dataclass
class DiagRecord:
    diag_ftf: float
    diag_fft: float
    align_gf: float
    flagged: bool = False


def diagnostics(F: np.ndarray, G_F: np.ndarray, Y_c: np.ndarray) -> DiagRecord:
    """Gram diagonality of the hidden features and alignment of G_F with ỸỸᵀF"""
    F_c = center_rows(F)
    ftf = diag_err(F_c.T @ F_c)
    fft = diag_err(center_rows(F @ F.T))
    align = frobenius_cosine(G_F, Y_c @ (Y_c.T @ F))
    flagged = any(np.isnan(x) for x in (ftf, fft, align))
    return DiagRecord(ftf, fft, align, flagged)


# Optimizers
class GradientDescent:
    def __init__(self, cfg: TrainConfig):
        self.lr = cfg.lr

    def step(self, state: ModelState, grads: list[np.ndarray]) -> None:
        for W, g in zip(state.matrices(), grads):
            W -= self.lr * g


class Adam:
    """Adam with decoupled weight decay, or plain Adam when η sits in the gradient"""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m: dict[int, np.ndarray] = {}
        self.v: dict[int, np.ndarray] = {}
        self.shrink = 1 - cfg.lr * cfg.weight_decay if cfg.decay == "decoupled" else 1.0

    def update(self, slot: int, W: np.ndarray, g: np.ndarray) -> None:
        cfg = self.cfg
        if slot not in self.m:
            self.m[slot] = np.zeros_like(g)
            self.v[slot] = np.zeros_like(g)
        m, v = self.m[slot], self.v[slot]
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** self.t)
        v_hat = v / (1 - cfg.beta2 ** self.t)
        W *= self.shrink
        W -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

    def step(self, state: ModelState, grads: list[np.ndarray]) -> None:
        self.t += 1
        for slot, (W, g) in enumerate(zip(state.matrices(), grads)):
            self.update(slot, W, g)


class MuonAdam(Adam):
    """Muon on hidden matrices, Adam on V"""

    def __init__(self, cfg: TrainConfig):
        super().__init__(cfg)
        self.buffers: dict[int, np.ndarray] = {}
        self.min_inner = float("inf")

    def step(self, state: ModelState, grads: list[np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        for slot, (W, g) in enumerate(zip(state.hidden, grads)):
            W *= self.shrink
            buf = self.buffers.setdefault(slot, np.zeros_like(g))
            buf *= cfg.muon_momentum
            buf += g
            direction = g + cfg.muon_momentum * buf if cfg.nesterov else buf
            if np.any(g):
                self.min_inner = min(self.min_inner, float(np.sum(polar_factor(g) * g)))
            if np.any(direction):
                W -= cfg.lr * polar_factor(direction)
        self.update(len(state.hidden), state.V, grads[-1])


def make_optimizer(cfg: TrainConfig) -> GradientDescent | Adam | MuonAdam:
    if cfg.optimizer == "gd":
        return GradientDescent(cfg)
    if cfg.optimizer == "adam":
        return Adam(cfg)
    return MuonAdam(cfg)


# Telemetry
CSV_COLUMNS = [
    "epoch", "train_loss", "test_loss", "train_acc", "test_acc",
    "gf_norm", "dW_cos", "dV_cos", "diag_ftf", "diag_fft", "align_gf",
]


@dataclass
class RunRecord:
    epoch: int
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float
    gf_norm: float
    dW_cos: float
    dV_cos: float
    diag_ftf: float
    diag_fft: float
    align_gf: float

    def row(self) -> list[float]:
        return [getattr(self, name) for name in CSV_COLUMNS]


@dataclass
class RunLog:
    records: list[RunRecord] = field(default_factory=list)
    threshold: float = 0.99
    first_train_epoch: Optional[int] = None
    first_test_epoch: Optional[int] = None
    diverged_epoch: Optional[int] = None
    min_muon_inner: Optional[float] = None

    def append(self, record: RunRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("RunLog epochs must be strictly increasing")
        self.records.append(record)
        if self.first_train_epoch is None and record.train_acc >= self.threshold:
            self.first_train_epoch = record.epoch
            logger.info("Train accuracy reached %.2f at epoch %d", self.threshold, record.epoch)
        if self.first_test_epoch is None and record.test_acc >= self.threshold:
            self.first_test_epoch = record.epoch
            logger.info("Test accuracy reached %.2f at epoch %d", self.threshold, record.epoch)

    @property
    def final(self) -> Optional[RunRecord]:
        return self.records[-1] if self.records else None

    @property
    def grokking_delay(self) -> int:
        if self.first_train_epoch is None or self.first_test_epoch is None:
            return -1
        return self.first_test_epoch - self.first_train_epoch


def _cosine_distance(a: list[np.ndarray], b: list[np.ndarray]) -> float:
    flat_a = np.concatenate([x.ravel() for x in a])
    flat_b = np.concatenate([x.ravel() for x in b])
    cos = frobenius_cosine(flat_a, flat_b)
    return float("nan") if np.isnan(cos) else 1.0 - cos


def _split_loss(residual: np.ndarray) -> float:
    if residual.shape[0] == 0:
        return float("nan")
    return 0.5 * float(np.sum(residual * residual)) / residual.shape[0]


def evaluate(
    state: ModelState,
    epoch: int,
    data: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    centering: str,
    previous: Optional[ModelState] = None,
) -> RunRecord:
    """One telemetry record; losses are per sample"""
    X_train, Y_train, X_test, Y_test = data
    feats, preds = forward(state, X_train)
    train_res = Y_train - preds
    train_mean = train_res.mean(axis=0, keepdims=True)
    train_res = train_res - train_mean
    G_F = train_res @ state.V.T
    diag = diagnostics(feats[-1], G_F, center_rows(Y_train))

    if X_test.shape[0]:
        _, test_preds = forward(state, X_test)
        test_res = Y_test - test_preds
        test_res = center_rows(test_res, train_mean if centering == "train-statistics" else None)
        test_loss, test_acc = _split_loss(test_res), accuracy(test_preds, Y_test)
    else:
        test_loss, test_acc = float("nan"), float("nan")

    dW = dV = float("nan")
    if previous is not None:
        dW = _cosine_distance(state.hidden, previous.hidden)
        dV = _cosine_distance([state.V], [previous.V])
    return RunRecord(
        epoch=epoch,
        train_loss=_split_loss(train_res),
        test_loss=test_loss,
        train_acc=accuracy(preds, Y_train),
        test_acc=test_acc,
        gf_norm=float(np.linalg.norm(G_F)),
        dW_cos=dW,
        dV_cos=dV,
        diag_ftf=diag.diag_ftf,
        diag_fft=diag.diag_fft,
        align_gf=diag.align_gf,
    )


def train(state: ModelState, dataset: Dataset, cfg: TrainConfig, progress: Optional[bool] = None) -> RunLog:
    """Full-batch training; mutates state and returns the telemetry"""
    data = encode(dataset)
    X, Y = data[0], data[1]
    epochs = cfg.budget(dataset.group.order)
    optimizer = make_optimizer(cfg)
    # GD and l2 decay carry η in the gradient; decoupled Adam and Muon shrink the weights directly
    grad_eta = cfg.weight_decay if cfg.optimizer == "gd" or cfg.decay == "l2" else 0.0
    log = RunLog(threshold=cfg.threshold)
    log.append(evaluate(state, 0, data, dataset.centering))

    show = env.SHOW_PROGRESS if progress is None else progress
    for step in tqdm(range(1, epochs + 1), desc=f"train {dataset.group.name}", disable=not show, leave=False):
        try:
            loss, grads, _ = loss_and_grads(state, X, Y, grad_eta)
        except NonFiniteError:
            loss, grads = float("inf"), []
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            log.diverged_epoch = step - 1
            logger.warning("Run diverged at epoch %d (loss %.3g)", step - 1, loss)
            break

        is_eval = step % cfg.eval_every == 0 or step == epochs
        previous = state.copy() if is_eval else None
        optimizer.step(state, grads)
        if not all(np.all(np.isfinite(W)) for W in state.matrices()):
            log.diverged_epoch = step
            logger.warning("Run diverged at epoch %d (non-finite weights)", step)
            break
        if is_eval:
            record = evaluate(state, step, data, dataset.centering, previous)
            logger.debug("epoch %d train_loss %.6g train_acc %.4f test_acc %.4f", step, record.train_loss, record.train_acc, record.test_acc)
            log.append(record)

    if isinstance(optimizer, MuonAdam) and np.isfinite(optimizer.min_inner):
        log.min_muon_inner = optimizer.min_inner
    return log
