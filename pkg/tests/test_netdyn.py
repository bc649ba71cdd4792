import numpy as np
import pytest

from grouplab.activations import Activation
from grouplab.energyscape import energy_grad, full_energy_task
from grouplab.errors import ShapeError, SingularSystemError
from grouplab.groupkit import make_cyclic
from grouplab.netdyn import (
    CSV_COLUMNS,
    Adam,
    GradientDescent,
    MuonAdam,
    RunLog,
    RunRecord,
    accuracy,
    diagnostics,
    forward,
    independent_direction,
    init_model,
    loss_and_grads,
    make_optimizer,
    ridge_top,
    train,
)
from grouplab.numkit import derive_rng
from grouplab.schemas import TrainConfig
from grouplab.taskgen import center_rows, encode, full_task, one_hot_pairs, split


def record(epoch, train_acc=0.0, test_acc=0.0):
    values = dict.fromkeys(CSV_COLUMNS, 0.0)
    values.update(epoch=epoch, train_acc=train_acc, test_acc=test_acc)
    return RunRecord(**values)


def test_init_shapes(quadratic, rng):
    state = init_model(5, 7, quadratic, rng, depth=3)
    assert [W.shape for W in state.matrices()] == [(10, 7), (7, 7), (7, 5)]
    assert state.depth == 3
    assert state.width == 7


def test_init_rejects_bad_depth(quadratic, rng):
    with pytest.raises(ShapeError):
        init_model(5, 4, quadratic, rng, depth=1)
    with pytest.raises(ShapeError):
        init_model(5, 4, quadratic, rng, depth=2, residual=True)


def test_forward_rejects_wrong_width(z5, quadratic, rng):
    state = init_model(5, 4, quadratic, rng)
    with pytest.raises(ShapeError):
        forward(state, np.zeros((3, 9)))


@pytest.mark.parametrize(
    "activation, depth, residual",
    [
        (Activation("quadratic"), 2, False),
        (Activation("silu"), 2, False),
        (Activation("tanh"), 3, True),
        (Activation("linear_quadratic", a=0.5, b=1.0), 3, False),
    ],
)
def test_gradients_match_finite_differences(z5, rng, fd, activation, depth, residual):
    X, Y = one_hot_pairs(z5, full_task(z5).rows[::2])
    state = init_model(5, 3, activation, rng, depth=depth, residual=residual)
    eta = 0.01
    _, grads, _ = loss_and_grads(state, X, Y, eta)
    for slot, W in enumerate(state.matrices()):
        def loss_at(values, slot=slot):
            trial = state.copy()
            trial.matrices()[slot][...] = values
            return loss_and_grads(trial, X, Y, eta)[0]

        numeric = fd(loss_at, W)
        assert np.allclose(grads[slot], numeric, rtol=1e-5, atol=1e-6)


def test_gf_is_backprop_signal(z5, quadratic, rng):
    X, Y = one_hot_pairs(z5, full_task(z5).rows)
    state = init_model(5, 4, quadratic, rng)
    _, _, G_F = loss_and_grads(state, X, Y, 0.0)
    _, preds = forward(state, X)
    assert np.allclose(G_F, center_rows(Y - preds) @ state.V.T)


def test_ridge_top_is_stationary(rng):
    F = rng.normal(size=(12, 4))
    Y = np.eye(3)[rng.integers(0, 3, size=12)]
    eta = 0.1
    V = ridge_top(F, Y, eta)
    F_c, Y_c = center_rows(F), center_rows(Y)
    assert np.allclose(F_c.T @ (F_c @ V - Y_c) + eta * V, 0.0, atol=1e-10)


def test_ridge_top_singular_without_decay(rng):
    with pytest.raises(SingularSystemError):
        ridge_top(rng.normal(size=(3, 6)), np.eye(3), 0.0)


def test_independent_direction_is_energy_gradient(z5, quadratic, rng):
    task = full_energy_task(z5, quadratic)
    W = rng.normal(size=(10, 3))
    D = independent_direction(W, task.X, task.T, quadratic)
    for j in range(3):
        assert np.allclose(D[:, j], energy_grad(W[:, j], task))


def test_accuracy_ties_take_lowest_index():
    preds = np.array([[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]])
    Y = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert accuracy(preds, Y) == 0.5
    assert np.isnan(accuracy(np.zeros((0, 3)), np.zeros((0, 3))))


def test_diagnostics_flags_zero_features():
    F = np.ones((4, 3))
    diag = diagnostics(F, np.zeros((4, 3)), center_rows(np.eye(4)))
    assert diag.flagged


def test_make_optimizer():
    assert isinstance(make_optimizer(TrainConfig(optimizer="gd")), GradientDescent)
    assert type(make_optimizer(TrainConfig(optimizer="adam"))) is Adam
    assert isinstance(make_optimizer(TrainConfig(optimizer="muon")), MuonAdam)


def test_adam_first_step_is_sign_sized():
    cfg = TrainConfig(optimizer="adam", lr=0.01, weight_decay=0.0)
    W = np.zeros((2, 2))
    opt = Adam(cfg)
    opt.t = 1
    opt.update(0, W, np.array([[3.0, -0.5], [1e-3, 2.0]]))
    assert np.allclose(W, -0.01 * np.sign([[3.0, -0.5], [1e-3, 2.0]]), atol=1e-6)


@pytest.mark.parametrize("optimizer", ["adam", "muon"])
def test_decoupled_decay_applies_with_zero_gradient(optimizer):
    cfg = TrainConfig(optimizer=optimizer, lr=0.1, weight_decay=0.5)
    state = init_model(3, 4, Activation("quadratic"), derive_rng(0))
    before = state.copy()
    make_optimizer(cfg).step(state, [np.zeros_like(W) for W in state.matrices()])
    for W, W0 in zip(state.matrices(), before.matrices()):
        np.testing.assert_allclose(W, 0.95 * W0)


def test_l2_decay_skips_the_multiplicative_shrink():
    cfg = TrainConfig(optimizer="adam", lr=0.1, weight_decay=0.5, decay="l2")
    W = np.ones((2, 2))
    opt = Adam(cfg)
    opt.t = 1
    opt.update(0, W, np.zeros((2, 2)))
    np.testing.assert_array_equal(W, np.ones((2, 2)))


def test_runlog_thresholds():
    log = RunLog(threshold=0.9)
    log.append(record(0))
    log.append(record(100, train_acc=0.95))
    log.append(record(200, train_acc=1.0, test_acc=0.5))
    assert log.grokking_delay == -1
    log.append(record(300, train_acc=1.0, test_acc=0.92))
    assert log.first_train_epoch == 100
    assert log.first_test_epoch == 300
    assert log.grokking_delay == 200
    assert log.final.epoch == 300
    with pytest.raises(ValueError):
        log.append(record(300))


def _train(z5, optimizer="adam", lr=0.01, epochs=60, seed=3):
    data = split(full_task(z5), 0.6, seed=1)
    state = init_model(5, 8, Activation("quadratic"), derive_rng(seed))
    cfg = TrainConfig(optimizer=optimizer, lr=lr, epochs=epochs, eval_every=20)
    return state, train(state, data, cfg, progress=False)


def test_training_is_deterministic(z5):
    state_a, log_a = _train(z5)
    state_b, log_b = _train(z5)
    rows_a = np.array([r.row() for r in log_a.records], dtype=float)
    rows_b = np.array([r.row() for r in log_b.records], dtype=float)
    assert np.isnan(rows_a[0, CSV_COLUMNS.index("dW_cos")])
    np.testing.assert_array_equal(rows_a, rows_b)
    assert all(np.array_equal(a, b) for a, b in zip(state_a.matrices(), state_b.matrices()))
    assert [r.epoch for r in log_a.records] == [0, 20, 40, 60]


def test_training_reduces_loss(z5):
    _, log = _train(z5, epochs=400)
    assert log.final.train_loss < log.records[0].train_loss
    assert log.diverged_epoch is None


def test_huge_step_diverges(z5):
    _, log = _train(z5, optimizer="gd", lr=1e4, epochs=200)
    assert log.diverged_epoch is not None
    assert log.diverged_epoch < 200


def test_muon_records_inner_product(z5):
    _, log = _train(z5, optimizer="muon", lr=0.01, epochs=40)
    assert log.min_muon_inner is not None
    assert log.min_muon_inner > 0


def test_encode_matches_train_inputs(z5):
    data = split(full_task(z5), 0.6, seed=1)
    X, Y, _, _ = encode(data)
    assert X.shape[0] == Y.shape[0] == data.n


def test_forward_hand_evaluable(quadratic):
    state = init_model(3, 1, quadratic, np.random.default_rng(0))
    state.hidden[0][...] = 0.0
    state.hidden[0][0, 0] = 1.0
    state.V[...] = 1.0
    X, _ = one_hot_pairs(make_cyclic(3), full_task(make_cyclic(3)).rows)
    feats, preds = forward(state, X)
    assert np.array_equal(feats[0][:, 0], (full_task(make_cyclic(3)).rows[:, 0] == 0).astype(float))
    assert np.array_equal(preds, np.repeat(feats[0], 3, axis=1))


def test_zero_top_layer_gives_zero_signal(z5, quadratic, rng):
    X, Y = one_hot_pairs(z5, full_task(z5).rows)
    state = init_model(5, 4, quadratic, rng)
    state.V[...] = 0.0
    _, _, G_F = loss_and_grads(state, X, Y, 0.1)
    assert not G_F.any()


def test_ridge_top_orthonormal_design(rng):
    F = np.linalg.qr(center_rows(rng.normal(size=(10, 3))))[0]
    Y = np.eye(4)[rng.integers(0, 4, size=10)]
    assert np.allclose(ridge_top(F, Y, 0.0), F.T @ center_rows(Y), atol=1e-10)
