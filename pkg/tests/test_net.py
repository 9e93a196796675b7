import numpy as np
import pytest

from fairlog.losses import LossSpec, loss_grad, loss_value
from fairlog.net import (
    AdamW,
    Classifier,
    StaleTapeError,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
)


def test_zero_weight_network_outputs_half():
    clf = Classifier(5, hidden=(8,), seed=0)
    for w in clf.weights:
        w[...] = 0.0
    for b in clf.biases:
        b[...] = 0.0
    x = np.random.default_rng(0).random((7, 5))
    assert np.allclose(clf.predict_proba(x), 0.5)


def test_dimension_mismatch():
    clf = Classifier(4)
    with pytest.raises(ValueError, match="features"):
        clf.forward(np.zeros((2, 3)))


def test_forward_deterministic_without_dropout():
    clf = Classifier(4, dropout=0.0, seed=3)
    x = np.random.default_rng(1).random((10, 4))
    p1, _ = clf.forward(x, training=True, rng=np.random.default_rng(0))
    p2, _ = clf.forward(x, training=True, rng=np.random.default_rng(99))
    assert np.array_equal(p1, p2)


def test_dropout_reproducible_with_seed():
    clf = Classifier(4, hidden=(16,), dropout=0.2, seed=3)
    x = np.random.default_rng(1).random((10, 4))
    p1, _ = clf.forward(x, training=True, rng=np.random.default_rng(42))
    p2, _ = clf.forward(x, training=True, rng=np.random.default_rng(42))
    p3, _ = clf.forward(x, training=True, rng=np.random.default_rng(43))
    assert np.array_equal(p1, p2)
    assert not np.array_equal(p1, p3)


def test_dropout_inactive_in_inference_mode():
    clf = Classifier(4, hidden=(16,), dropout=0.5, seed=3)
    x = np.random.default_rng(1).random((10, 4))
    assert np.array_equal(clf.predict_proba(x), clf.predict_proba(x))


def test_single_layer_analytic_gradient():
    # logistic regression: dL/dw has closed form (p - y) * x for BCE
    clf = Classifier(1, hidden=(), seed=2)
    x = np.array([[0.7]])
    y = np.array([1.0])
    p, tape = clf.forward(x)
    dldp = loss_grad(p, y, LossSpec("bce"))
    grads = clf.backward(tape, dldp)
    assert grads[0][0, 0] == pytest.approx(float(p[0] - y[0]) * 0.7, rel=1e-12)
    assert grads[1][0] == pytest.approx(float(p[0] - y[0]), rel=1e-12)


def test_backward_zero_gradient():
    clf = Classifier(4, seed=0)
    x = np.random.default_rng(0).random((3, 4))
    _, tape = clf.forward(x)
    grads = clf.backward(tape, np.zeros(3))
    assert all(np.all(g == 0) for g in grads)


def test_gradients_match_finite_differences():
    clf = Classifier(6, hidden=(32, 32, 32), seed=7)
    rng = np.random.default_rng(5)
    x = rng.random((16, 6))
    y = rng.integers(0, 2, 16).astype(float)
    spec = LossSpec("bce")
    p, tape = clf.forward(x)
    grads = clf.backward(tape, loss_grad(p, y, spec))
    params = clf.parameters()

    def total():
        probs, _ = clf.forward(x)
        return loss_value(probs, y, spec).sum()

    checked = 0
    for _ in range(100):
        pi = int(rng.integers(0, len(params)))
        fi = int(rng.integers(0, params[pi].size))
        orig = params[pi].flat[fi]
        params[pi].flat[fi] = orig + 1e-6
        up = total()
        params[pi].flat[fi] = orig - 1e-6
        down = total()
        params[pi].flat[fi] = orig
        fd = (up - down) / 2e-6
        if abs(fd) > 1e-8:
            assert grads[pi].flat[fi] == pytest.approx(fd, rel=1e-4)
            checked += 1
    assert checked >= 50


def test_stale_tape_rejected():
    clf = Classifier(3, seed=0)
    x = np.zeros((2, 3))
    _, tape = clf.forward(x)
    clf.bump_version()
    with pytest.raises(StaleTapeError):
        clf.backward(tape, np.ones(2))


# -- optimizer -------------------------------------------------------------------


def test_adamw_zero_gradient_zero_decay_is_identity():
    clf = Classifier(3, hidden=(4,), seed=1)
    config = TrainConfig(lr=0.1, weight_decay=0.0)
    before = clf.copy_weights()
    optimizer = AdamW(clf.parameters(), config)
    optimizer.step([np.zeros_like(p) for p in clf.parameters()])
    assert all(np.array_equal(a, b) for a, b in zip(before, clf.parameters()))


def test_adamw_first_step_is_signed_lr():
    # from zero moments, bias correction makes the update -lr * g/(|g| + eps)
    clf = Classifier(2, hidden=(), seed=1)
    config = TrainConfig(lr=1e-3, weight_decay=0.0)
    optimizer = AdamW(clf.parameters(), config)
    before = clf.copy_weights()
    grads = [np.full_like(p, 0.37) for p in clf.parameters()]
    optimizer.step(grads)
    for b, p in zip(before, clf.parameters()):
        expected = b - config.lr * 0.37 / (0.37 + config.eps)
        assert np.allclose(p, expected, rtol=1e-12)


def test_adamw_decay_shrinks_weights():
    clf = Classifier(2, hidden=(), seed=1)
    config = TrainConfig(lr=0.01, weight_decay=0.5)
    optimizer = AdamW(clf.parameters(), config)
    before = clf.copy_weights()
    optimizer.step([np.zeros_like(p) for p in clf.parameters()])
    for b, p in zip(before, clf.parameters()):
        assert np.allclose(p, b * (1 - 0.01 * 0.5), rtol=1e-12)


# -- losses ---------------------------------------------------------------------


def test_focal_gamma0_alpha_half_is_half_bce():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.01, 0.99, 200)
    y = rng.integers(0, 2, 200).astype(float)
    focal = loss_value(p, y, LossSpec("focal", gamma=0.0, alpha=0.5))
    bce = loss_value(p, y, LossSpec("bce"))
    assert np.max(np.abs(focal - 0.5 * bce)) <= 1e-12
    gf = loss_grad(p, y, LossSpec("focal", gamma=0.0, alpha=0.5))
    gb = loss_grad(p, y, LossSpec("bce"))
    assert np.max(np.abs(gf - 0.5 * gb)) <= 1e-12


def test_focal_gradient_matches_finite_differences():
    spec = LossSpec("focal", gamma=2.0, alpha=0.25)
    p = np.linspace(0.05, 0.95, 19)
    for y in (0.0, 1.0):
        ys = np.full_like(p, y)
        grad = loss_grad(p, ys, spec)
        fd = (loss_value(p + 1e-7, ys, spec) - loss_value(p - 1e-7, ys, spec)) / 2e-7
        assert np.allclose(grad, fd, rtol=1e-5)


def test_loss_spec_validation():
    with pytest.raises(ValueError):
        LossSpec("huber")
    with pytest.raises(ValueError):
        LossSpec("focal", gamma=-1)
    with pytest.raises(ValueError):
        LossSpec("focal", alpha=1.5)


# -- checkpoints -----------------------------------------------------------------


def test_checkpoint_roundtrip_exact(tmp_path):
    clf = Classifier(5, hidden=(16, 8), dropout=0.2, seed=11)
    config = TrainConfig(lr=2e-4, epochs=7, seed=11, loss=LossSpec("focal", 2.0, 0.5))
    path = tmp_path / "model.npz"
    save_checkpoint(path, clf, config)
    loaded, loaded_config = load_checkpoint(path)
    assert loaded.input_dim == 5
    assert loaded.hidden == (16, 8)
    assert loaded.dropout == 0.2
    assert loaded_config == config
    for a, b in zip(clf.parameters(), loaded.parameters()):
        assert np.array_equal(a, b)
    x = np.random.default_rng(0).random((4, 5))
    assert np.array_equal(clf.predict_proba(x), loaded.predict_proba(x))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(val_fraction=1.0)
    assert TrainConfig(loss="focal").loss.kind == "focal"
