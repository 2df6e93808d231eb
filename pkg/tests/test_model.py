import numpy as np
import numpy.testing as npt
import pytest

from meshwalk.errors import DataError
from meshwalk.model import (ModelConfig, Network, load_model, save_model,
                            second_half_start)
from meshwalk.nn import cross_entropy, load_checkpoint, save_checkpoint

from gradcheck import check_tensor_grads


def count_by_hand(num_classes, fc_dims, gru_dims, feature_dim=3):
    """Parameter count written out layer by layer, independent of Network."""
    f1, f2 = fc_dims
    total = feature_dim * f1 + f1  # fc1
    total += 2 * f1                # norm1 gain/shift
    total += f1 * f2 + f2          # fc2
    total += 2 * f2                # norm2
    prev = f2
    for h in gru_dims:             # each GRU: input proj, recurrent, bias
        total += prev * 3 * h + h * 3 * h + 3 * h
        prev = h
    total += prev * num_classes + num_classes  # readout
    return total


def small_config(num_classes=3):
    return ModelConfig(num_classes=num_classes, fc_dims=(4, 6),
                       gru_dims=(5, 5, 4))


# -- sizing -------------------------------------------------------------------

def test_default_parameter_count():
    net = Network(ModelConfig(num_classes=30), np.random.default_rng(0))
    assert net.param_count() == 12_640_286
    assert net.param_count() == count_by_hand(30, (128, 256),
                                              (1024, 1024, 512))


def test_parameter_count_grows_with_classes():
    rng = np.random.default_rng(0)
    base = Network(ModelConfig(num_classes=30), rng).param_count()
    plus = Network(ModelConfig(num_classes=31), rng).param_count()
    assert plus - base == 512 + 1  # one more readout row and bias


def test_tiny_and_small_counts_match_hand_formula(rng):
    tiny = Network(ModelConfig.tiny(4), rng)
    assert tiny.param_count() == count_by_hand(4, (32, 64), (128, 128, 64))
    small = Network(small_config(), rng)
    assert small.param_count() == count_by_hand(3, (4, 6), (5, 5, 4))


def test_config_shape_is_validated(rng):
    with pytest.raises(DataError):
        Network(ModelConfig(num_classes=2, fc_dims=(8,)), rng)
    with pytest.raises(DataError):
        Network(ModelConfig(num_classes=2, gru_dims=(8, 8)), rng)


def test_config_round_trips_through_dict():
    cfg = ModelConfig.tiny(5)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


# -- step selection -----------------------------------------------------------

def test_second_half_start_table():
    # floor(n/2) steps lie at or after the returned index
    for length, start in [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3),
                          (6, 3), (7, 4), (100, 50), (101, 51)]:
        assert second_half_start(length) == start
        assert length - start == length // 2


# -- forward/losses -----------------------------------------------------------

def test_logits_shape_and_2d_3d_agreement(rng):
    net = Network(small_config(), rng)
    x = rng.normal(size=(9, 3))
    flat = net.logits(x)
    assert flat.shape == (9, 3)
    batched = net.logits(x[:, None, :])
    npt.assert_allclose(flat, batched[:, 0], atol=1e-12)


def test_step_probabilities_are_distributions(rng):
    net = Network(small_config(4), rng)
    p = net.step_probabilities(rng.normal(size=(6, 3)))
    npt.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert (p >= 0).all()


def test_classification_loss_matches_manual(rng):
    net = Network(small_config(), rng)
    x = rng.normal(size=(8, 3))
    logits = net.logits(x)
    expected, _ = cross_entropy(logits[-1], 2)
    net.zero_grad()
    assert net.classification_loss(x, 2) == pytest.approx(float(expected))


def test_segmentation_loss_matches_manual(rng):
    net = Network(small_config(), rng)
    x = rng.normal(size=(5, 3))
    labels = np.array([0, 1, 2, 1, 0])
    logits = net.logits(x)
    per_step = [cross_entropy(logits[t], labels[t])[0] for t in (3, 4)]
    net.zero_grad()
    got = net.segmentation_loss(x, labels)
    assert got == pytest.approx(float(np.mean(per_step)))


def test_segmentation_loss_single_step_walk(rng):
    net = Network(small_config(), rng)
    net.zero_grad()
    loss = net.segmentation_loss(rng.normal(size=(1, 3)),
                                 np.array([1]))
    assert loss == 0.0
    assert all(np.all(t.grad == 0) for t in net.tensors())


# -- batching equivalence -----------------------------------------------------

def test_classification_batch_equals_singles(rng):
    net = Network(small_config(), rng)
    walks = [rng.normal(size=(7, 3)) for _ in range(4)]
    labels = np.array([0, 2, 1, 2])

    net.zero_grad()
    total = net.classification_loss_batch(np.stack(walks, axis=1), labels)
    batch_grads = [t.grad.copy() for t in net.tensors()]

    net.zero_grad()
    singles = sum(net.classification_loss(w, l)
                  for w, l in zip(walks, labels))
    npt.assert_allclose(total, singles, rtol=1e-12)
    for got, t in zip(batch_grads, net.tensors()):
        npt.assert_allclose(got, t.grad, rtol=1e-9, atol=1e-11)


def test_segmentation_batch_equals_singles(rng):
    net = Network(small_config(4), rng)
    walks = [rng.normal(size=(6, 3)) for _ in range(3)]
    labels = rng.integers(0, 4, size=(6, 3))

    net.zero_grad()
    total = net.segmentation_loss_batch(np.stack(walks, axis=1), labels)
    batch_grads = [t.grad.copy() for t in net.tensors()]

    net.zero_grad()
    singles = sum(net.segmentation_loss(w, labels[:, i])
                  for i, w in enumerate(walks))
    npt.assert_allclose(total, singles, rtol=1e-12)
    for got, t in zip(batch_grads, net.tensors()):
        npt.assert_allclose(got, t.grad, rtol=1e-9, atol=1e-11)


def test_batch_grad_scale(rng):
    net = Network(small_config(), rng)
    x = np.stack([rng.normal(size=(5, 3)) for _ in range(2)], axis=1)
    labels = np.array([1, 0])
    net.zero_grad()
    net.classification_loss_batch(x, labels, grad_scale=1.0)
    full = [t.grad.copy() for t in net.tensors()]
    net.zero_grad()
    net.classification_loss_batch(x, labels, grad_scale=0.5)
    for f, t in zip(full, net.tensors()):
        npt.assert_allclose(0.5 * f, t.grad, atol=1e-14)


# -- end-to-end gradients -----------------------------------------------------

def test_classification_gradients_whole_network(rng):
    net = Network(small_config(), rng)
    x = rng.normal(size=(7, 3))

    def loss(backward):
        if backward:
            net.zero_grad()
            return net.classification_loss(x, 1)
        logits = net.logits(x)
        return float(cross_entropy(logits[-1], 1)[0])

    check_tensor_grads(loss, net.tensors())


def test_segmentation_gradients_whole_network(rng):
    net = Network(small_config(), rng)
    x = rng.normal(size=(6, 3))
    labels = np.array([0, 1, 2, 2, 1, 0])

    def loss(backward):
        if backward:
            net.zero_grad()
            return net.segmentation_loss(x, labels)
        logits = net.logits(x)
        rows = [cross_entropy(logits[t], labels[t])[0] for t in (3, 4, 5)]
        return float(np.mean(rows))

    check_tensor_grads(loss, net.tensors())


# -- persistence --------------------------------------------------------------

def test_save_load_round_trip(tmp_path, rng):
    net = Network(small_config(4), rng)
    x = rng.normal(size=(10, 3))
    before = net.logits(x)
    path = tmp_path / "net.ckpt"
    save_model(path, net, meta={"task": "classification"})
    back, meta = load_model(path)
    assert meta["task"] == "classification"
    assert back.config == net.config
    npt.assert_array_equal(back.logits(x), before)


def test_load_model_requires_config(tmp_path, rng):
    path = tmp_path / "no_config.ckpt"
    save_checkpoint(path, {"w": rng.normal(size=(2, 2))}, {"task": "x"})
    with pytest.raises(DataError):
        load_model(path)


def test_load_model_rejects_mismatched_shapes(tmp_path, rng):
    net = Network(small_config(), rng)
    path = tmp_path / "net.ckpt"
    save_model(path, net)
    arrays, meta = load_checkpoint(path)
    meta["config"]["gru_dims"] = [5, 5, 8]  # claims a wider final GRU
    save_checkpoint(path, arrays, meta)
    with pytest.raises(DataError):
        load_model(path)
