"""The walk classifier/segmenter network.

Architecture, applied per step of a walk feature sequence:

    dense -> instance norm -> relu -> dense -> instance norm -> relu
    -> three stacked GRUs -> dense readout to class logits

Instance-norm statistics are taken over the steps of each individual walk.
The readout produces logits at every step; task-specific losses decide which
steps contribute (classification: last step only; segmentation: the second
half of the walk).
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError
from .nn import (Dense, GRULayer, InstanceNorm, Relu, cross_entropy,
                 cross_entropy_rows, load_checkpoint, save_checkpoint,
                 softmax)


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    fc_dims: tuple = (128, 256)
    gru_dims: tuple = (1024, 1024, 512)
    feature_dim: int = 3

    @classmethod
    def tiny(cls, num_classes):
        """Small stack for quick experiments and tests."""
        return cls(num_classes=num_classes, fc_dims=(32, 64),
                   gru_dims=(128, 128, 64))

    def to_dict(self):
        d = asdict(self)
        d["fc_dims"] = list(self.fc_dims)
        d["gru_dims"] = list(self.gru_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(num_classes=int(d["num_classes"]),
                   fc_dims=tuple(d["fc_dims"]),
                   gru_dims=tuple(d["gru_dims"]),
                   feature_dim=int(d.get("feature_dim", 3)))


def second_half_start(length):
    """First 0-based step index of the trailing half of a length-n walk.

    Exactly floor(n/2) steps lie at or after this index; a length-1 walk
    has an empty second half.
    """
    return (length + 1) // 2


class Network:
    """Fixed layer stack with explicit forward/backward passes."""

    def __init__(self, config, rng):
        if len(config.fc_dims) != 2 or len(config.gru_dims) != 3:
            raise DataError("config requires 2 dense dims and 3 GRU dims")
        self.config = config
        f1, f2 = config.fc_dims
        g1, g2, g3 = config.gru_dims
        self.layers = [
            Dense(config.feature_dim, f1, rng, "fc1"),
            InstanceNorm(f1, name="norm1"),
            Relu("relu1"),
            Dense(f1, f2, rng, "fc2"),
            InstanceNorm(f2, name="norm2"),
            Relu("relu2"),
            GRULayer(f2, g1, rng, "gru1"),
            GRULayer(g1, g2, rng, "gru2"),
            GRULayer(g2, g3, rng, "gru3"),
            Dense(g3, config.num_classes, rng, "out"),
        ]

    def tensors(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_count(self):
        return sum(t.size for t in self.tensors())

    def zero_grad(self):
        for t in self.tensors():
            t.zero_grad()

    def forward(self, x):
        """x: (steps, 3) or (steps, walks, 3). Returns (logits, caches)."""
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, dlogits, caches):
        d = dlogits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            d = layer.backward(d, cache)
        return d

    def logits(self, x):
        out, _ = self.forward(x)
        return out

    def step_probabilities(self, x):
        return softmax(self.logits(x))

    # -- losses -------------------------------------------------------------

    def classification_loss(self, features, label):
        """Cross-entropy on the final step of one walk; backprops through."""
        logits, caches = self.forward(features)
        loss, dlast = cross_entropy(logits[-1], label)
        dlogits = np.zeros_like(logits)
        dlogits[-1] = dlast
        self.backward(dlogits, caches)
        return float(loss)

    def classification_loss_batch(self, features, labels, grad_scale=1.0):
        """Summed final-step cross-entropy over a (steps, walks, 3) batch.

        Gradients of the per-walk loss sum are scaled by grad_scale before
        backprop, so a caller averaging over n walks passes 1/n.
        """
        logits, caches = self.forward(features)
        walks = features.shape[1]
        mean_loss, dlast = cross_entropy_rows(logits[-1], labels)
        dlogits = np.zeros_like(logits)
        dlogits[-1] = dlast * (walks * grad_scale)
        self.backward(dlogits, caches)
        return mean_loss * walks

    def segmentation_loss(self, features, labels):
        """Mean cross-entropy over the second half of one walk's steps."""
        logits, caches = self.forward(features)
        start = second_half_start(len(features))
        loss, dtail = cross_entropy_rows(logits[start:], labels[start:])
        if start < len(features):
            dlogits = np.zeros_like(logits)
            dlogits[start:] = dtail
            self.backward(dlogits, caches)
        return loss

    def segmentation_loss_batch(self, features, labels, grad_scale=1.0):
        """Summed per-walk second-half cross-entropy for an equal-length batch.

        features: (steps, walks, 3); labels: (steps, walks) integer targets.
        Every walk shares the step count, so each contributes the mean over
        the same number of steps.
        """
        steps, walks = features.shape[0], features.shape[1]
        logits, caches = self.forward(features)
        start = second_half_start(steps)
        if start >= steps:
            return 0.0
        tail = logits[start:].reshape(-1, logits.shape[-1])
        mean_loss, dtail = cross_entropy_rows(tail, labels[start:].ravel())
        dlogits = np.zeros_like(logits)
        dlogits[start:] = dtail.reshape(steps - start, walks, -1) * (
            walks * grad_scale)
        self.backward(dlogits, caches)
        return mean_loss * walks


def save_model(path, network, meta=None):
    arrays = {t.name: t.value for t in network.tensors()}
    header = {"config": network.config.to_dict()}
    if meta:
        header.update(meta)
    save_checkpoint(path, arrays, header)


def load_model(path):
    """Rebuild a network from a checkpoint; returns (network, meta)."""
    arrays, meta = load_checkpoint(path)
    if "config" not in meta:
        raise DataError(f"{path}: checkpoint lacks a model config")
    config = ModelConfig.from_dict(meta["config"])
    net = Network(config, np.random.default_rng(0))
    tensors = {t.name: t for t in net.tensors()}
    missing = sorted(set(tensors) - set(arrays))
    extra = sorted(set(arrays) - set(tensors))
    if missing or extra:
        raise DataError(f"{path}: parameter names do not match the config "
                        f"(missing {missing}, unexpected {extra})")
    for name, tensor in tensors.items():
        value = arrays[name]
        if value.shape != tensor.value.shape:
            raise DataError(f"{path}: {name} has shape {value.shape}, "
                            f"expected {tensor.value.shape}")
        tensor.value[...] = value
    return net, meta
