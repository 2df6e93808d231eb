"""Softmax cross-entropy, numerically stable, with analytic gradients."""

import numpy as np


def softmax(logits, axis=-1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits, label):
    """Loss and gradient for a single logit vector and integer label.

    Computed as logsumexp(logits) - logits[label]; the gradient is
    softmax(logits) minus the one-hot target.
    """
    shifted = logits - logits.max()
    logz = np.log(np.exp(shifted).sum())
    loss = logz - shifted[label]
    grad = softmax(logits)
    grad[label] -= 1.0
    return loss, grad


def cross_entropy_rows(logits, labels):
    """Mean cross-entropy over rows: logits (n, c), labels (n,).

    Returns (loss, dlogits) with dlogits already scaled by 1/n so it is the
    gradient of the mean.  An empty batch yields loss 0 and a zero gradient.
    """
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float((logz - shifted[rows, labels]).mean())
    grad = softmax(logits)
    grad[rows, labels] -= 1.0
    return loss, grad / n
