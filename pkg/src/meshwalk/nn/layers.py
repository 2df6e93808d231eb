"""Layer library with explicit reverse-mode differentiation.

Every layer follows the same contract: ``forward(x)`` returns ``(y, cache)``
and ``backward(dy, cache)`` returns ``dx`` while accumulating parameter
gradients into each ``Tensor.grad``.  There is no graph recording; the caller
owns the call order and replays it in reverse.

Array shapes are step-major: a batch of sequences is ``(T, B, C)`` with the
step axis first.  Single sequences ``(T, C)`` are accepted everywhere and
handled as a batch of one.

The module also exposes small functional helpers (``fc_forward``,
``instance_norm``, ``gru_cell``, ``gru_sequence``) that implement the same
math as the layers in the most literal way possible.  They are deliberately
slow and exist as an independent reference for the fused kernels.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend


class Tensor:
    """A trainable array paired with its gradient accumulator."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name=""):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor({self.name!r}, shape={self.value.shape})"


def glorot_uniform(rng, fan_in, fan_out, shape):
    """Uniform init on +-sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _fold(x):
    """Collapse all leading axes: (..., C) -> (N, C)."""
    return x.reshape(-1, x.shape[-1])


class Dense:
    """Affine map over the last axis: y = x @ w + b."""

    def __init__(self, in_dim, out_dim, rng, name="dense"):
        self.name = name
        self.w = Tensor(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)),
                        name + ".w")
        self.b = Tensor(np.zeros(out_dim), name + ".b")

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        return x @ self.w.value + self.b.value, (x,)

    def backward(self, dy, cache):
        (x,) = cache
        self.w.grad += _fold(x).T @ _fold(dy)
        self.b.grad += _fold(dy).sum(axis=0)
        return dy @ self.w.value.T


class InstanceNorm:
    """Normalize each sequence over its step axis, per channel.

    Statistics are taken along axis 0 independently for every sequence in
    the batch and every channel; a learnable per-channel gain/shift follows.
    A length-1 sequence has zero variance and normalizes to the shift value.
    """

    def __init__(self, dim, eps=1e-5, name="norm"):
        self.name = name
        self.eps = eps
        self.gain = Tensor(np.ones(dim), name + ".gain")
        self.shift = Tensor(np.zeros(dim), name + ".shift")

    def params(self):
        return [self.gain, self.shift]

    def forward(self, x):
        mean = x.mean(axis=0, keepdims=True)
        var = x.var(axis=0, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        y = self.gain.value * xhat + self.shift.value
        return y, (xhat, inv)

    def backward(self, dy, cache):
        xhat, inv = cache
        axes = tuple(range(dy.ndim - 1))
        self.gain.grad += (dy * xhat).sum(axis=axes)
        self.shift.grad += dy.sum(axis=axes)
        dxhat = dy * self.gain.value
        return inv * (dxhat
                      - dxhat.mean(axis=0, keepdims=True)
                      - xhat * (dxhat * xhat).mean(axis=0, keepdims=True))


class Relu:
    def __init__(self, name="relu"):
        self.name = name

    def params(self):
        return []

    def forward(self, x):
        return np.maximum(x, 0.0), (x > 0.0,)

    def backward(self, dy, cache):
        (mask,) = cache
        return dy * mask


class GRULayer:
    """Gated recurrent unit over a sequence, initial state zero.

    Step equations, with gates stacked [update | reset | candidate] inside
    the fused matrices w (in, 3h), u (h, 3h) and bias b (3h,):

        z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
        r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
        c_t = tanh(x_t W_h + (h_{t-1} U_h) * r_t + b_h)
        h_t = z_t * h_{t-1} + (1 - z_t) * c_t

    Note the candidate applies the reset gate *after* the recurrent matrix
    product, and the update gate multiplies the *previous* state.  The
    recurrence itself runs in a swappable kernel (see ``backend``).
    """

    def __init__(self, in_dim, hidden_dim, rng, name="gru"):
        self.name = name
        self.hidden_dim = hidden_dim
        self.w = Tensor(glorot_uniform(rng, in_dim, hidden_dim,
                                       (in_dim, 3 * hidden_dim)), name + ".w")
        self.u = Tensor(glorot_uniform(rng, hidden_dim, hidden_dim,
                                       (hidden_dim, 3 * hidden_dim)), name + ".u")
        self.b = Tensor(np.zeros(3 * hidden_dim), name + ".b")

    def params(self):
        return [self.w, self.u, self.b]

    def forward(self, x):
        squeeze = x.ndim == 2
        x3 = x[:, None, :] if squeeze else x
        xp = np.ascontiguousarray(x3 @ self.w.value + self.b.value)
        h0 = np.zeros((x3.shape[1], self.hidden_dim))
        h, z, r, uph, hc = backend.gru_seq_forward(xp, self.u.value, h0)
        y = h[:, 0, :] if squeeze else h
        return y, (x3, h0, h, z, r, uph, hc, squeeze)

    def backward(self, dy, cache):
        x3, h0, h, z, r, uph, hc, squeeze = cache
        dy3 = dy[:, None, :] if squeeze else dy
        dxp, du, _dh0 = backend.gru_seq_backward(
            np.ascontiguousarray(dy3), self.u.value, h0, h, z, r, uph, hc)
        self.u.grad += du
        self.w.grad += _fold(x3).T @ _fold(dxp)
        self.b.grad += _fold(dxp).sum(axis=0)
        dx3 = dxp @ self.w.value.T
        return dx3[:, 0, :] if squeeze else dx3


# ---------------------------------------------------------------------------
# Functional reference implementations (slow, for cross-checking).
# ---------------------------------------------------------------------------

def fc_forward(x, w, b):
    return x @ w + b


def instance_norm(x, gain, shift, eps=1e-5):
    mean = x.mean(axis=0, keepdims=True)
    var = x.var(axis=0, keepdims=True)
    return gain * (x - mean) / np.sqrt(var + eps) + shift


@dataclass
class GRUCellParams:
    """Unfused per-gate weights, mirroring the textbook equations."""

    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray


def split_gru_params(w, u, b):
    """Slice fused (in,3h)/(h,3h)/(3h,) weights into per-gate pieces."""
    h = u.shape[0]
    return GRUCellParams(
        w_z=w[:, :h], w_r=w[:, h:2 * h], w_h=w[:, 2 * h:],
        u_z=u[:, :h], u_r=u[:, h:2 * h], u_h=u[:, 2 * h:],
        b_z=b[:h], b_r=b[h:2 * h], b_h=b[2 * h:],
    )


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gru_cell(p, x, h_prev):
    """One recurrence step on a single vector (or batch of vectors)."""
    z = _sigmoid(x @ p.w_z + h_prev @ p.u_z + p.b_z)
    r = _sigmoid(x @ p.w_r + h_prev @ p.u_r + p.b_r)
    c = np.tanh(x @ p.w_h + (h_prev @ p.u_h) * r + p.b_h)
    return z * h_prev + (1.0 - z) * c


def gru_sequence(p, xs, h0=None):
    """Run ``gru_cell`` over a (T, in) sequence; returns (T, h) states."""
    hidden = p.u_z.shape[0]
    h = np.zeros(hidden) if h0 is None else h0
    out = np.empty((len(xs), hidden))
    for t, x in enumerate(xs):
        h = gru_cell(p, x, h)
        out[t] = h
    return out
