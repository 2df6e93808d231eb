"""Pure-numpy recurrence kernel; fallback for the compiled extension.

Both kernels share one contract. Inputs are C-contiguous float64:

  xp : (T, B, 3H)  input projections x @ W + b, gate order [update|reset|cand]
  u  : (H, 3H)     hidden-to-hidden weights, same gate order
  h0 : (B, H)      initial hidden state

forward returns (h, z, r, uph, hc) where h is the full hidden sequence and
z/r/uph/hc are the per-step gate activations and the pre-gate hidden
projection of the candidate, all (T, B, H) and required by backward.

The candidate uses the hidden projection gated after the matrix product:
hc = tanh(xp_cand + (h_prev @ U_cand) * r).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_seq_forward(xp: np.ndarray, u: np.ndarray, h0: np.ndarray):
    t_steps, batch, h3 = xp.shape
    hidden = h3 // 3
    h = np.empty((t_steps, batch, hidden))
    z = np.empty_like(h)
    r = np.empty_like(h)
    uph = np.empty_like(h)
    hc = np.empty_like(h)
    h_prev = h0
    for t in range(t_steps):
        up = h_prev @ u
        z[t] = _sigmoid(xp[t, :, :hidden] + up[:, :hidden])
        r[t] = _sigmoid(xp[t, :, hidden : 2 * hidden] + up[:, hidden : 2 * hidden])
        uph[t] = up[:, 2 * hidden :]
        hc[t] = np.tanh(xp[t, :, 2 * hidden :] + uph[t] * r[t])
        h[t] = z[t] * h_prev + (1.0 - z[t]) * hc[t]
        h_prev = h[t]
    return h, z, r, uph, hc


def gru_seq_backward(dh_out, u, h0, h, z, r, uph, hc):
    t_steps, batch, hidden = h.shape
    dxp = np.empty((t_steps, batch, 3 * hidden))
    du = np.zeros_like(u)
    dh = np.zeros((batch, hidden))
    dup = np.empty((batch, 3 * hidden))
    for t in range(t_steps - 1, -1, -1):
        dh = dh + dh_out[t]
        h_prev = h[t - 1] if t > 0 else h0
        dz = dh * (h_prev - hc[t])
        dpre_h = dh * (1.0 - z[t]) * (1.0 - hc[t] * hc[t])
        dr = dpre_h * uph[t]
        dup[:, :hidden] = dz * z[t] * (1.0 - z[t])
        dup[:, hidden : 2 * hidden] = dr * r[t] * (1.0 - r[t])
        dup[:, 2 * hidden :] = dpre_h * r[t]
        dxp[t, :, : 2 * hidden] = dup[:, : 2 * hidden]
        dxp[t, :, 2 * hidden :] = dpre_h
        du += h_prev.T @ dup
        dh = dh * z[t] + dup @ u.T
    return dxp, du, dh
