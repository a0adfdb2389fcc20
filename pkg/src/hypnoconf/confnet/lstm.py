"""Sequence LSTM layer with exact full-sequence backprop.

Weights for a layer with input width d and hidden width h are a single
matrix W of shape (4h, d + h) plus one bias vector b of length 4h; the four
gate blocks are stacked in the order input, forget, cell, output.  States
start at zero.  The cell recurrence is

    z_t = W @ [x_t ; h_{t-1}] + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * act(c_t)

where act is tanh for hidden layers and (tanh(c) + 1) / 2 for the output
layer, which pins h_t into (0, 1).

The input projection for all steps is one batched matmul; only the
recurrent part runs step by step, as numba-compiled scalar loops (the
sequences are long and the layers narrow, so Python-level per-step work
would dominate otherwise).  The backward pass replays the recurrence in
reverse collecting per-step gate deltas, then forms the weight gradients
with two batched matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass
class LSTMWeights:
    W: np.ndarray  # (4h, d + h) float64
    b: np.ndarray  # (4h,) float64

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_dim(self) -> int:
        return self.W.shape[1] - self.hidden_dim

    @property
    def n_params(self) -> int:
        return self.W.size + self.b.size


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LSTMWeights:
    """Glorot-uniform weights, zero biases except forget-gate bias = 1."""
    fan_in = input_dim + hidden_dim
    fan_out = 4 * hidden_dim
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
    b = np.zeros(fan_out)
    b[hidden_dim : 2 * hidden_dim] = 1.0
    return LSTMWeights(W=W, b=b)


@njit(cache=True)
def _recur_forward(zx, Wh, gates, cells, acts, hs, output_activation):
    T = zx.shape[0]
    H = hs.shape[1]
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        z = np.dot(Wh, h_prev) + zx[t]
        for j in range(H):
            gi = 1.0 / (1.0 + np.exp(-z[j]))
            gf = 1.0 / (1.0 + np.exp(-z[H + j]))
            gc = np.tanh(z[2 * H + j])
            go = 1.0 / (1.0 + np.exp(-z[3 * H + j]))
            c = gf * c_prev[j] + gi * gc
            tc = np.tanh(c)
            a = 0.5 * (tc + 1.0) if output_activation else tc
            gates[t, j] = gi
            gates[t, H + j] = gf
            gates[t, 2 * H + j] = gc
            gates[t, 3 * H + j] = go
            cells[t, j] = c
            acts[t, j] = a
            hs[t, j] = go * a
        for j in range(H):
            h_prev[j] = hs[t, j]
            c_prev[j] = cells[t, j]


@njit(cache=True)
def _recur_backward(Wh, gates, cells, acts, dh_seq, dz_all, output_activation):
    T = dz_all.shape[0]
    H = dh_seq.shape[1]
    dh_rec = np.zeros(H)
    dc_rec = np.zeros(H)
    for t in range(T - 1, -1, -1):
        for j in range(H):
            gi = gates[t, j]
            gf = gates[t, H + j]
            gc = gates[t, 2 * H + j]
            go = gates[t, 3 * H + j]
            a = acts[t, j]
            dh = dh_seq[t, j] + dh_rec[j]
            do = dh * a
            # d(act)/dc: tanh' = 1 - tanh^2; the (tanh + 1)/2 variant halves it.
            tc = 2.0 * a - 1.0 if output_activation else a
            dact = 1.0 - tc * tc
            if output_activation:
                dact = 0.5 * dact
            dc = dh * go * dact + dc_rec[j]
            c_prev = cells[t - 1, j] if t > 0 else 0.0
            di = dc * gc
            df = dc * c_prev
            dg = dc * gi
            dc_rec[j] = dc * gf
            dz_all[t, j] = di * gi * (1.0 - gi)
            dz_all[t, H + j] = df * gf * (1.0 - gf)
            dz_all[t, 2 * H + j] = dg * (1.0 - gc * gc)
            dz_all[t, 3 * H + j] = do * go * (1.0 - go)
        for j in range(H):
            acc = 0.0
            for k in range(4 * H):
                acc += Wh[k, j] * dz_all[t, k]
            dh_rec[j] = acc


def lstm_forward(wts: LSTMWeights, x: np.ndarray, output_activation: bool = False):
    """Run the full sequence; returns (h_seq, cache) with h_seq shape (T, h)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    T = x.shape[0]
    h = wts.hidden_dim
    d = wts.input_dim
    if x.shape[1] != d:
        raise ValueError(f"input width {x.shape[1]} != expected {d}")
    zx = x @ wts.W[:, :d].T + wts.b
    Wh = np.ascontiguousarray(wts.W[:, d:])
    gates = np.empty((T, 4 * h))
    cells = np.empty((T, h))
    acts = np.empty((T, h))
    hs = np.empty((T, h))
    _recur_forward(zx, Wh, gates, cells, acts, hs, output_activation)
    cache = (x, gates, cells, acts, hs, output_activation)
    return hs, cache


def lstm_backward(wts: LSTMWeights, cache, dh_seq: np.ndarray):
    """Gradients for the full sequence: returns (dx, dW, db)."""
    x, gates, cells, acts, hs, output_activation = cache
    T = x.shape[0]
    h = wts.hidden_dim
    d = wts.input_dim
    Wh = np.ascontiguousarray(wts.W[:, d:])
    dz_all = np.empty((T, 4 * h))
    dh_seq = np.ascontiguousarray(dh_seq, dtype=np.float64)
    _recur_backward(Wh, gates, cells, acts, dh_seq, dz_all, output_activation)

    h_prev_seq = np.vstack([np.zeros((1, h)), hs[:-1]])
    dW = np.empty_like(wts.W)
    dW[:, :d] = dz_all.T @ x
    dW[:, d:] = dz_all.T @ h_prev_seq
    db = dz_all.sum(axis=0)
    dx = dz_all @ wts.W[:, :d]
    return dx, dW, db


def bilstm_forward(fwd: LSTMWeights, bwd: LSTMWeights, x: np.ndarray):
    """Bidirectional layer: forward pass over x, backward pass over reversed
    x, outputs concatenated as [forward | backward], shape (T, 2h)."""
    h_f, cache_f = lstm_forward(fwd, x)
    h_b_rev, cache_b = lstm_forward(bwd, x[::-1])
    out = np.concatenate([h_f, h_b_rev[::-1]], axis=1)
    return out, (cache_f, cache_b)


def bilstm_backward(fwd: LSTMWeights, bwd: LSTMWeights, cache, dh_seq: np.ndarray):
    cache_f, cache_b = cache
    h = fwd.hidden_dim
    dx_f, dW_f, db_f = lstm_backward(fwd, cache_f, dh_seq[:, :h])
    dx_b, dW_b, db_b = lstm_backward(bwd, cache_b, dh_seq[:, h:][::-1])
    dx = dx_f + dx_b[::-1]
    return dx, (dW_f, db_f), (dW_b, db_b)
