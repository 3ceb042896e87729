"""Pure numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same results up to floating point summation order.
"""
import numpy as np


def _sigmoid(x):
    # split form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_seq_forward(xz, wh, h0, c0):
    """Unroll an LSTM over time.

    xz: (T, B, 4H) input projections with bias already added, gate order
    (input, forget, candidate, output). wh: (H, 4H) recurrent weights.
    Returns hidden states, cell states, gate activations and tanh(cell).
    """
    T, B, H4 = xz.shape
    H = H4 // 4
    hs = np.empty((T, B, H), dtype=xz.dtype)
    cs = np.empty((T, B, H), dtype=xz.dtype)
    tcs = np.empty((T, B, H), dtype=xz.dtype)
    acts = np.empty((T, B, H4), dtype=xz.dtype)
    h, c = h0, c0
    for t in range(T):
        z = xz[t] + h @ wh
        a = acts[t]
        a[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
        a[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        a[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
        c = a[:, H : 2 * H] * c + a[:, :H] * a[:, 2 * H : 3 * H]
        tc = np.tanh(c)
        h = a[:, 3 * H :] * tc
        hs[t], cs[t], tcs[t] = h, c, tc
    return hs, cs, acts, tcs


def lstm_seq_backward(dhs, dc_last, wh, acts, cs, tcs, c0):
    """Backpropagate through ``lstm_seq_forward``.

    dhs: (T, B, H) upstream gradient on every hidden state; dc_last: (B, H)
    upstream gradient on the final cell state. Returns the gradient on the
    pre-activations (T, B, 4H) plus gradients on h0 and c0.
    """
    T, B, H = dhs.shape
    dz = np.empty((T, B, 4 * H), dtype=dhs.dtype)
    dh_next = np.zeros((B, H), dtype=dhs.dtype)
    dc_next = dc_last.copy()
    for t in range(T - 1, -1, -1):
        a = acts[t]
        i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        c_prev = cs[t - 1] if t > 0 else c0
        dh = dhs[t] + dh_next
        tc = tcs[t]
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d = dz[t]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        d[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        d[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ wh.T
    return dz, dh_next, dc_next


def rasterize(frames, height, width, radius):
    """Splat landmarks as filled discs. frames: (N, K, 2) -> (N, H, W)."""
    frames = np.asarray(frames, dtype=np.float64)
    N, K, _ = frames.shape
    out = np.zeros((N, height, width), dtype=np.float64)
    if K == 0 or N == 0:
        return out
    pts = np.clip(frames, -1.5, 1.5)
    cx = (pts[..., 0] + 1.0) * 0.5 * width
    cy = (pts[..., 1] + 1.0) * 0.5 * height
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    r2 = radius * radius
    for n in range(N):
        dx2 = (cols[None, :] - cx[n][:, None]) ** 2  # (K, W)
        dy2 = (rows[None, :] - cy[n][:, None]) ** 2  # (K, H)
        hit = (dy2[:, :, None] + dx2[:, None, :]) <= r2
        out[n] = hit.any(axis=0)
    return out
