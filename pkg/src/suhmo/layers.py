"""Parameter initialisers and small network blocks on top of ``autodiff``.

Blocks read their weights from a dict of bound leaves keyed by hierarchical
name, so one ParamSet can hold the generator and every discriminator.
"""
import numpy as np

from . import autodiff as ad

NEG_INF = -1e9


def init_linear(params, name, din, dout, rng, gain=1.0, bias=0.0):
    limit = gain * np.sqrt(6.0 / (din + dout))
    params.add(f"{name}.w", rng.uniform(-limit, limit, size=(din, dout)))
    params.add(f"{name}.b", np.full(dout, bias))


def linear(L, name, x):
    return ad.add(ad.matmul(x, L[f"{name}.w"]), L[f"{name}.b"])


def init_mlp(params, name, sizes, rng, last_gain=1.0):
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        init_linear(params, f"{name}.{i}", a, b, rng, gain=last_gain if i == len(sizes) - 2 else 1.0)


def mlp(L, name, x, depth):
    for i in range(depth):
        x = linear(L, f"{name}.{i}", x)
        if i < depth - 1:
            x = ad.tanh(x)
    return x


def init_lstm(params, name, din, hidden, rng):
    limit = 1.0 / np.sqrt(hidden)
    params.add(f"{name}.w", rng.uniform(-limit, limit, size=(din + hidden, 4 * hidden)))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias
    params.add(f"{name}.b", b)


def batch_pool(x):
    """Elementwise max over the two halves of the batch, repeated to both.

    Row i of the first half is paired with row i of the second half.
    """
    n = x.shape[0]
    if n % 2:
        raise ad.ShapeError(f"batch-pool: batch size {n} is not even")
    p = n // 2
    m = ad.maximum(x[:p], x[p:])
    return ad.concat([m, m], axis=0)


def swap_halves(x):
    p = x.shape[0] // 2
    return ad.concat([x[p:], x[:p]], axis=0)


def init_layer_norm(params, name, d):
    params.add(f"{name}.g", np.ones(d))
    params.add(f"{name}.b", np.zeros(d))


def layer_norm(L, name, x):
    return ad.layer_norm(x, L[f"{name}.g"], L[f"{name}.b"])


def causal_mask(n_q, n_k, dtype):
    """Additive mask letting query i see keys 0..i (aligned at the end)."""
    q = np.arange(n_q)[:, None] + (n_k - n_q)
    k = np.arange(n_k)[None, :]
    return np.where(k <= q, 0.0, NEG_INF).astype(dtype)


def init_attention(params, name, d, rng):
    for part in ("q", "k", "v", "o"):
        init_linear(params, f"{name}.{part}", d, d, rng)


def attention(L, name, xq, xkv, mask=None):
    """Single-head scaled dot-product attention; no positional encoding."""
    d = xq.shape[-1]
    q = linear(L, f"{name}.q", xq)
    k = linear(L, f"{name}.k", xkv)
    v = linear(L, f"{name}.v", xkv)
    s = ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d))
    if mask is not None:
        s = ad.add(s, mask)
    a = ad.softmax(s, axis=-1)
    return linear(L, f"{name}.o", ad.matmul(a, v))


def init_block(params, name, d, rng):
    init_layer_norm(params, f"{name}.ln1", d)
    init_attention(params, f"{name}.attn", d, rng)
    init_layer_norm(params, f"{name}.ln2", d)
    init_mlp(params, f"{name}.ff", [d, 2 * d, d], rng)


def block(L, name, x, mask=None):
    """Pre-norm self-attention block followed by a feed-forward layer."""
    h = layer_norm(L, f"{name}.ln1", x)
    x = ad.add(x, attention(L, f"{name}.attn", h, h, mask))
    h = layer_norm(L, f"{name}.ln2", x)
    return ad.add(x, mlp(L, f"{name}.ff", h, 2))
