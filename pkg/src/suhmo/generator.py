"""Autoregressive velocity generator producing pairs of sequences together.

The batch always holds pairs: row i of the first half is paired with row i
of the second half. Two variants share the rollout driver:

* recurrent: an LSTM whose hidden state is batch-pooled (max over the pair)
  and fed back next to the following input;
* attention: the embedded history of each member attends to the history of
  its partner (batch-cross attention), then one causal self-attention block.

Neither uses positional encodings, so rollouts can run past the training
length.
"""
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import layers as nn


@dataclass
class GenConfig:
    K: int = 5
    variant: str = "recurrent"  # or "attention"
    hidden: int = 64
    embed: int = 64
    head_depth: int = 2
    mode: str = "standard"  # or "delta"
    pair_mixing: bool = True
    vel_gain: float = 10.0
    out_gain: float = 0.1

    def __post_init__(self):
        if self.hidden <= 0 or self.embed <= 0:
            raise ValueError("hidden and embedding sizes must be positive")
        if self.variant not in ("recurrent", "attention"):
            raise ValueError(f"unknown generator variant {self.variant!r}")
        if self.mode not in ("standard", "delta"):
            raise ValueError(f"unknown generator mode {self.mode!r}")

    @property
    def in_dim(self):
        return 4 * self.K

    def to_dict(self):
        return asdict(self)


def init_generator(params, cfg, rng):
    d_in, d_out = cfg.in_dim, 2 * cfg.K
    if cfg.variant == "recurrent":
        H = cfg.hidden
        nn.init_lstm(params, "gen.lstm", d_in + H, H, rng)
        nn.init_mlp(params, "gen.head", [H] * cfg.head_depth + [d_out], rng, last_gain=cfg.out_gain)
    else:
        E = cfg.embed
        nn.init_linear(params, "gen.embed", d_in, E, rng)
        nn.init_layer_norm(params, "gen.cross_ln", E)
        nn.init_attention(params, "gen.cross", E, rng)
        nn.init_block(params, "gen.block", E, rng)
        nn.init_mlp(params, "gen.head", [E] * cfg.head_depth + [d_out], rng, last_gain=cfg.out_gain)
    return params


def batch_pool(x):
    return nn.batch_pool(x)


class RecurrentStepper:
    """State is (h, c, p): hidden, cell and pooled vectors, each (B, H)."""

    def __init__(self, L, cfg):
        self.L, self.cfg = L, cfg

    def start(self, batch, dtype):
        z = ad.Tensor(np.zeros((batch, self.cfg.hidden), dtype))
        return (z, z, z)

    def advance(self, state, inp):
        h, c, p = state
        H = self.cfg.hidden
        hc = ad.lstm_cell(ad.concat([inp, p], axis=1), h, c, self.L["gen.lstm.w"], self.L["gen.lstm.b"])
        h, c = hc[:, :H], hc[:, H:]
        p = nn.batch_pool(h) if self.cfg.pair_mixing else h
        return (h, c, p)

    def readout(self, state):
        return nn.mlp(self.L, "gen.head", state[0], self.cfg.head_depth)


class AttentionStepper:
    """Causal attention with a key/value cache.

    Without positional encodings, the representation of frame i only depends
    on frames 0..i, so caching per-frame keys and values gives exactly the
    outputs of a full causal recomputation (see ``encode_history``).
    """

    def __init__(self, L, cfg):
        self.L, self.cfg = L, cfg

    def start(self, batch, dtype):
        return {"kc": [], "vc": [], "ks": [], "vs": [], "out": None}

    def _attend(self, name, q, keys, values):
        L = self.L
        d = q.shape[-1]
        k = ad.stack(keys, axis=1)  # (B, t, E)
        v = ad.stack(values, axis=1)
        qq = ad.reshape(nn.linear(L, f"{name}.q", q), (q.shape[0], 1, d))
        s = ad.scale(ad.matmul(qq, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d))
        a = ad.matmul(ad.softmax(s, axis=-1), v)
        return nn.linear(L, f"{name}.o", ad.reshape(a, (q.shape[0], d)))

    def advance(self, state, inp):
        L = self.L
        state = {k: (list(v) if isinstance(v, list) else v) for k, v in state.items()}
        e = nn.linear(L, "gen.embed", inp)
        h = nn.layer_norm(L, "gen.cross_ln", e)
        kv = nn.swap_halves(h) if self.cfg.pair_mixing else h
        state["kc"].append(nn.linear(L, "gen.cross.k", kv))
        state["vc"].append(nn.linear(L, "gen.cross.v", kv))
        c = ad.add(e, self._attend("gen.cross", h, state["kc"], state["vc"]))
        h = nn.layer_norm(L, "gen.block.ln1", c)
        state["ks"].append(nn.linear(L, "gen.block.attn.k", h))
        state["vs"].append(nn.linear(L, "gen.block.attn.v", h))
        x = ad.add(c, self._attend("gen.block.attn", h, state["ks"], state["vs"]))
        h = nn.layer_norm(L, "gen.block.ln2", x)
        state["out"] = ad.add(x, nn.mlp(L, "gen.block.ff", h, 2))
        return state

    def readout(self, state):
        return nn.mlp(self.L, "gen.head", state["out"], self.cfg.head_depth)


def encode_history(L, cfg, hist):
    """Full causal recomputation over per-frame inputs (B, t, 4K) -> (B, t, E)."""
    t = hist.shape[1]
    mask = nn.causal_mask(t, t, hist.dtype)
    e = nn.linear(L, "gen.embed", hist)
    h = nn.layer_norm(L, "gen.cross_ln", e)
    kv = nn.swap_halves(h) if cfg.pair_mixing else h
    c = ad.add(e, nn.attention(L, "gen.cross", h, kv, mask))
    return nn.block(L, "gen.block", c, mask)


def make_stepper(L, cfg):
    return RecurrentStepper(L, cfg) if cfg.variant == "recurrent" else AttentionStepper(L, cfg)


def step_recurrent(L, cfg, state, inputs):
    """One recurrent step: returns the new state and the (B, 2K) velocities."""
    st = RecurrentStepper(L, cfg)
    state = st.advance(state, inputs)
    return state, ad.scale(st.readout(state), 1.0 / cfg.vel_gain)


def step_attention(L, cfg, history):
    """Velocities (B, 2K) for the next frame given per-frame inputs (B, t, 4K)."""
    s = encode_history(L, cfg, history)
    return ad.scale(nn.mlp(L, "gen.head", s[:, -1], cfg.head_depth), 1.0 / cfg.vel_gain)


def rollout(stepper, cfg, prefix, T_out):
    """Autoregressive generation.

    prefix: (B, n_obs, K, 2) observed frames (array), B even, n_obs >= 1.
    Returns (frames, velocities): frames is a Tensor (B, T_out, 2K) and
    velocities the list of emitted velocity tensors for t >= n_obs.
    Standard mode: x_t = x_{t-1} + v_t. Delta mode: x_t = x_0 + out_t.
    """
    prefix = np.asarray(prefix)
    B, n_obs, K, _ = prefix.shape
    if n_obs < 1:
        raise ValueError("rollout needs at least one observed frame")
    if T_out < n_obs:
        raise ValueError(f"output length {T_out} is shorter than the observed prefix ({n_obs})")
    dt = prefix.dtype
    flat = prefix.reshape(B, n_obs, 2 * K)
    frames = [ad.Tensor(flat[:, 0].copy())]
    vel = ad.Tensor(np.zeros((B, 2 * K), dt))
    emitted = []
    state = stepper.start(B, dt)
    inv_gain = 1.0 / cfg.vel_gain
    for t in range(1, T_out):
        inp = ad.concat([frames[-1], ad.scale(vel, cfg.vel_gain)], axis=1)
        state = stepper.advance(state, inp)
        if t < n_obs:
            frame = ad.Tensor(flat[:, t].copy())
            vel = ad.Tensor(flat[:, t] - flat[:, t - 1])
        else:
            out = ad.scale(stepper.readout(state), inv_gain)
            if cfg.mode == "delta":
                frame = ad.add(frames[0], out)
                vel = ad.sub(frame, frames[-1])
            else:
                frame = ad.add(frames[-1], out)
                vel = out
            emitted.append(out)
        frames.append(frame)
    return ad.stack(frames, axis=1), emitted


def generate(params, cfg, first, second, T_out, prefix_len=1):
    """Generate pairs without building a gradient graph.

    first, second: (P, n, K, 2) or (P, K, 2) arrays of observed frames for
    each pair member. Returns two (P, T_out, K, 2) arrays.
    """
    first, second = np.asarray(first), np.asarray(second)
    if first.ndim == 3:
        first, second = first[:, None], second[:, None]
    first, second = first[:, :prefix_len], second[:, :prefix_len]
    P, _, K, _ = first.shape
    L = params.bind(requires_grad=False, prefix="gen.")
    prefix = np.concatenate([first, second], axis=0).astype(params.dtype)
    frames, _ = rollout(make_stepper(L, cfg), cfg, prefix, T_out)
    out = frames.value.reshape(2 * P, T_out, K, 2)
    return out[:P], out[P:]
