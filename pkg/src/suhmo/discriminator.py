"""Window-based multi-scale sequence discriminators and the frame discriminator.

One base scorer handles windows of any length. The multi-scale score of a
sequence is the Monte-Carlo mean of base scores over random windows whose
length is drawn uniformly from a scale set and whose start is uniform over
the feasible offsets.
"""
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from . import layers as nn


class WindowSpec(NamedTuple):
    start: int
    length: int


@dataclass
class DiscConfig:
    K: int = 5
    variant: str = "recurrent"  # or "attention"
    embed: int = 32
    scales: tuple = (10, 20, 40)
    n_windows: int = 4
    head_depth: int = 2
    vel_gain: float = 10.0
    acc_gain: float = 30.0
    frame_hidden: int = 32

    def __post_init__(self):
        self.scales = tuple(int(s) for s in self.scales)
        if self.variant not in ("recurrent", "attention"):
            raise ValueError(f"unknown discriminator variant {self.variant!r}")

    @property
    def in_dim(self):
        return 6 * self.K

    def to_dict(self):
        return asdict(self)


def kinematic_features(frames, vel_gain=1.0, acc_gain=1.0):
    """Differentiable positions, velocities and accelerations.

    frames: Tensor (B, T, 2K). Returns (B, T, 6K) laid out as
    [positions | velocities | accelerations] with v[0] = a[0] = a[1] = 0.
    """
    B, T, D = frames.shape
    dt = frames.dtype
    if T > 1:
        vel = ad.concat([ad.Tensor(np.zeros((B, 1, D), dt)), ad.sub(frames[:, 1:], frames[:, :-1])], axis=1)
    else:
        vel = ad.Tensor(np.zeros((B, T, D), dt))
    if T > 2:
        acc = ad.concat([ad.Tensor(np.zeros((B, 2, D), dt)), ad.sub(vel[:, 2:], vel[:, 1:-1])], axis=1)
    else:
        acc = ad.Tensor(np.zeros((B, T, D), dt))
    return ad.concat([frames, ad.scale(vel, vel_gain), ad.scale(acc, acc_gain)], axis=-1)


def features(frames, cfg):
    if not isinstance(frames, ad.Tensor):
        frames = np.asarray(frames)
        frames = ad.Tensor(frames.reshape(frames.shape[0], frames.shape[1], -1))
    return kinematic_features(frames, cfg.vel_gain, cfg.acc_gain)


# -- networks --------------------------------------------------------------


def init_sequence_net(params, name, cfg, rng):
    E = cfg.embed
    if cfg.variant == "recurrent":
        nn.init_lstm(params, f"{name}.lstm", cfg.in_dim, E, rng)
    else:
        nn.init_linear(params, f"{name}.embed", cfg.in_dim, E, rng)
        params.add(f"{name}.cls", rng.normal(0, 0.02, size=E))
        nn.init_block(params, f"{name}.block", E, rng)
    nn.init_mlp(params, f"{name}.head", [E] * cfg.head_depth + [1], rng)


def init_frame_net(params, name, cfg, rng):
    nn.init_mlp(params, name, [2 * cfg.K, cfg.frame_hidden, cfg.frame_hidden, 1], rng)


def init_discriminators(params, cfg, rng, one_sample_d=False):
    init_sequence_net(params, "ds", cfg, rng)
    init_sequence_net(params, "ds2" if one_sample_d else "dj", cfg, rng)
    init_frame_net(params, "df", cfg, rng)
    return params


def encode(L, name, cfg, window):
    """Summarize a window (B, tau, 6K) into a (B, E) vector."""
    if window.shape[1] < 1:
        raise ValueError("cannot score an empty window")
    if cfg.variant == "recurrent":
        hs = ad.lstm_seq(window, L[f"{name}.lstm.w"], L[f"{name}.lstm.b"])
        return hs[:, -1]
    B = window.shape[0]
    e = nn.linear(L, f"{name}.embed", window)
    cls = ad.add(ad.Tensor(np.zeros((B, 1, cfg.embed), window.dtype)), L[f"{name}.cls"])
    out = nn.block(L, f"{name}.block", ad.concat([cls, e], axis=1))
    return out[:, 0]


def head(L, name, cfg, z):
    s = nn.mlp(L, f"{name}.head", z, cfg.head_depth)
    return ad.reshape(s, (s.shape[0],))


def score_base(L, name, cfg, window):
    """Per-sequence scores (B,) of one window batch (B, tau, 6K)."""
    return head(L, name, cfg, encode(L, name, cfg, window))


def score_joint_base(L, name, cfg, window):
    """Per-pair scores (P,) of a window batch (2P, tau, 6K); pair members are
    encoded separately, batch-pooled, then scored once."""
    z = encode(L, name, cfg, window)
    P = z.shape[0] // 2
    return head(L, name, cfg, ad.maximum(z[:P], z[P:]))


def score_frame(L, name, frames):
    """Per-frame scores for positions (N, 2K)."""
    s = nn.mlp(L, name, frames, 3)
    return ad.reshape(s, (s.shape[0],))


# -- window sampling and the multi-scale estimator -------------------------


def feasible_scales(scales, T):
    out = [s for s in scales if 1 <= s <= T]
    if not out:
        raise ValueError(f"no feasible window scale in {tuple(scales)} for sequence length {T}")
    return out


def sample_windows(T, scales, n, rng):
    """Draw ``n`` windows: length uniform over ``scales``, start uniform over
    {0, ..., T - length}."""
    if n < 1:
        raise ValueError("need at least one window")
    bad = [s for s in scales if s > T or s < 1]
    if bad:
        raise ValueError(f"window scale(s) {bad} do not fit in a sequence of length {T}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    scales = np.asarray(scales)
    taus = scales[rng.integers(0, len(scales), size=n)]
    starts = [int(rng.integers(0, T - tau + 1)) for tau in taus]
    return [WindowSpec(s, int(tau)) for s, tau in zip(starts, taus)]


def score_windows(d_m, x, windows):
    """Mean of ``d_m`` over the given windows of x (B, T, F); returns (B,) or
    whatever ``d_m`` returns per window. Windows are summed in list order."""
    total = None
    for w in windows:
        s = d_m(x[:, w.start : w.start + w.length])
        total = s if total is None else ad.add(total, s)
    return ad.scale(total, 1.0 / len(windows))


def score_multiscale(d_m, x, scales, n, rng):
    """Monte-Carlo estimate of the expected window score; scales longer than
    the sequence are dropped."""
    windows = sample_windows(x.shape[1], feasible_scales(scales, x.shape[1]), n, rng)
    return score_windows(d_m, x, windows)


def exhaustive_window_mean(d_m, x, scales):
    """Exact expectation: uniform over scales, then uniform over starts."""
    T = x.shape[1]
    per_scale = []
    for tau in feasible_scales(scales, T):
        vals = [np.asarray(d_m(x[:, t : t + tau]).value) for t in range(T - tau + 1)]
        per_scale.append(np.mean(vals, axis=0))
    return np.mean(per_scale, axis=0)


class Discriminators:
    """Bound view over the ``ds``/``dj``/``ds2``/``df`` parameters."""

    def __init__(self, L, cfg, one_sample_d=False):
        self.L, self.cfg, self.one_sample_d = L, cfg, one_sample_d

    def marginal(self, kin, windows, name="ds"):
        return score_windows(lambda w: score_base(self.L, name, self.cfg, w), kin, windows)

    def joint(self, kin, windows):
        """Per-pair scores; with one-sample D, a second marginal network
        scores each member separately (returns (B,))."""
        if self.one_sample_d:
            return self.marginal(kin, windows, name="ds2")
        return score_windows(lambda w: score_joint_base(self.L, "dj", self.cfg, w), kin, windows)

    def frames(self, frames):
        B, T, D = frames.shape
        return score_frame(self.L, "df", ad.reshape(frames, (B * T, D)))


def score_multiscale_seq(params, cfg, frames, seed, n=None, name="ds"):
    """Marginal multi-scale score of each sequence in ``frames`` (B, T, K, 2)."""
    L = params.bind(requires_grad=False)
    kin = features(frames, cfg)
    windows = sample_windows(kin.shape[1], feasible_scales(cfg.scales, kin.shape[1]), n or cfg.n_windows, seed)
    return Discriminators(L, cfg).marginal(kin, windows, name).value


def score_joint(params, cfg, pair, seed, n=None):
    """Joint score of a SamplePair (scalar)."""
    L = params.bind(requires_grad=False)
    frames = np.stack([pair.first.frames, pair.second.frames]).astype(params.dtype)
    kin = features(frames, cfg)
    windows = sample_windows(kin.shape[1], feasible_scales(cfg.scales, kin.shape[1]), n or cfg.n_windows, seed)
    return float(Discriminators(L, cfg).joint(kin, windows).value[0])
