"""Evaluation: rasterization, motion maps and Frechet distances over frozen
random-feature extractors (FID / FVD / t-FID analogs), plus diversity."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import data
from . import kernels

CANVAS = 64
RADIUS = 1.0
ALPHA = 0.15
FEATURE_DIM = 64
EXTRACTOR_SEED = 1234


class MetricError(ValueError):
    pass


# -- images ----------------------------------------------------------------


def rasterize(frames, height=CANVAS, width=CANVAS, radius=RADIUS):
    """Binary images of landmark discs; (K, 2) -> (H, W), (T, K, 2) -> (T, H, W)."""
    return kernels.rasterize(np.asarray(frames, dtype=np.float64), height, width, radius)


def ema_weights(T, alpha):
    if not 0 < alpha <= 1:
        raise MetricError(f"alpha must be in (0, 1], got {alpha}")
    return (1.0 - alpha) ** np.arange(T - 1, -1, -1, dtype=np.float64)


def motion_map(frames, alpha=ALPHA, height=CANVAS, width=CANVAS, radius=RADIUS):
    """Exponential moving average of rasterized frames, ending on the last
    frame: weights (1 - alpha)^(T - t), normalized to sum to one."""
    frames = frames.frames if isinstance(frames, data.MotionSequence) else np.asarray(frames)
    w = ema_weights(frames.shape[0], alpha)
    imgs = rasterize(frames, height, width, radius)
    return np.tensordot(w / w.sum(), imgs, axes=1)


def write_pgm(path, image):
    img = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    parts = buf.split(maxsplit=4)
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w) / 255.0


# -- feature extractors ----------------------------------------------------


class FrameExtractor:
    """Frozen random network on 64x64 images: 4x4 average pooling, a tanh
    layer and a linear projection to ``dim`` features."""

    def __init__(self, seed=EXTRACTOR_SEED, dim=FEATURE_DIM, canvas=CANVAS, pool=4, hidden=256):
        rng = np.random.default_rng([seed, 1])
        self.seed, self.dim, self.canvas, self.pool = seed, dim, canvas, pool
        n_in = (canvas // pool) ** 2
        self.w1 = rng.normal(0, 4.0 / np.sqrt(n_in), size=(n_in, hidden))
        self.b1 = rng.normal(0, 0.1, size=hidden)
        self.w2 = rng.normal(0, 1.0 / np.sqrt(hidden), size=(hidden, dim))
        for a in (self.w1, self.b1, self.w2):
            a.setflags(write=False)

    def __call__(self, images):
        images = np.asarray(images, dtype=np.float64)
        n, p = images.shape[0], self.pool
        c = self.canvas // p
        pooled = images.reshape(n, c, p, c, p).mean(axis=(2, 4)).reshape(n, -1)
        return np.tanh(pooled @ self.w1 + self.b1) @ self.w2


class SequenceExtractor:
    """Frozen random LSTM over kinematic windows; features are the final
    hidden state next to the time-averaged hidden state.

    Small input gains keep the LSTM close to its linear regime, which
    separates static from moving populations far better than saturated
    features do. ``out_scale`` only rescales the reported distances.
    """

    def __init__(self, seed=EXTRACTOR_SEED, dim=FEATURE_DIM, pos_gain=0.1, vel_gain=3.0, acc_gain=10.0,
                 out_scale=10.0):
        self.seed, self.dim = seed, dim
        self.gains = (pos_gain, vel_gain, acc_gain)
        self.out_scale = out_scale
        self._weights = {}

    def weights(self, K):
        if K not in self._weights:
            rng = np.random.default_rng([self.seed, 2, K])
            H = self.dim // 2
            d_in = 6 * K
            wx = rng.normal(0, 2.0 / np.sqrt(d_in), size=(d_in, 4 * H))
            wh = rng.normal(0, 1.0 / np.sqrt(H), size=(H, 4 * H))
            b = rng.normal(0, 0.1, size=4 * H)
            for a in (wx, wh, b):
                a.setflags(write=False)
            self._weights[K] = (wx, wh, b)
        return self._weights[K]

    def __call__(self, windows):
        """windows: (N, L, K, 2) -> (N, dim)."""
        windows = np.asarray(windows, dtype=np.float64)
        N, L, K, _ = windows.shape
        kin = data.kinematics(windows)  # (N, L, K, 6)
        pos, vel, acc = kin[..., :2], kin[..., 2:4], kin[..., 4:]
        g0, g1, g2 = self.gains
        x = np.concatenate(
            [g0 * pos.reshape(N, L, -1), g1 * vel.reshape(N, L, -1), g2 * acc.reshape(N, L, -1)], axis=-1
        )
        wx, wh, b = self.weights(K)
        H = wh.shape[0]
        xz = np.ascontiguousarray((x.reshape(N * L, -1) @ wx + b).reshape(N, L, 4 * H).transpose(1, 0, 2))
        hs, _, _, _ = kernels.lstm_seq_forward(xz, wh, np.zeros((N, H)), np.zeros((N, H)))
        return self.out_scale * np.concatenate([hs[-1], hs.mean(axis=0)], axis=1)


def extract(extractor, items, threads=1, chunk=64):
    """Apply ``extractor`` to ``items`` in index-ordered chunks, optionally on
    a thread pool; the result does not depend on the thread count."""
    items = np.asarray(items)
    chunks = [items[i : i + chunk] for i in range(0, len(items), chunk)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(extractor, chunks))
    else:
        parts = [extractor(c) for c in chunks]
    return np.concatenate(parts, axis=0)


# -- Gaussian statistics and the Frechet distance --------------------------


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int


def feature_stats(feats, reg=1e-6):
    """Sample mean and unbiased covariance (+ reg * I).

    Rows are sorted first so the result is independent of item order.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise MetricError(f"need at least 2 feature vectors, got shape {feats.shape}")
    feats = feats[np.lexsort(feats.T[::-1])]
    mu = feats.mean(axis=0)
    xc = feats - mu
    cov = xc.T @ xc / (feats.shape[0] - 1)
    cov = 0.5 * (cov + cov.T) + reg * np.eye(feats.shape[1])
    return GaussianStats(mu, cov, feats.shape[0])


def sqrtm_psd(m, tol=1e-6):
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below -tol are rejected; the rest are clamped at zero.
    """
    m = 0.5 * (m + m.T)
    lam, vec = np.linalg.eigh(m)
    if lam.min(initial=0.0) < -tol:
        raise MetricError(f"matrix is indefinite (eigenvalue {lam.min():.3g})")
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.T


def frechet(a, b):
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)."""
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise MetricError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    ra = sqrtm_psd(a.cov)
    m = ra @ b.cov @ ra
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))
    if lam.min(initial=0.0) < -1e-6:
        raise MetricError(f"product covariance is indefinite (eigenvalue {lam.min():.3g})")
    tr_sqrt = np.sqrt(np.clip(lam, 0.0, None)).sum()
    diff = a.mean - b.mean
    val = diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt
    return float(max(val, 0.0))


# -- population metrics ----------------------------------------------------


def _frames_array(seqs):
    if isinstance(seqs, np.ndarray):
        return seqs
    return np.stack([s.frames if isinstance(s, data.MotionSequence) else np.asarray(s) for s in seqs])


def windows_of(seqs, length):
    """All windows of ``length`` frames with stride length // 2."""
    x = _frames_array(seqs)
    T = x.shape[1]
    if T < length:
        raise MetricError(f"sequence length {T} is shorter than the window length {length}")
    stride = max(1, length // 2)
    starts = range(0, T - length + 1, stride)
    return np.concatenate([x[:, s : s + length] for s in starts], axis=0)


def fvd_like(real, fake, length, extractor=None, threads=1):
    ex = extractor or SequenceExtractor()
    fr = extract(ex, windows_of(real, length), threads)
    ff = extract(ex, windows_of(fake, length), threads)
    return frechet(feature_stats(fr), feature_stats(ff))


def motion_maps(seqs, alpha=ALPHA):
    return np.stack([motion_map(s, alpha) for s in _frames_array(seqs)])


def tfid(real, fake, alpha=ALPHA, extractor=None, threads=1):
    ex = extractor or FrameExtractor()
    fr = extract(ex, motion_maps(real, alpha), threads)
    ff = extract(ex, motion_maps(fake, alpha), threads)
    return frechet(feature_stats(fr), feature_stats(ff))


def fid(real, fake, extractor=None, threads=1):
    ex = extractor or FrameExtractor()
    r, f = _frames_array(real), _frames_array(fake)
    fr = extract(ex, rasterize(r.reshape(-1, *r.shape[2:])), threads)
    ff = extract(ex, rasterize(f.reshape(-1, *f.shape[2:])), threads)
    return frechet(feature_stats(fr), feature_stats(ff))


def mean_pairwise_distance(seqs):
    x = _frames_array(seqs).reshape(len(seqs), -1).astype(np.float64)
    n = len(x)
    if n < 2:
        raise MetricError("diversity needs at least 2 draws")
    d = [np.linalg.norm(x[i] - x[j]) for i in range(n) for j in range(i + 1, n)]
    return float(np.mean(d))


def mean_displacement(seqs):
    """Mean per-frame landmark displacement magnitude."""
    x = _frames_array(seqs).astype(np.float64)
    return float(np.linalg.norm(np.diff(x, axis=1), axis=-1).mean())


def diversity(sample_fn, reference, n, n_modes=None, seed=0):
    """Mean pairwise L2 distance between ``n`` draws from one reference pose.

    ``sample_fn(reference, draw_seed)`` returns a (T, K, 2) sequence. Mode
    coverage uses the frequency oracle when ``n_modes`` is given.
    """
    if n < 2:
        raise MetricError("diversity needs n >= 2")
    draws = np.stack([sample_fn(reference, [seed, i]) for i in range(n)])
    div = mean_pairwise_distance(draws)
    coverage = None
    if n_modes is not None:
        coverage = int(len(np.unique(data.classify_mode(draws, n_modes))))
    return div, coverage, draws


def report_entry(name, value, n_real, n_fake, window=None, alpha=None, seed=EXTRACTOR_SEED):
    return {
        "metric": name,
        "window_length": window,
        "alpha": alpha,
        "value": value,
        "n_real": n_real,
        "n_fake": n_fake,
        "extractor_seed": seed,
    }
