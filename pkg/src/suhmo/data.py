"""Landmark sequences: containers, .lmk I/O, kinematics, augmentation,
pairing and a synthetic multi-modal motion generator."""
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

LMK_MAGIC = b"LMK1"
DEFAULT_FPS = 25.0


class LandmarkFormatError(ValueError):
    pass


@dataclass
class MotionSequence:
    frames: np.ndarray  # (T, K, 2)
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.shape[-1] != 2:
            raise ValueError(f"frames must be (T, K, 2), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ValueError("a motion sequence needs at least one frame")

    @property
    def T(self):
        return self.frames.shape[0]

    @property
    def K(self):
        return self.frames.shape[1]


@dataclass
class SamplePair:
    first: MotionSequence
    second: MotionSequence

    def __post_init__(self):
        if self.first.frames.shape != self.second.frames.shape:
            raise ValueError(
                f"pair members must share T and K: {self.first.frames.shape} vs {self.second.frames.shape}"
            )

    def swapped(self):
        return SamplePair(self.second, self.first)


def validate_frame(frame, limit=1.5):
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.shape[1] != 2:
        raise ValueError(f"landmark frame must be (K, 2), got {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise ValueError("landmark frame has non-finite coordinates")
    if limit is not None and np.abs(frame).max(initial=0.0) > limit:
        raise ValueError(f"landmark coordinate outside [-{limit}, {limit}]")
    return frame


# -- .lmk files ------------------------------------------------------------


def encode_sequence(seq):
    frames = np.ascontiguousarray(seq.frames, dtype="<f4")
    T, K, _ = frames.shape
    return LMK_MAGIC + struct.pack("<IIf", T, K, seq.fps) + frames.tobytes()


def save_sequence(path, seq):
    with open(path, "wb") as fh:
        fh.write(encode_sequence(seq))


def decode_sequence(buf, check_range=False):
    if len(buf) < 16 or buf[:4] != LMK_MAGIC:
        raise LandmarkFormatError(f"bad magic {bytes(buf[:4])!r}, expected {LMK_MAGIC!r}")
    T, K, fps = struct.unpack("<IIf", buf[4:16])
    expected = T * K * 2 * 4
    actual = len(buf) - 16
    if actual != expected:
        raise LandmarkFormatError(
            f"truncated payload: expected {expected} bytes for T={T}, K={K}, got {actual}"
        )
    frames = np.frombuffer(buf[16:], dtype="<f4").reshape(T, K, 2).astype(np.float32)
    if not np.all(np.isfinite(frames)):
        raise LandmarkFormatError("non-finite landmark coordinates")
    if check_range and frames.size and np.abs(frames).max() > 1.5:
        raise LandmarkFormatError("landmark coordinates outside [-1.5, 1.5]")
    return MotionSequence(frames, float(fps))


def load_sequence(path, check_range=False):
    with open(path, "rb") as fh:
        return decode_sequence(fh.read(), check_range=check_range)


def normalize_canvas(frames, width, height):
    """Map pixel coordinates to [-1, 1] and center the landmark centroid."""
    frames = np.asarray(frames, dtype=np.float64)
    scale = 2.0 / max(width, height)
    out = frames * scale
    return (out - out.reshape(-1, 2).mean(axis=0)).astype(np.float32)


# -- dataset manifest ------------------------------------------------------


def write_dataset(directory, sequences, labels=None, val_fraction=0.25, seed=0):
    """Write .lmk files and ``manifest.json``; returns the manifest entries."""
    os.makedirs(directory, exist_ok=True)
    n = len(sequences)
    order = np.random.default_rng([seed, 0xDA7A]).permutation(n)
    n_val = int(round(val_fraction * n))
    val = set(order[:n_val].tolist())
    entries = []
    for i, seq in enumerate(sequences):
        name = f"seq_{i:05d}.lmk"
        save_sequence(os.path.join(directory, name), seq)
        entry = {"path": name, "split": "val" if i in val else "train"}
        if labels is not None:
            entry["mode_label"] = int(labels[i])
        entries.append(entry)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(entries, fh, indent=1)
    return entries


def read_manifest(path):
    """Load a manifest; returns {split: (sequences, labels)}."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        entries = json.load(fh)
    out = {}
    for e in entries:
        seq = load_sequence(os.path.join(base, e["path"]), check_range=True)
        seqs, labels = out.setdefault(e.get("split", "train"), ([], []))
        seqs.append(seq)
        labels.append(e.get("mode_label", -1))
    return {k: (v[0], np.asarray(v[1])) for k, v in out.items()}


# -- kinematics ------------------------------------------------------------


def kinematics(frames):
    """Positions, velocities, accelerations concatenated on the last axis.

    Works on (T, K, 2) or batched (..., T, K, 2) arrays and returns
    (..., T, K, 6). velocity[0] = 0 and acceleration[0] = acceleration[1] = 0.
    """
    x = frames.frames if isinstance(frames, MotionSequence) else np.asarray(frames)
    vel = np.zeros_like(x)
    vel[..., 1:, :, :] = x[..., 1:, :, :] - x[..., :-1, :, :]
    acc = np.zeros_like(x)
    acc[..., 2:, :, :] = vel[..., 2:, :, :] - vel[..., 1:-1, :, :]
    return np.concatenate([x, vel, acc], axis=-1)


# -- reference-pose augmentation -------------------------------------------


def transform_reference(frame, flip, scale, shift):
    """Horizontal flip about the canvas center, then scale about the landmark
    centroid, then translate."""
    out = np.array(frame, dtype=np.float64)
    if flip:
        out[:, 0] = -out[:, 0]
    c = out.mean(axis=0)
    out = c + scale * (out - c) + np.asarray(shift, dtype=np.float64)
    return out.astype(np.asarray(frame).dtype)


def sample_reference_transform(seed):
    rng = np.random.default_rng(seed)
    flip = bool(rng.random() < 0.5)
    scale = float(rng.uniform(0.9, 1.1))
    shift = rng.uniform(-0.1, 0.1, size=2)
    return flip, scale, shift


def augment_reference(frame, seed):
    validate_frame(frame)
    return transform_reference(frame, *sample_reference_transform(seed))


# -- pairing ---------------------------------------------------------------


def pair_indices(n, rng):
    """Random disjoint pairs of distinct indices in range(n)."""
    if n < 2:
        raise ValueError(f"need at least 2 sequences to pair, got {n}")
    perm = rng.permutation(n)
    m = n // 2
    return perm[:m], perm[m : 2 * m]


def make_pairs(dataset, seed):
    first, second = pair_indices(len(dataset), np.random.default_rng(seed))
    return [SamplePair(dataset[i], dataset[j]) for i, j in zip(first, second)]


# -- synthetic data --------------------------------------------------------

_FACE5 = np.array(
    [[-0.15, -0.10], [0.15, -0.10], [0.0, 0.03], [-0.11, 0.16], [0.11, 0.16]]
)


def face_template(K):
    if K == 5:
        return _FACE5.copy()
    rng = np.random.default_rng(12345)
    ang = rng.uniform(0, 2 * np.pi, K)
    rad = 0.25 * np.sqrt(rng.uniform(0, 1, K))
    pts = np.stack([0.8 * rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    return pts - pts.mean(axis=0)


def mode_bands(n_modes):
    """Frequency band (cycles per frame) of each motion mode."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    centers = [0.07] if n_modes == 1 else np.geomspace(0.04, 0.12, n_modes)
    return [(0.85 * c, 1.15 * c) for c in centers]


@dataclass
class SynthConfig:
    n_sequences: int = 256
    T: int = 40
    K: int = 5
    n_modes: int = 2
    seed: int = 0
    fps: float = DEFAULT_FPS
    amplitude: float = 1.0
    translation: tuple = (0.10, 0.06)
    rotation: float = 0.15
    scale: float = 0.05
    center_jitter: float = 0.15


def synth_sequence(cfg, label, rng):
    lo, hi = mode_bands(cfg.n_modes)[label]
    f = rng.uniform(lo, hi)
    ph = rng.uniform(0, 2 * np.pi, size=4)
    amp = cfg.amplitude * rng.uniform(0.7, 1.0, size=4)
    center = rng.uniform(-cfg.center_jitter, cfg.center_jitter, size=2)
    t = np.arange(cfg.T)
    w = 2 * np.pi * f * t
    tx = amp[0] * cfg.translation[0] * np.sin(w + ph[0])
    ty = amp[1] * cfg.translation[1] * np.sin(w + ph[1])
    rot = amp[2] * cfg.rotation * np.sin(w + ph[2])
    sc = 1.0 + amp[3] * cfg.scale * np.sin(w + ph[3])
    tmpl = face_template(cfg.K)
    cos, sin = np.cos(rot), np.sin(rot)
    x = tmpl[None, :, 0] * cos[:, None] - tmpl[None, :, 1] * sin[:, None]
    y = tmpl[None, :, 0] * sin[:, None] + tmpl[None, :, 1] * cos[:, None]
    frames = np.stack([x, y], axis=-1) * sc[:, None, None]
    frames += (center + np.stack([tx, ty], axis=1))[:, None, :]
    return MotionSequence(frames.astype(np.float32), cfg.fps)


def synth_dataset(cfg):
    """Rigid face-template trajectories with one frequency band per mode.

    Labels cycle through the modes so every mode gets an equal share. Each
    sequence draws from its own stream seeded by (seed, index).
    """
    if cfg.n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    seqs, labels = [], []
    for i in range(cfg.n_sequences):
        label = i % cfg.n_modes
        seqs.append(synth_sequence(cfg, label, np.random.default_rng([cfg.seed, i])))
        labels.append(label)
    return seqs, np.asarray(labels)


# -- frequency oracle ------------------------------------------------------


def velocity_spectrum(frames):
    """Power spectrum of the mean landmark velocity, summed over x and y."""
    x = np.asarray(frames, dtype=np.float64)
    v = np.diff(x.mean(axis=-2), axis=-2)  # (..., T-1, 2)
    v = v - v.mean(axis=-2, keepdims=True)
    n = v.shape[-2]
    power = (np.abs(np.fft.rfft(v, n=n, axis=-2)) ** 2).sum(axis=-1)
    freqs = np.fft.rfftfreq(n)
    return freqs, power


def dominant_frequency(frames):
    freqs, power = velocity_spectrum(frames)
    return freqs[1:][np.argmax(power[..., 1:], axis=-1)]


def classify_mode(frames, n_modes):
    """Assign each sequence to the mode whose band center is nearest (log
    scale) to the peak of its velocity spectrum."""
    centers = np.array([np.sqrt(lo * hi) for lo, hi in mode_bands(n_modes)])
    f = np.atleast_1d(dominant_frequency(frames))
    return np.argmin(np.abs(np.log(f[:, None]) - np.log(centers[None, :])), axis=1)


def is_static(frames, tol=1e-9):
    x = np.asarray(frames)
    return np.abs(np.diff(x, axis=-3)).max(initial=0.0) <= tol
