import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suhmo import data


def random_seq(rng, T=7, K=3):
    return data.MotionSequence(rng.uniform(-1, 1, size=(T, K, 2)).astype(np.float32), fps=30.0)


def test_lmk_round_trip(tmp_path, rng):
    seq = random_seq(rng)
    path = tmp_path / "a.lmk"
    data.save_sequence(path, seq)
    back = data.load_sequence(path)
    assert back.frames.tobytes() == seq.frames.tobytes()
    assert back.fps == 30.0
    assert path.read_bytes() == data.encode_sequence(back)


def test_single_frame_file(tmp_path):
    seq = data.MotionSequence(np.zeros((1, 4, 2), np.float32))
    data.save_sequence(tmp_path / "one.lmk", seq)
    assert data.load_sequence(tmp_path / "one.lmk").T == 1


def test_truncated_file_names_sizes(rng):
    buf = data.encode_sequence(random_seq(rng, T=2, K=3))
    with pytest.raises(data.LandmarkFormatError, match="expected 48 bytes.*got 40"):
        data.decode_sequence(buf[:-8])


def test_bad_magic_and_non_finite(rng):
    buf = bytearray(data.encode_sequence(random_seq(rng)))
    with pytest.raises(data.LandmarkFormatError, match="magic"):
        data.decode_sequence(b"XXXX" + bytes(buf[4:]))
    buf[16:20] = np.array([np.nan], "<f4").tobytes()
    with pytest.raises(data.LandmarkFormatError, match="non-finite"):
        data.decode_sequence(bytes(buf))


def test_range_check_at_ingestion():
    seq = data.MotionSequence(np.full((2, 1, 2), 1.6, np.float32))
    buf = data.encode_sequence(seq)
    data.decode_sequence(buf)
    with pytest.raises(data.LandmarkFormatError, match="outside"):
        data.decode_sequence(buf, check_range=True)


def test_pair_requires_same_shape():
    a = data.MotionSequence(np.zeros((3, 2, 2)))
    with pytest.raises(ValueError, match="share T and K"):
        data.SamplePair(a, data.MotionSequence(np.zeros((4, 2, 2))))


# -- kinematics ------------------------------------------------------------


def test_kinematics_constant():
    k = data.kinematics(np.ones((5, 3, 2)))
    assert k.shape == (5, 3, 6)
    assert not k[..., 2:].any()


def test_kinematics_linear_and_quadratic():
    t = np.arange(6.0)
    c = np.array([0.5, -0.25])
    k = data.kinematics(t[:, None, None] * c)
    np.testing.assert_array_equal(k[0, 0, 2:4], 0)
    np.testing.assert_allclose(k[1:, 0, 2:4], np.tile(c, (5, 1)))
    np.testing.assert_allclose(k[..., 4:], 0, atol=1e-15)
    x = np.zeros((6, 1, 2))
    x[:, 0, 0] = t**2
    k = data.kinematics(x)
    np.testing.assert_array_equal(k[:2, 0, 4], 0)
    np.testing.assert_array_equal(k[2:, 0, 4], 2)


@given(st.integers(1, 30), st.integers(0, 1000))
def test_kinematics_cumsum_reconstructs(T, seed):
    x = np.random.default_rng(seed).normal(size=(T, 2, 2))
    v = data.kinematics(x)[..., 2:4]
    rec = x[0] + np.cumsum(v, axis=0)
    np.testing.assert_allclose(rec, x, atol=1e-12)
    np.testing.assert_array_equal(v[1:], x[1:] - x[:-1])


# -- augmentation ----------------------------------------------------------


def test_transform_identity_and_flip():
    f = np.array([[0.1, 0.2], [-0.3, 0.4], [0.0, -0.5]])
    np.testing.assert_allclose(data.transform_reference(f, False, 1.0, (0, 0)), f)
    flipped = data.transform_reference(f, True, 1.0, (0, 0))
    np.testing.assert_allclose(flipped[:, 0], -f[:, 0])
    np.testing.assert_allclose(flipped[:, 1], f[:, 1])


def test_transform_composed_by_hand():
    f = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.6]])
    out = data.transform_reference(f, True, 1.1, (0.05, 0.0))
    # flip -> [[0,0],[-0.3,0],[0,0.6]], centroid (-0.1, 0.2)
    expected = np.array([[-0.1 + 1.1 * 0.1, 0.2 - 1.1 * 0.2], [-0.1 - 1.1 * 0.2, 0.2 - 1.1 * 0.2], [-0.1 + 1.1 * 0.1, 0.2 + 1.1 * 0.4]])
    expected[:, 0] += 0.05
    np.testing.assert_allclose(out, expected, atol=1e-12)


@given(st.integers(0, 10_000))
def test_augment_preserves_distance_ratios(seed):
    f = data.face_template(5)
    out = data.augment_reference(f, seed)
    _, scale, _ = data.sample_reference_transform(seed)
    d0 = np.linalg.norm(f[:, None] - f[None], axis=-1)
    d1 = np.linalg.norm(out[:, None] - out[None], axis=-1)
    np.testing.assert_allclose(d1, scale * d0, atol=1e-12)
    assert 0.9 <= scale <= 1.1


def test_augment_is_deterministic():
    f = data.face_template(5)
    np.testing.assert_array_equal(data.augment_reference(f, [3, 4]), data.augment_reference(f, [3, 4]))


# -- pairing ---------------------------------------------------------------


def test_make_pairs_uses_each_once():
    seqs = [data.MotionSequence(np.full((2, 1, 2), i, np.float32)) for i in range(4)]
    pairs = data.make_pairs(seqs, seed=5)
    assert len(pairs) == 2
    used = sorted(int(s.frames[0, 0, 0]) for p in pairs for s in (p.first, p.second))
    assert used == [0, 1, 2, 3]
    again = data.make_pairs(seqs, seed=5)
    assert [(p.first.frames[0, 0, 0], p.second.frames[0, 0, 0]) for p in pairs] == [
        (p.first.frames[0, 0, 0], p.second.frames[0, 0, 0]) for p in again
    ]


def test_singleton_dataset_cannot_pair():
    with pytest.raises(ValueError):
        data.make_pairs([data.MotionSequence(np.zeros((1, 1, 2)))], 0)


def test_pairing_is_uniform():
    n, reps = 10, 1000
    counts = dict.fromkeys(itertools.combinations(range(n), 2), 0)
    rng = np.random.default_rng(0)
    for _ in range(reps):
        a, b = data.pair_indices(n, rng)
        for i, j in zip(a, b):
            counts[(min(i, j), max(i, j))] += 1
    p = 1 / (n - 1)  # each item meets a given partner with probability 1/(n-1); 5 pairs per shuffle
    expected = reps * 5 / len(counts)
    sigma = np.sqrt(reps * p * (1 - p))
    assert abs(expected - reps * p) < 1e-9
    assert all(abs(c - expected) < 4 * sigma for c in counts.values())


# -- synthetic data --------------------------------------------------------


def test_synth_deterministic_and_in_range():
    cfg = data.SynthConfig(n_sequences=20, seed=3)
    a, la = data.synth_dataset(cfg)
    b, lb = data.synth_dataset(cfg)
    assert all(x.frames.tobytes() == y.frames.tobytes() for x, y in zip(a, b))
    np.testing.assert_array_equal(la, lb)
    assert max(np.abs(s.frames).max() for s in a) <= 1.0


def test_synth_zero_amplitude_is_static():
    cfg = data.SynthConfig(n_sequences=5, n_modes=1, amplitude=0.0)
    seqs, labels = data.synth_dataset(cfg)
    assert all(data.is_static(s.frames) for s in seqs)
    assert set(labels) == {0}


def test_synth_rejects_zero_modes():
    with pytest.raises(ValueError):
        data.synth_dataset(data.SynthConfig(n_modes=0))


def test_frequency_oracle_separates_modes():
    seqs, labels = data.synth_dataset(data.SynthConfig(n_sequences=200, seed=11))
    pred = data.classify_mode(np.stack([s.frames for s in seqs]), 2)
    assert (pred == labels).all()


def test_dataset_manifest(tmp_path):
    seqs, labels = data.synth_dataset(data.SynthConfig(n_sequences=8, T=5))
    entries = data.write_dataset(tmp_path, seqs, labels, val_fraction=0.25, seed=1)
    assert sum(e["split"] == "val" for e in entries) == 2
    assert json.loads((tmp_path / "manifest.json").read_text()) == entries
    splits = data.read_manifest(tmp_path / "manifest.json")
    assert len(splits["train"][0]) == 6 and len(splits["val"][0]) == 2


@settings(max_examples=10)
@given(st.integers(1, 400), st.integers(1, 400))
def test_normalize_canvas_centers(w, h):
    pts = np.random.default_rng(w * h).uniform(0, max(w, h), size=(3, 4, 2))
    out = data.normalize_canvas(pts, w, h)
    np.testing.assert_allclose(out.reshape(-1, 2).mean(axis=0), 0, atol=1e-5)
