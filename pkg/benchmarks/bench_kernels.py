"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes match the desk preset: the discriminator LSTM over 40-frame windows
at batch 64, the generator step at batch 32, and rasterizing a batch of
motion-map frames.
"""
import argparse
import timeit

import numpy as np

from suhmo import kernels


def cases(dtype):
    rng = np.random.default_rng(0)

    def lstm(T, B, H):
        xz = rng.normal(size=(T, B, 4 * H)).astype(dtype)
        wh = (rng.normal(size=(H, 4 * H)) / np.sqrt(H)).astype(dtype)
        h0 = np.zeros((B, H), dtype)
        fwd = kernels.lstm_seq_forward(xz, wh, h0, h0)
        hs, cs, acts, tcs = fwd
        dhs = rng.normal(size=hs.shape).astype(dtype)
        return (
            lambda: kernels.lstm_seq_forward(xz, wh, h0, h0),
            lambda: kernels.lstm_seq_backward(dhs, h0, wh, acts, cs, tcs, h0),
        )

    out = {}
    for tag, shape in (("lstm T=40 B=64 H=32", (40, 64, 32)), ("lstm T=1 B=32 H=64", (1, 32, 64))):
        fwd, bwd = lstm(*shape)
        out[tag + " fwd"] = fwd
        out[tag + " bwd"] = bwd
    frames = rng.uniform(-1, 1, size=(40 * 64, 5, 2))
    out["rasterize 2560x5"] = lambda: kernels.rasterize(frames, 64, 64, 1.5)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dtype", default="float32", choices=["float32", "float64"])
    args = ap.parse_args()
    if not kernels.HAVE_EXTENSION:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    dtype = np.dtype(args.dtype)
    print(f"{'kernel':32s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for name in cases(dtype):
        times = {}
        for backend in ("cython", "python"):
            kernels.use_backend(backend)
            fn = cases(dtype)[name]
            number = 5
            times[backend] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:32s} {times['cython']:10.3f} {times['python']:10.3f} {times['python'] / times['cython']:8.2f}x")
    kernels.use_backend("cython")


if __name__ == "__main__":
    main()
