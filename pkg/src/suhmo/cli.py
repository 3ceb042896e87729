"""Command-line entry point: synth-data, train, generate, eval, render."""
import argparse
import glob
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import checkpoint
from . import data
from . import generator as gen
from . import kernels
from . import metrics
from . import training

METRICS = ("fvd10", "fvd20", "fvd40", "tfid", "fid", "diversity")

# named random streams derived from --seed
STREAM_DATA, STREAM_GENERATE = 11, 13


class UsageError(Exception):
    pass


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SUHMO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SUHMO_THREADS must be an integer, got {env!r}") from None
    return 1


# -- synth-data ------------------------------------------------------------


def cmd_synth_data(args):
    if args.modes < 1:
        raise UsageError("--modes must be >= 1")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = data.SynthConfig(n_sequences=args.n, T=args.length, K=args.K, n_modes=args.modes, seed=args.seed)
    seqs, labels = data.synth_dataset(cfg)
    entries = data.write_dataset(args.out, seqs, labels, val_fraction=args.val_fraction, seed=args.seed)
    n_val = sum(e["split"] == "val" for e in entries)
    print(f"wrote {len(entries)} sequences ({n_val} val) to {args.out}")
    return 0


# -- train -----------------------------------------------------------------


def _manifest_path(path):
    return os.path.join(path, "manifest.json") if os.path.isdir(path) else path


def build_train_config(args):
    over = {}
    if args.config:
        with open(args.config) as fh:
            over.update(json.load(fh))
    mapping = {
        "variant": args.variant,
        "iters": args.iters,
        "batch": args.batch,
        "lr_g": args.lr_g,
        "lr_d": args.lr_d,
        "lam": args.lam,
        "hidden": args.hidden,
        "embed": args.embed,
        "d_embed": args.d_embed,
        "n_windows": args.n_windows,
        "eval_interval": args.eval_interval,
        "stall_window": args.stall_window,
        "lam_anneal": args.lam_anneal,
        "seed": args.seed,
    }
    over.update({k: v for k, v in mapping.items() if v is not None})
    for flag in ("one_sample_g", "one_sample_d", "no_multiscale", "delta_based", "l2_only"):
        if getattr(args, flag):
            over[flag] = True
    if over.get("l2_only") and over.get("no_multiscale"):
        warnings.warn("--no-multiscale has no effect with --l2-only (no discriminator is trained)", stacklevel=2)
    if "scales" in over:
        over["scales"] = tuple(over["scales"])
    return training.preset(args.preset, **over) if args.preset else training.TrainConfig(**over)


def cmd_train(args):
    cfg = build_train_config(args)
    splits = data.read_manifest(_manifest_path(args.data))
    if "train" not in splits:
        raise ValueError(f"manifest {args.data} has no train split")
    train_seqs = splits["train"][0]
    val_seqs = splits.get("val", (None,))[0]
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "model.ckpt")
    best = os.path.join(args.out, "best.ckpt")
    log = os.path.join(args.out, "metrics.csv")
    result = training.train(
        cfg, train_seqs, val_seqs, log_path=log, ckpt_path=ckpt, verbose=args.verbose, best_ckpt_path=best
    )
    manifest = {
        "tool": "suhmo",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "data": os.path.abspath(_manifest_path(args.data)),
        "checkpoints": [os.path.abspath(ckpt), os.path.abspath(best)],
        "best_checkpoint": {"iteration": result["best_iter"], "fvd40": result["best_fvd"]},
        "metric_log": os.path.abspath(log),
        "lr_decayed_at_eval": result["decayed_at"],
    }
    with open(os.path.join(args.out, "run.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    last = result["log"][-1] if result["log"] else {}
    print(f"trained {cfg.iters} iterations; fvd40 {last.get('fvd40', float('nan')):.4f}; checkpoint {ckpt}")
    return 0


# -- generate --------------------------------------------------------------


def generate_from_reference(params, gcfg, ref, length, n, seed):
    """``n`` sequences driven by ``ref`` (K, 2); draw i pairs the reference
    with ``augment_reference(ref, [seed, STREAM_GENERATE, i])``."""
    ref = np.asarray(ref, dtype=np.float32)
    partners = np.stack([data.augment_reference(ref, [seed, STREAM_GENERATE, i]) for i in range(n)])
    first = np.repeat(ref[None], n, axis=0)
    out, _ = gen.generate(params, gcfg, first, partners, length)
    return out


def cmd_generate(args):
    if args.length < 1:
        raise UsageError("--length must be >= 1")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    params, cfg, _ = training.load_checkpoint(args.checkpoint)
    ref_seq = data.load_sequence(args.ref, check_range=True)
    ref = data.validate_frame(ref_seq.frames[args.frame])
    out = generate_from_reference(params, cfg.gen_config(), ref, args.length, args.n, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for i, frames in enumerate(out):
        data.save_sequence(os.path.join(args.out, f"gen_{i:05d}.lmk"), data.MotionSequence(frames, ref_seq.fps))
    print(f"wrote {len(out)} sequences of {args.length} frames to {args.out}")
    return 0


# -- eval ------------------------------------------------------------------


def load_population(path, split=None):
    """Sequences from a manifest, a directory of .lmk files or one .lmk file."""
    if os.path.isdir(path) and os.path.exists(os.path.join(path, "manifest.json")):
        path = os.path.join(path, "manifest.json")
    if path.endswith(".json"):
        splits = data.read_manifest(path)
        keys = [split] if split else sorted(splits)
        missing = [k for k in keys if k not in splits]
        if missing:
            raise ValueError(f"manifest {path} has no split {missing[0]!r}")
        return [s for k in keys for s in splits[k][0]]
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, "*.lmk")))
        if not files:
            raise ValueError(f"no .lmk files in {path}")
        return [data.load_sequence(f) for f in files]
    return [data.load_sequence(path)]


def _tail(seqs, tail):
    T = min(s.T for s in seqs)
    n = min(T, tail) if tail else T
    return np.stack([s.frames[-n:] for s in seqs]).astype(np.float64)


def parse_metrics(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METRICS]
    if bad or not names:
        raise UsageError(f"unknown metric(s) {bad}; valid names: {','.join(METRICS)}")
    return names


def evaluate(real, fake, names, threads=1, alpha=metrics.ALPHA, n_modes=None):
    """Metric report entries for two populations (N, T, K, 2)."""
    report = []
    for name in names:
        if name.startswith("fvd"):
            L = int(name[3:])
            if L > min(real.shape[1], fake.shape[1]):
                raise ValueError(f"{name}: window length {L} is longer than the shortest sequence")
            v = metrics.fvd_like(real, fake, L, threads=threads)
            report.append(metrics.report_entry(name, v, len(real), len(fake), window=L))
        elif name == "tfid":
            v = metrics.tfid(real, fake, alpha, threads=threads)
            report.append(metrics.report_entry(name, v, len(real), len(fake), alpha=alpha))
        elif name == "fid":
            v = metrics.fid(real, fake, threads=threads)
            report.append(metrics.report_entry(name, v, len(real), len(fake)))
        elif name == "diversity":
            entry = metrics.report_entry(name, metrics.mean_pairwise_distance(fake), len(real), len(fake))
            if n_modes:
                entry["mode_coverage"] = int(len(np.unique(data.classify_mode(fake, n_modes))))
            report.append(entry)
    return report


def cmd_eval(args):
    names = parse_metrics(args.metrics)
    real = load_population(args.real, args.real_split)
    fake = load_population(args.fake, args.fake_split)
    if not real or not fake:
        raise ValueError("both populations must be non-empty")
    report = evaluate(_tail(real, args.tail), _tail(fake, args.tail), names, _threads(args), args.alpha, args.modes)
    text = json.dumps(report, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


# -- render ----------------------------------------------------------------


def cmd_render(args):
    seq = data.load_sequence(args.input)
    if args.motion_map:
        img = metrics.motion_map(seq.frames, args.alpha)
        out = args.out if args.out.endswith(".pgm") else os.path.join(args.out, "motion_map.pgm")
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        metrics.write_pgm(out, img)
        print(f"wrote {out}")
        return 0
    os.makedirs(args.out, exist_ok=True)
    for t, img in enumerate(metrics.rasterize(seq.frames)):
        metrics.write_pgm(os.path.join(args.out, f"frame_{t:05d}.pgm"), img)
    print(f"wrote {seq.T} frames to {args.out}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="suhmo", description="Unconditional head-motion generation from landmarks")
    p.add_argument("--version", action="version", version=f"suhmo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="write a synthetic multi-mode dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=256)
    s.add_argument("--modes", type=int, default=2)
    s.add_argument("--length", type=int, default=40, help="frames per sequence")
    s.add_argument("--K", type=int, default=5, help="landmarks per frame")
    s.add_argument("--val-fraction", type=float, default=0.25)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_synth_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True, help="dataset directory or manifest.json")
    t.add_argument("--out", required=True)
    t.add_argument("--preset", choices=sorted(training.PRESETS))
    t.add_argument("--config", help="JSON file with TrainConfig fields")
    t.add_argument("--variant", choices=["rnn", "transformer"])
    t.add_argument("--iters", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr-g", type=float)
    t.add_argument("--lr-d", type=float)
    t.add_argument("--lam", type=float)
    t.add_argument("--hidden", type=int)
    t.add_argument("--embed", type=int)
    t.add_argument("--d-embed", type=int)
    t.add_argument("--n-windows", type=int)
    t.add_argument("--eval-interval", type=int)
    t.add_argument("--stall-window", type=int)
    t.add_argument("--lam-anneal", type=int)
    t.add_argument("--seed", type=int)
    for flag in ("--one-sample-g", "--one-sample-d", "--no-multiscale", "--delta-based", "--l2-only"):
        t.add_argument(flag, action="store_true")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(fn=cmd_train)

    g = sub.add_parser("generate", help="generate sequences from a reference pose")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--ref", required=True, help=".lmk file holding the reference pose")
    g.add_argument("--frame", type=int, default=0, help="index of the reference frame in --ref")
    g.add_argument("--length", type=int, default=40)
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    e = sub.add_parser("eval", help="compare two populations")
    e.add_argument("--real", required=True)
    e.add_argument("--fake", required=True)
    e.add_argument("--real-split")
    e.add_argument("--fake-split")
    e.add_argument("--metrics", default="fvd10,fvd20,fvd40,tfid,fid")
    e.add_argument("--tail", type=int, default=40, help="evaluate the last N frames (0: all)")
    e.add_argument("--alpha", type=float, default=metrics.ALPHA)
    e.add_argument("--modes", type=int, help="mode count for the diversity coverage oracle")
    e.add_argument("--threads", type=int)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("render", help="rasterize frames or a motion map to PGM")
    r.add_argument("--input", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--motion-map", action="store_true")
    r.add_argument("--alpha", type=float, default=metrics.ALPHA)
    r.set_defaults(fn=cmd_render)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"suhmo: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, checkpoint.CheckpointError, training.TrainingDiverged) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"suhmo {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
