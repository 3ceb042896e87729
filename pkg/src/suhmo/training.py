"""Adversarial training: hinge losses, Adam, stall-triggered LR decay and the
alternating D/G loop with checkpoints and a CSV metric log."""
import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import autodiff as ad
from . import checkpoint
from . import data
from . import discriminator as dsc
from . import generator as gen
from . import metrics

LOG_COLUMNS = ("iter", "loss_G", "loss_D", "loss_L2", "fvd40", "tfid", "lr_G", "lr_D")

# named random streams derived from the run seed
STREAM_INIT_G, STREAM_INIT_D, STREAM_TRAIN, STREAM_EVAL = 1, 2, 3, 4


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lam: float = 1e-2
    lr_g: float = 2e-5
    lr_d: float = 1e-5
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 32
    seq_len: int = 40
    max_prefix: int = 5
    decay: float = 10.0
    stall_window: int = 10
    stall_tol: float = 0.01
    iters: int = 5000
    eval_interval: int = 100
    n_eval: int = 256
    lam_anneal: int = 0  # iterations over which lam decays linearly to 0; 0 keeps it constant
    # architecture
    variant: str = "recurrent"
    K: int = 5
    hidden: int = 64
    embed: int = 64
    d_embed: int = 32
    scales: tuple = (10, 20, 40)
    n_windows: int = 4
    # ablations
    one_sample_g: bool = False
    one_sample_d: bool = False
    no_multiscale: bool = False
    delta_based: bool = False
    l2_only: bool = False
    seed: int = 0

    def __post_init__(self):
        self.scales = tuple(int(s) for s in self.scales)
        if self.variant in ("rnn", "lstm"):
            self.variant = "recurrent"
        elif self.variant == "transformer":
            self.variant = "attention"
        if self.variant not in ("recurrent", "attention"):
            raise ValueError(f"unknown variant {self.variant!r}; use recurrent or attention")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch < 2 or self.batch % 2:
            raise ValueError(f"batch size must be even and >= 2 (pairs), got {self.batch}")
        if self.max_prefix < 1 or self.max_prefix >= self.seq_len:
            raise ValueError("max_prefix must be in [1, seq_len)")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if self.eval_interval < 1 or self.stall_window < 1:
            raise ValueError("eval_interval and stall_window must be >= 1")
        if max(self.scales) > self.seq_len:
            raise ValueError(f"window scales {self.scales} exceed the training length {self.seq_len}")

    def gen_config(self):
        return gen.GenConfig(
            K=self.K,
            variant=self.variant,
            hidden=self.hidden,
            embed=self.embed,
            mode="delta" if self.delta_based else "standard",
            pair_mixing=not self.one_sample_g,
        )

    def disc_config(self):
        return dsc.DiscConfig(
            K=self.K, variant=self.variant, embed=self.d_embed, scales=self.scales, n_windows=self.n_windows
        )

    def to_dict(self):
        d = asdict(self)
        d["scales"] = list(self.scales)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown TrainConfig field(s): {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    # Desk scale: the full-scale learning rates are far too small for 5k
    # iterations on CPU. Both are raised with the discriminator 5x faster,
    # and the MSE term fades out over the first 1000 iterations.
    "desk": dict(
        hidden=64, embed=64, d_embed=32, batch=32, iters=5000, lr_g=2e-4, lr_d=1e-3, lam=1.0, lam_anneal=1000,
        eval_interval=100,
    ),
    "paper": dict(hidden=1024, embed=1024, d_embed=128, batch=120, iters=60000, lr_g=2e-5, lr_d=1e-5),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return TrainConfig(**{**PRESETS[name], **overrides})


# -- losses ----------------------------------------------------------------


def _t(x):
    return x if isinstance(x, ad.Tensor) else ad.Tensor(np.asarray(x, dtype=np.float64))


def hinge_d_loss(real, fake):
    """mean(max(0, 1 - s_real)) + mean(max(0, 1 + s_fake))."""
    real, fake = _t(real), _t(fake)
    if real.value.size == 0 or fake.value.size == 0:
        raise ValueError("hinge loss needs non-empty score lists")
    return ad.add(ad.mean(ad.relu(ad.sub(1.0, real))), ad.mean(ad.relu(ad.add(1.0, fake))))


def hinge_g_loss(fake):
    fake = _t(fake)
    if fake.value.size == 0:
        raise ValueError("hinge loss needs a non-empty score list")
    return ad.scale(ad.mean(fake), -1.0)


def mse(pred, target):
    return ad.mean(ad.square(ad.sub(pred, target)))


# -- optimizer -------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def moments(self):
        return {n: (self.m[n], self.v[n]) for n in self.m}


def adam_step(params, grads, state, lr, beta1=0.5, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update of ``params`` (ParamSet) in place for every
    name in ``grads``; returns the state."""
    state.step += 1
    b1c = 1.0 - beta1**state.step
    b2c = 1.0 - beta2**state.step
    for name in sorted(grads):
        p, g = params[name], grads[name]
        if g.shape != p.shape:
            raise ad.ShapeError(f"adam: gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        params[name] = p - lr * (m / b1c) / (np.sqrt(v / b2c) + eps)
    return state


class StallDecay:
    """Divide the learning rate by ``factor`` once, the first time the
    monitored metric fails to improve by more than ``tol`` (relative) over
    ``window`` evaluations."""

    def __init__(self, factor=10.0, window=10, tol=0.01):
        self.factor, self.window, self.tol = factor, window, tol
        self.history = []
        self.decayed_at = None

    @property
    def scale(self):
        return 1.0 if self.decayed_at is None else 1.0 / self.factor

    def update(self, value):
        self.history.append(float(value))
        if self.decayed_at is None and len(self.history) > self.window:
            before = min(self.history[: -self.window])
            recent = min(self.history[-self.window :])
            if not recent < (1.0 - self.tol) * before:
                self.decayed_at = len(self.history) - 1
        return self.scale


def lr_schedule(history, base_lr, factor=10.0, window=10, tol=0.01):
    s = StallDecay(factor, window, tol)
    for v in history:
        s.update(v)
    return base_lr * s.scale


# -- the model -------------------------------------------------------------


def init_params(cfg):
    params = ad.ParamSet()
    gen.init_generator(params, cfg.gen_config(), np.random.default_rng([cfg.seed, STREAM_INIT_G]))
    if not cfg.l2_only:
        dsc.init_discriminators(
            params, cfg.disc_config(), np.random.default_rng([cfg.seed, STREAM_INIT_D]), cfg.one_sample_d
        )
    return params


def _windows(cfg, T, rng):
    if cfg.no_multiscale:
        return [dsc.WindowSpec(0, T)]
    return dsc.sample_windows(T, dsc.feasible_scales(cfg.scales, T), cfg.n_windows, rng)


def _d_scores(D, cfg, kin, frames, windows):
    """(marginal, joint, frame) scores."""
    return D.marginal(kin, windows), D.joint(kin, windows), D.frames(frames)


def _check(value, term, it):
    if not np.all(np.isfinite(value)):
        raise TrainingDiverged(f"non-finite {term} at iteration {it}")


def _batch(train, P, T, rng):
    """Two disjoint halves of P sequences each, cropped to T frames."""
    n = len(train)
    if n < 2 * P:
        idx = rng.integers(0, n, size=2 * P)
    else:
        idx = rng.permutation(n)[: 2 * P]
    out = np.empty((2 * P, T) + train.shape[2:], train.dtype)
    for j, i in enumerate(idx):
        s = int(rng.integers(0, train.shape[1] - T + 1))
        out[j] = train[i, s : s + T]
    return out


def generator_pass(params, cfg, real, n_obs):
    """Roll the generator out from the first ``n_obs`` frames of ``real``
    (B, T, K, 2) and compare the continuation with the ground truth.

    Returns (generator leaves, frames Tensor (B, T, 2K), MSE Tensor).
    """
    gcfg = cfg.gen_config()
    B, T = real.shape[:2]
    LG = params.bind(requires_grad=True, prefix="gen.")
    frames, _ = gen.rollout(gen.make_stepper(LG, gcfg), gcfg, real[:, :n_obs], T)
    target = ad.Tensor(real.reshape(B, T, -1))
    return LG, frames, mse(frames[:, n_obs:], target[:, n_obs:])


def total_g_loss(cfg, fake_scores, l2, lam=None):
    """Generator objective: the three hinge terms plus lam * MSE.

    ``fake_scores`` holds the (marginal, joint, frame) scores of generated
    data. With ``l2_only`` the objective is the MSE alone.
    """
    if cfg.l2_only:
        return l2
    lam = cfg.lam if lam is None else lam
    ds, dj, df = fake_scores
    adv = ad.add(ad.add(hinge_g_loss(ds), hinge_g_loss(dj)), hinge_g_loss(df))
    return ad.add(adv, ad.scale(l2, lam)) if lam > 0 else adv


def total_d_loss(real_scores, fake_scores):
    terms = [hinge_d_loss(r, f) for r, f in zip(real_scores, fake_scores)]
    return ad.add(ad.add(terms[0], terms[1]), terms[2])


def train(
    cfg, train_seqs, val_seqs=None, log_path=None, ckpt_path=None, params=None, verbose=False, on_eval=None,
    best_ckpt_path=None,
):
    """Run ``cfg.iters`` alternating D/G updates.

    ``ckpt_path`` receives the final state; ``best_ckpt_path`` the
    parameters with the lowest validation fvd40 seen at any evaluation.

    ``on_eval(row, params)`` is called after every evaluation.

    Returns a dict with the final ``params``, the metric ``log`` rows, the
    Adam states and the best evaluation (``best_iter``, ``best_fvd``). Everything is deterministic given ``cfg.seed``.
    """
    gcfg, dcfg = cfg.gen_config(), cfg.disc_config()
    tr = _frames(train_seqs)
    va = _frames(val_seqs) if val_seqs is not None and len(val_seqs) else tr
    if tr.shape[1] < cfg.seq_len:
        raise ValueError(f"training sequences have {tr.shape[1]} frames, need {cfg.seq_len}")
    if tr.shape[2] != cfg.K:
        raise ValueError(f"data has K={tr.shape[2]} landmarks, config expects {cfg.K}")
    params = init_params(cfg) if params is None else params
    dt = params.dtype
    tr, va = tr.astype(dt), va.astype(dt)
    rng = np.random.default_rng([cfg.seed, STREAM_TRAIN])
    opt_g, opt_d = AdamState(), AdamState()
    stall = StallDecay(cfg.decay, cfg.stall_window, cfg.stall_tol)
    P, T = cfg.batch // 2, cfg.seq_len
    log, acc = [], {"loss_G": [], "loss_D": [], "loss_L2": []}
    seq_ex, frame_ex = metrics.SequenceExtractor(), metrics.FrameExtractor()
    t0 = time.perf_counter()
    best = {"iter": None, "fvd": np.inf, "params": None}

    def evaluate(it):
        fvd, tf = evaluate_model(params, cfg, va, seq_ex, frame_ex)
        if fvd < best["fvd"]:
            best.update(iter=it, fvd=fvd, params=params.copy())
        scale = stall.update(fvd) if it > 0 else 1.0
        row = {
            "iter": it,
            "loss_G": _avg(acc["loss_G"]),
            "loss_D": _avg(acc["loss_D"]),
            "loss_L2": _avg(acc["loss_L2"]),
            "fvd40": fvd,
            "tfid": tf,
            "lr_G": cfg.lr_g * scale,
            "lr_D": cfg.lr_d * scale,
        }
        log.append(row)
        for v in acc.values():
            v.clear()
        if on_eval is not None:
            on_eval(row, params)
        if verbose:
            print(
                f"it {it:5d}  G {row['loss_G']:.4f}  D {row['loss_D']:.4f}  L2 {row['loss_L2']:.5f}  "
                f"fvd40 {fvd:.4f}  tfid {tf:.4f}  lr_G {row['lr_G']:.2g}  ({time.perf_counter() - t0:.0f}s)",
                flush=True,
            )

    if cfg.iters == 0 or cfg.eval_interval <= cfg.iters:
        evaluate(0)
    for it in range(1, cfg.iters + 1):
        lam = cfg.lam
        if cfg.lam_anneal > 0:
            lam = cfg.lam * max(0.0, 1.0 - (it - 1) / cfg.lam_anneal)
        n_obs = int(rng.integers(1, cfg.max_prefix + 1))
        real_g = _batch(tr, P, T, rng)
        real_d = _batch(tr, P, T, rng)
        lr_g, lr_d = cfg.lr_g * stall.scale, cfg.lr_d * stall.scale
        LG, frames, l2 = generator_pass(params, cfg, real_g, n_obs)
        _check(l2.value, "loss_L2", it)

        loss_d = None
        fake_scores = None
        if not cfg.l2_only:
            # discriminator step on detached fakes
            detached = ad.Tensor(frames.value)
            LD = params.bind(requires_grad=True, prefix="d")
            D = dsc.Discriminators(LD, dcfg, cfg.one_sample_d)
            w = _windows(cfg, T, rng)
            real_flat = ad.Tensor(real_d.reshape(2 * P, T, -1))
            sr = _d_scores(D, cfg, dsc.features(real_flat, dcfg), real_flat, w)
            sf = _d_scores(D, cfg, dsc.features(detached, dcfg), detached, w)
            loss_d = total_d_loss(sr, sf)
            _check(loss_d.value, "loss_D", it)
            adam_step(params, ad.backward(loss_d, LD), opt_d, lr_d, cfg.beta1, cfg.beta2, cfg.eps)
            # generator step through the updated discriminators, reusing the rollout graph
            D = dsc.Discriminators(params.bind(requires_grad=False, prefix="d"), dcfg, cfg.one_sample_d)
            w = _windows(cfg, T, rng)
            fake_scores = _d_scores(D, cfg, dsc.features(frames, dcfg), frames, w)
            for name, s in zip(("D_S", "D_S^J", "D_F"), fake_scores):
                _check(s.value, f"{name} score of generated data", it)
        loss_g = total_g_loss(cfg, fake_scores, l2, lam)
        _check(loss_g.value, "loss_G", it)
        gg = ad.backward(loss_g, LG)
        adam_step(params, gg, opt_g, lr_g, cfg.beta1, cfg.beta2, cfg.eps)

        acc["loss_G"].append(float(loss_g.value))
        acc["loss_D"].append(float(loss_d.value) if loss_d is not None else 0.0)
        acc["loss_L2"].append(float(l2.value))
        if it % cfg.eval_interval == 0 or it == cfg.iters:
            evaluate(it)

    if log_path:
        write_log(log_path, log)
    if ckpt_path:
        save_checkpoint(ckpt_path, params, cfg, opt_g, opt_d, cfg.iters)
    if best_ckpt_path:
        save_checkpoint(best_ckpt_path, best["params"] or params, cfg, iteration=best["iter"] or 0)
    return {
        "params": params, "log": log, "opt_g": opt_g, "opt_d": opt_d, "decayed_at": stall.decayed_at,
        "best_iter": best["iter"], "best_fvd": best["fvd"],
    }


def _avg(xs):
    return float(np.mean(xs)) if xs else float("nan")


def _frames(seqs):
    if isinstance(seqs, np.ndarray):
        return seqs
    return np.stack([s.frames if isinstance(s, data.MotionSequence) else np.asarray(s) for s in seqs])


def eval_prefixes(val, n, seed):
    """First frames for ``n`` generated sequences (n even), split into pair
    halves. Every validation sequence seeds n / len(val) draws, each time
    with a fresh random partner."""
    rng = np.random.default_rng([seed, STREAM_EVAL])
    reps = max(1, -(-n // len(val)))
    idx = np.concatenate([rng.permutation(len(val)) for _ in range(reps)])[: 2 * (n // 2)]
    P = len(idx) // 2
    return val[idx[:P], :1], val[idx[P:], :1]


def evaluate_model(params, cfg, val, seq_ex=None, frame_ex=None, T=None):
    """fvd_like at L=40 (or the sequence length) and t-FID of ``cfg.n_eval``
    generated sequences against the validation sequences."""
    T = T or cfg.seq_len
    a, b = eval_prefixes(val, cfg.n_eval, cfg.seed)
    fa, fb = gen.generate(params, cfg.gen_config(), a, b, T)
    fake = np.concatenate([fa, fb]).astype(np.float64)
    real = val[:, :T].astype(np.float64)
    if not np.all(np.isfinite(fake)):
        return float("inf"), float("inf")
    L = min(40, T)
    fvd = metrics.fvd_like(real, fake, L, extractor=seq_ex)
    tf = metrics.tfid(real, np.clip(fake, -1.5, 1.5), extractor=frame_ex)
    return fvd, tf


# -- persistence -----------------------------------------------------------


def write_log(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()})


def read_log(path):
    with open(path) as fh:
        return [{k: (float(v) if v != "" else float("nan")) for k, v in r.items()} for r in csv.DictReader(fh)]


def save_checkpoint(path, params, cfg, opt_g=None, opt_d=None, iteration=0):
    moments = {}
    steps = {}
    for tag, opt in (("g", opt_g), ("d", opt_d)):
        if opt is not None:
            moments.update(opt.moments())
            steps[tag] = opt.step
    meta = {
        "train": cfg.to_dict(),
        "generator": cfg.gen_config().to_dict(),
        "discriminator": None if cfg.l2_only else {**cfg.disc_config().to_dict(), "scales": list(cfg.scales)},
        "iteration": iteration,
        "adam_steps": steps,
    }
    return checkpoint.save(path, params, meta, moments)


def load_checkpoint(path):
    """Return (params, TrainConfig, meta)."""
    arrays, _, meta = checkpoint.load(path)
    cfg = TrainConfig.from_dict(meta["train"])
    return ad.ParamSet(arrays), cfg, meta


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
