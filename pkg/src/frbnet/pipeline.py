"""FRBNet forward pass, fusion block, toy classifier and trainer.

Per channel pair the log-ratio spectrum is multiplied by that pair's filter
grid and brought back to the spatial domain, giving the invariant stack
``F_inv``.  The fusion block then computes
``F_out = Conv(CB(Cat(CB(F_inv), CB(I))))`` where CB is a 3x3 conv followed
by batch norm.  The toy head pools ``softplus(F_out)`` per channel and maps
the three means to class logits.

Learnable parameters are exposed as a flat ``{name: ndarray}`` mapping so the
optimizer and the finite-difference checks treat every block alike.
"""

import json
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import frbt, nn
from .fcr import LOG_FLOOR, PAIRS, log_plane
from .lff import FilterParams, _harmonic_sum, eval_lff, grad_params
from .spectral import dft2, idft2, make_freq_grid

CB_WIDTH = 8
CAT_WIDTH = 2 * CB_WIDTH
OUT_CHANNELS = 3
SCORE_FLOOR = 1e-12
PAIR_A = [p.channels[0] for p in PAIRS]
PAIR_B = [p.channels[1] for p in PAIRS]
ABLATIONS = {
    "h-only": dict(use_window=False, use_fcr=False),
    "h-wg": dict(use_window=True, use_fcr=False),
    "h-fcr": dict(use_window=False, use_fcr=True),
    "full": dict(use_window=True, use_fcr=True),
}


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, loss):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class Flags:
    use_window: bool = True
    use_fcr: bool = True
    use_angular: bool = True
    symmetrize: bool = True
    # "frbnet" feeds F_inv to the first branch, "raw" feeds the image itself
    frontend: str = "frbnet"

    def __post_init__(self):
        if self.frontend not in ("frbnet", "raw"):
            raise ValueError(f"frontend must be 'frbnet' or 'raw', got {self.frontend!r}")

    @classmethod
    def from_ablation(cls, name, **kw):
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
        return cls(**ABLATIONS[name], **kw)


@dataclass
class ConvBN:
    w: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def init(cls, cin, cout, rng):
        w = rng.standard_normal((cout, cin, 3, 3)) * np.sqrt(1.0 / (cin * 9))
        return cls(w, np.ones(cout), np.zeros(cout), np.zeros(cout), np.ones(cout))


@dataclass
class FusionParams:
    cb_inv: ConvBN
    cb_img: ConvBN
    cb_cat: ConvBN
    out_w: np.ndarray
    out_b: np.ndarray

    @classmethod
    def init(cls, rng):
        return cls(
            cb_inv=ConvBN.init(3, CB_WIDTH, rng),
            cb_img=ConvBN.init(3, CB_WIDTH, rng),
            cb_cat=ConvBN.init(CAT_WIDTH, CAT_WIDTH, rng),
            out_w=rng.standard_normal((OUT_CHANNELS, CAT_WIDTH, 3, 3)) * np.sqrt(1.0 / (CAT_WIDTH * 9)),
            out_b=np.zeros(OUT_CHANNELS),
        )

    def n_params(self):
        blocks = (self.cb_inv, self.cb_img, self.cb_cat)
        return sum(b.w.size + b.gamma.size + b.beta.size for b in blocks) + self.out_w.size + self.out_b.size


@dataclass
class Optimizer:
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    velocity: dict = field(default_factory=dict)


@dataclass
class ModelState:
    filters: list
    fusion: FusionParams
    head_w: np.ndarray
    head_b: np.ndarray
    flags: Flags = field(default_factory=Flags)
    optimizer: Optimizer = field(default_factory=Optimizer)

    @property
    def n_classes(self):
        return self.head_w.shape[0]

    def params(self):
        """Copy of every learnable array keyed by a dotted name."""
        out = {}
        for pair, fp in zip(PAIRS, self.filters):
            out[f"filter.{pair.name}.log_sigma_w"] = np.array(fp.log_sigma_w)
            out[f"filter.{pair.name}.log_sigma_h"] = np.array(fp.log_sigma_h)
            out[f"filter.{pair.name}.a"] = fp.a.copy()
            if fp.learn_lambda:
                out[f"filter.{pair.name}.lam"] = np.array(fp.lam)
        for name in ("cb_inv", "cb_img", "cb_cat"):
            blk = getattr(self.fusion, name)
            out[f"fusion.{name}.w"] = blk.w.copy()
            out[f"fusion.{name}.gamma"] = blk.gamma.copy()
            out[f"fusion.{name}.beta"] = blk.beta.copy()
        out["fusion.out.w"] = self.fusion.out_w.copy()
        out["fusion.out.b"] = self.fusion.out_b.copy()
        out["head.w"] = self.head_w.copy()
        out["head.b"] = self.head_b.copy()
        return out

    def set_params(self, values):
        for pair, fp in zip(PAIRS, self.filters):
            pre = f"filter.{pair.name}."
            if pre + "log_sigma_w" in values:
                fp.log_sigma_w = float(values[pre + "log_sigma_w"])
            if pre + "log_sigma_h" in values:
                fp.log_sigma_h = float(values[pre + "log_sigma_h"])
            if pre + "a" in values:
                fp.a = np.array(values[pre + "a"], dtype=np.float64)
            if pre + "lam" in values:
                fp.lam = max(float(values[pre + "lam"]), 0.0)
        for name in ("cb_inv", "cb_img", "cb_cat"):
            blk = getattr(self.fusion, name)
            for attr in ("w", "gamma", "beta"):
                key = f"fusion.{name}.{attr}"
                if key in values:
                    setattr(blk, attr, np.array(values[key], dtype=np.float64))
        if "fusion.out.w" in values:
            self.fusion.out_w = np.array(values["fusion.out.w"], dtype=np.float64)
        if "fusion.out.b" in values:
            self.fusion.out_b = np.array(values["fusion.out.b"], dtype=np.float64)
        if "head.w" in values:
            self.head_w = np.array(values["head.w"], dtype=np.float64)
        if "head.b" in values:
            self.head_b = np.array(values["head.b"], dtype=np.float64)

    def buffers(self):
        out = {}
        for name in ("cb_inv", "cb_img", "cb_cat"):
            blk = getattr(self.fusion, name)
            out[f"fusion.{name}.running_mean"] = blk.running_mean.copy()
            out[f"fusion.{name}.running_var"] = blk.running_var.copy()
        return out

    def set_buffers(self, values):
        for name in ("cb_inv", "cb_img", "cb_cat"):
            blk = getattr(self.fusion, name)
            blk.running_mean = np.array(values[f"fusion.{name}.running_mean"], dtype=np.float64)
            blk.running_var = np.array(values[f"fusion.{name}.running_var"], dtype=np.float64)

    def copy(self):
        new = ModelState(
            filters=[fp.copy() for fp in self.filters],
            fusion=FusionParams.init(np.random.default_rng(0)),
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
            flags=replace(self.flags),
            optimizer=Optimizer(self.optimizer.lr, self.optimizer.momentum, self.optimizer.weight_decay,
                                {k: v.copy() for k, v in self.optimizer.velocity.items()}),
        )
        new.set_params(self.params())
        new.set_buffers(self.buffers())
        return new

    def filter_param_count(self):
        return sum(fp.n_learnable() for fp in self.filters)

    def param_counts(self):
        filt = self.filter_param_count()
        fusion = self.fusion.n_params()
        head = self.head_w.size + self.head_b.size
        return {"filter": filt, "fusion": fusion, "module": filt + fusion, "head": head,
                "total": filt + fusion + head}


def init_state(n_classes=4, seed=0, flags=None, k=10, lam=0.1, n_harmonics=4, learn_lambda=False,
               lr=0.05, momentum=0.9, weight_decay=5e-4):
    rng = np.random.default_rng(seed)
    filters = [FilterParams.default(k=k, lam=lam, n_harmonics=n_harmonics, learn_lambda=learn_lambda)
               for _ in PAIRS]
    fusion = FusionParams.init(rng)
    head_w = rng.standard_normal((n_classes, OUT_CHANNELS)) * 0.1
    return ModelState(filters=filters, fusion=fusion, head_w=head_w, head_b=np.zeros(n_classes),
                      flags=flags or Flags(), optimizer=Optimizer(lr, momentum, weight_decay))


@dataclass
class FeatureStack:
    f_inv: np.ndarray
    f_out: np.ndarray
    imag_residual: np.ndarray


def _as_batch(images):
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"expected images of shape (b, 3, h, w), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("images contain non-finite values")
    return x


def filter_grids(state, height, width, grid=None):
    grid = grid if grid is not None else make_freq_grid(height, width)
    f = state.flags
    sums = {}
    if f.use_angular:
        for fp in state.filters:
            if fp.n_harmonics not in sums:
                sums[fp.n_harmonics] = _harmonic_sum(grid, fp.n_harmonics)
    return np.stack([
        eval_lff(grid, fp, symmetrize=f.symmetrize, use_window=f.use_window, use_angular=f.use_angular,
                 harmonics=sums.get(fp.n_harmonics)).values
        for fp in state.filters
    ]), grid


def frequency_inputs(images, flags, floor=LOG_FLOOR):
    """Spectra that the filters multiply: pair differences or per-channel log spectra."""
    logspec = dft2(log_plane(images, floor))
    if flags.use_fcr:
        return logspec[:, PAIR_A] - logspec[:, PAIR_B]
    return logspec


def invariant_features(images, state, grids=None):
    """Return ``(f_inv, imag_residual, spectra, grids, grid)`` for a batch."""
    x = _as_batch(images)
    h, w = x.shape[-2:]
    if grids is None:
        grids, grid = filter_grids(state, h, w)
    else:
        grid = None
    spectra = frequency_inputs(x, state.flags)
    z = idft2(grids[None] * spectra)
    return np.ascontiguousarray(z.real), np.max(np.abs(z.imag), axis=(2, 3)), spectra, grids, grid


def fuse(f_inv, images, fusion, training, update_buffers=True):
    """Conv{CB[Cat(CB[f_inv]; CB[images])]}; returns ``(f_out, cache)``."""
    f_inv = _as_batch(f_inv)
    images = _as_batch(images)
    if f_inv.shape != images.shape:
        raise ValueError(f"f_inv shape {f_inv.shape} does not match image shape {images.shape}")
    caches = {}
    branches = []
    for name, src in (("cb_inv", f_inv), ("cb_img", images)):
        blk = getattr(fusion, name)
        y, c_conv = nn.conv3x3(src, blk.w)
        y, c_bn, rm, rv = nn.batchnorm(y, blk.gamma, blk.beta, blk.running_mean, blk.running_var, training)
        if training and update_buffers:
            blk.running_mean, blk.running_var = rm, rv
        caches[name] = (c_conv, c_bn)
        branches.append(y)
    cat = np.concatenate(branches, axis=1)
    blk = fusion.cb_cat
    y, c_conv = nn.conv3x3(cat, blk.w)
    y, c_bn, rm, rv = nn.batchnorm(y, blk.gamma, blk.beta, blk.running_mean, blk.running_var, training)
    if training and update_buffers:
        blk.running_mean, blk.running_var = rm, rv
    caches["cb_cat"] = (c_conv, c_bn)
    out, caches["out"] = nn.conv3x3(y, fusion.out_w, fusion.out_b)
    return out, caches


def fuse_backward(dout, caches):
    grads = {}
    dy, grads["fusion.out.w"], grads["fusion.out.b"] = nn.conv3x3_backward(dout, caches["out"])
    c_conv, c_bn = caches["cb_cat"]
    dy, grads["fusion.cb_cat.gamma"], grads["fusion.cb_cat.beta"] = nn.batchnorm_backward(dy, c_bn)
    dcat, grads["fusion.cb_cat.w"], _ = nn.conv3x3_backward(dy, c_conv)
    dsrc = {}
    for name, sl in (("cb_inv", slice(0, CB_WIDTH)), ("cb_img", slice(CB_WIDTH, CAT_WIDTH))):
        c_conv, c_bn = caches[name]
        d, grads[f"fusion.{name}.gamma"], grads[f"fusion.{name}.beta"] = nn.batchnorm_backward(dcat[:, sl], c_bn)
        dsrc[name], grads[f"fusion.{name}.w"], _ = nn.conv3x3_backward(d, c_conv)
    return grads, dsrc["cb_inv"]


def _folded(blk):
    # eval-mode BN is a per-channel affine map; fold it into the conv
    scale = blk.gamma / np.sqrt(blk.running_var + nn.BN_EPS)
    return blk.w * scale[:, None, None, None], blk.beta - scale * blk.running_mean


def fuse_inference(f_inv, images, fusion):
    """Eval-mode :func:`fuse` with batch norm folded into the convolutions (no cache).

    The two input branches run as one block-diagonal 6 -> 16 convolution.
    """
    w_inv, b_inv = _folded(fusion.cb_inv)
    w_img, b_img = _folded(fusion.cb_img)
    w_in = np.zeros((CAT_WIDTH, 6, 3, 3))
    w_in[:CB_WIDTH, :3] = w_inv
    w_in[CB_WIDTH:, 3:] = w_img
    layers = [(w_in, np.concatenate([b_inv, b_img])), _folded(fusion.cb_cat), (fusion.out_w, fusion.out_b)]
    return nn.conv3x3_chain(np.concatenate([f_inv, images], axis=1), layers)


def forward_features(image, state, training=False):
    """F_inv and F_out for one image ``(3, h, w)`` or a batch."""
    x = _as_batch(image)
    if state.flags.frontend == "raw":
        f_inv, resid = x.copy(), np.zeros(x.shape[:2])
    else:
        f_inv, resid, _, _, _ = invariant_features(x, state)
    if training:
        f_out, _ = fuse(f_inv, x, state.fusion, True, update_buffers=False)
    else:
        f_out = fuse_inference(f_inv, x, state.fusion)
    if np.ndim(image) == 3:
        return FeatureStack(f_inv[0], f_out[0], resid[0])
    return FeatureStack(f_inv, f_out, resid)


def head_forward(f_out, head_w, head_b):
    act = nn.softplus(f_out)
    pooled = act.mean(axis=(2, 3))
    return pooled @ head_w.T + head_b, (f_out, pooled)


def head_backward(dlogits, cache, head_w):
    f_out, pooled = cache
    grads = {"head.w": dlogits.T @ pooled, "head.b": dlogits.sum(axis=0)}
    dpooled = dlogits @ head_w
    hw = f_out.shape[2] * f_out.shape[3]
    dout = nn.sigmoid(f_out) * (dpooled[:, :, None, None] / hw)
    return grads, dout


def loss_and_grads(images, labels, state, training=True, update_buffers=True, need_grads=True):
    """Cross-entropy loss, logits and (optionally) gradients for every learnable scalar."""
    x = _as_batch(images)
    labels = np.asarray(labels, dtype=np.int64)
    raw = state.flags.frontend == "raw"
    if raw:
        f_inv = x
    else:
        f_inv, _, spectra, grids, grid = invariant_features(x, state)
    f_out, fcache = fuse(f_inv, x, state.fusion, training, update_buffers=update_buffers)
    logits, hcache = head_forward(f_out, state.head_w, state.head_b)
    loss, dlogits = nn.softmax_cross_entropy(logits, labels)
    if not need_grads:
        return loss, logits, None
    grads, dout = head_backward(dlogits, hcache, state.head_w)
    fgrads, df_inv = fuse_backward(dout, fcache)
    grads.update(fgrads)
    if not raw:
        # f_inv = Re(ifft2(G * D) * hw)  =>  dL/dG = Re(D * conj(fft2(dL/df_inv)))
        dgrid = np.sum(np.real(spectra * np.conj(np.fft.fft2(df_inv))), axis=0)
        f = state.flags
        for pair, fp, up in zip(PAIRS, state.filters, dgrid):
            g = grad_params(grid, fp, up, symmetrize=f.symmetrize, use_window=f.use_window,
                            use_angular=f.use_angular)
            pre = f"filter.{pair.name}."
            grads[pre + "log_sigma_w"] = np.array(g["log_sigma_w"])
            grads[pre + "log_sigma_h"] = np.array(g["log_sigma_h"])
            grads[pre + "a"] = g["a"]
            if fp.learn_lambda:
                grads[pre + "lam"] = np.array(g.get("lam", 0.0))
    else:
        for pair, fp in zip(PAIRS, state.filters):
            pre = f"filter.{pair.name}."
            grads[pre + "log_sigma_w"] = np.array(0.0)
            grads[pre + "log_sigma_h"] = np.array(0.0)
            grads[pre + "a"] = np.zeros_like(fp.a)
            if fp.learn_lambda:
                grads[pre + "lam"] = np.array(0.0)
    return loss, logits, grads


def _decays(name):
    return name.endswith(".w") and (name.startswith("fusion.") or name.startswith("head."))


def sgd_step(state, grads):
    """SGD with momentum; weight decay on fusion/head kernels only."""
    opt = state.optimizer
    if opt.lr == 0:
        return
    params = state.params()
    for name, p in params.items():
        g = grads[name]
        if _decays(name):
            g = g + opt.weight_decay * p
        v = opt.velocity.get(name)
        v = g if v is None else opt.momentum * v + g
        opt.velocity[name] = v
        params[name] = p - opt.lr * v
    state.set_params(params)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.05
    seed: int = 0
    invariance_samples: int = 32


def clamp_free_gains(image, floor=LOG_FLOOR, rng=None):
    """Per-channel gains that keep every pixel inside ``[floor, 1]``.

    Picks points at 10% / 90% / 50% of each channel's admissible log range,
    or uniformly inside it when ``rng`` is given.
    """
    x = np.asarray(image, dtype=np.float64)
    lo = np.log(floor / x.reshape(3, -1).min(axis=1))
    hi = np.log(1.0 / x.reshape(3, -1).max(axis=1))
    t = rng.uniform(0.1, 0.9, size=3) if rng is not None else np.array([0.9, 0.1, 0.5])
    return np.exp(lo + t * (hi - lo))


def invariance_score(image, state, gains):
    """Normalized max-abs change of the first-branch features under channel gains."""
    x = np.asarray(image, dtype=np.float64)
    g = np.asarray(gains, dtype=np.float64)
    gained = x * g[:, None, None]
    if gained.max() > 1.0 or gained.min() < LOG_FLOOR:
        warnings.warn("gained image leaves the clamp-free range; invariance is only approximate",
                      RuntimeWarning, stacklevel=2)
        gained = np.clip(gained, LOG_FLOOR, 1.0)
    if state.flags.frontend == "raw":
        f0, f1 = x, gained
    else:
        f0 = invariant_features(x, state)[0][0]
        f1 = invariant_features(gained, state)[0][0]
    diff = float(np.max(np.abs(f1 - f0)))
    denom = float(np.max(np.abs(f0)))
    # features that are zero up to rounding (e.g. constant channel ratios) are
    # compared in absolute terms instead of dividing noise by noise
    return diff / denom if denom > SCORE_FLOOR else diff


def _stack(samples):
    return np.stack([s.image for s in samples]), np.array([s.label for s in samples], dtype=np.int64)


def evaluate(samples, state, batch_size=64, invariance_samples=None):
    """Accuracy, mean loss and mean invariance score with BN in running-stats mode."""
    if not samples:
        return {"n": 0, "accuracy": float("nan"), "loss": float("nan"), "invariance": float("nan")}
    images, labels = _stack(samples)
    correct = 0
    total_loss = 0.0
    for i in range(0, len(samples), batch_size):
        xb, yb = images[i:i + batch_size], labels[i:i + batch_size]
        loss, logits, _ = loss_and_grads(xb, yb, state, training=False, need_grads=False)
        total_loss += loss * len(yb)
        correct += int(np.sum(np.argmax(logits, axis=1) == yb))
    n_inv = len(samples) if invariance_samples is None else min(invariance_samples, len(samples))
    inv = [invariance_score(images[i], state, clamp_free_gains(images[i])) for i in range(n_inv)]
    return {
        "n": len(samples),
        "accuracy": correct / len(samples),
        "loss": total_loss / len(samples),
        "invariance": float(np.mean(inv)) if inv else float("nan"),
    }


@dataclass
class TrainReport:
    records: list = field(default_factory=list)

    def to_jsonl(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def deterministic_view(self):
        """Records without wall-clock timings."""
        return [{k: v for k, v in r.items() if k != "wall_ms"} for r in self.records]

    @property
    def final(self):
        return self.records[-1] if self.records else None


def train_toy(dataset, state, config, log=None):
    """Train ``state`` in place on ``dataset.train``; report one record per epoch."""
    train = dataset.train
    test = dataset.test
    images, labels = _stack(train)
    state.optimizer.lr = config.lr
    report = TrainReport()
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng((config.seed, epoch)).permutation(len(train))
        losses, correct, seen = [], 0, 0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            if len(idx) < 2:
                continue
            loss, logits, grads = loss_and_grads(images[idx], labels[idx], state, training=True)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            sgd_step(state, grads)
            losses.append(loss * len(idx))
            correct += int(np.sum(np.argmax(logits, axis=1) == labels[idx]))
            seen += len(idx)
        train_loss = float(np.sum(losses) / seen)
        if not np.isfinite(train_loss):
            raise TrainingDiverged(epoch, train_loss)
        metrics = evaluate(test, state, invariance_samples=config.invariance_samples)
        record = {
            "epoch": epoch,
            "train_loss": train_loss,
            "train_acc": correct / seen,
            "test_acc": metrics["accuracy"],
            "test_loss": metrics["loss"],
            "invariance_mean": metrics["invariance"],
            "wall_ms": round(1000.0 * (time.perf_counter() - t0), 3),
        }
        report.records.append(record)
        if log is not None:
            log(record)
    return report


def save_checkpoint(state, path):
    """One JSON manifest plus one FRBT tensor per parameter/buffer block."""
    root = Path(path)
    (root / "tensors").mkdir(parents=True, exist_ok=True)
    tensors = {**state.params(), **state.buffers()}
    files = {}
    for name, arr in sorted(tensors.items()):
        if name.startswith("filter."):
            continue
        rel = f"tensors/{name}.frbt"
        frbt.save(root / rel, arr)
        files[name] = rel
    manifest = {
        "format": "frbnet-checkpoint/1",
        "flags": vars(state.flags),
        "filters": {p.name: fp.to_dict() for p, fp in zip(PAIRS, state.filters)},
        "optimizer": {"lr": state.optimizer.lr, "momentum": state.optimizer.momentum,
                      "weight_decay": state.optimizer.weight_decay},
        "n_classes": state.n_classes,
        "tensors": files,
        "param_counts": state.param_counts(),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return root


REQUIRED_TENSORS = (
    [f"fusion.{b}.{a}" for b in ("cb_inv", "cb_img", "cb_cat")
     for a in ("w", "gamma", "beta", "running_mean", "running_var")]
    + ["fusion.out.w", "fusion.out.b", "head.w", "head.b"]
)


def load_checkpoint(path):
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("flags", "filters", "tensors", "n_classes"):
        if key not in manifest:
            raise KeyError(f"checkpoint manifest missing key {key!r}")
    missing = [t for t in REQUIRED_TENSORS if t not in manifest["tensors"]]
    if missing:
        raise KeyError(f"checkpoint missing tensor {missing[0]!r}")
    for p in PAIRS:
        if p.name not in manifest["filters"]:
            raise KeyError(f"checkpoint missing filter params for pair {p.name!r}")
    filters = [FilterParams.from_dict(manifest["filters"][p.name]) for p in PAIRS]
    state = init_state(n_classes=int(manifest["n_classes"]), flags=Flags(**manifest["flags"]),
                       k=filters[0].k)
    state.filters = filters
    values = {name: frbt.load(root / rel) for name, rel in manifest["tensors"].items()}
    state.set_params(values)
    state.set_buffers(values)
    opt = manifest.get("optimizer", {})
    state.optimizer = Optimizer(opt.get("lr", 0.05), opt.get("momentum", 0.9), opt.get("weight_decay", 5e-4))
    return state
