"""Synthetic low-light scenes with a known decomposition.

Every image is built as ``I_C = L_C * rho_C * (1 + H_C)``: ``rho`` is a
reflectance map holding one coloured shape on a grey background, ``L`` a smooth
positive shading field scaled by a per-channel gain, and ``H`` a sparse sum of
Gaussian highlight blobs.  The test split draws gains and highlight
amplitudes from disjoint, harsher ranges than the train split.
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import frbt
from .fcr import LOG_FLOOR
from .spectral import normalized_freqs

SHAPES = ("disk", "square", "triangle", "ring", "cross", "diamond")
PALETTE = (
    (0.90, 0.30, 0.25),
    (0.30, 0.85, 0.30),
    (0.30, 0.35, 0.90),
    (0.85, 0.80, 0.25),
    (0.80, 0.30, 0.85),
    (0.25, 0.80, 0.85),
)


@dataclass
class SynthConfig:
    size: int = 64
    n_classes: int = 4
    n_samples: int = 800
    train_fraction: float = 0.75
    shading_scale: float = 12.0
    shading_range: tuple = (0.3, 1.0)
    shading_contrast: float = 0.25
    channel_mix: float = 0.2
    train_gain_range: tuple = (0.35, 1.0)
    test_gain_range: tuple = (0.1, 0.3)
    blob_count_range: tuple = (1, 3)
    blob_radius_range: tuple = (2.0, 5.0)
    train_highlight_range: tuple = (0.0, 0.3)
    test_highlight_range: tuple = (0.3, 0.6)
    highlight_jitter: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("shading_range", "train_gain_range", "test_gain_range", "blob_count_range",
                     "blob_radius_range", "train_highlight_range", "test_highlight_range"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        if self.size < 8:
            raise ValueError(f"image size must be >= 8, got {self.size}")
        if not 1 <= self.n_classes <= len(SHAPES):
            raise ValueError(f"n_classes must be in [1, {len(SHAPES)}], got {self.n_classes}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.shading_scale < 2:
            raise ValueError(f"shading_scale must be >= 2 pixels, got {self.shading_scale}")
        lo, hi = self.shading_range
        if not 0 < lo <= hi:
            raise ValueError(f"shading_range must be positive and ordered, got {self.shading_range}")
        for name in ("train_gain_range", "test_gain_range"):
            glo, ghi = getattr(self, name)
            if not 0 < glo <= ghi:
                raise ValueError(f"{name} must be positive and ordered, got {(glo, ghi)}")
        for name in ("train_highlight_range", "test_highlight_range"):
            alo, ahi = getattr(self, name)
            if not 0 <= alo <= ahi:
                raise ValueError(f"{name} must be non-negative and ordered, got {(alo, ahi)}")
            if ahi >= 1:
                raise ValueError(f"{name} upper bound must be < 1 (highlight strength), got {ahi}")
        tr, te = self.train_gain_range, self.test_gain_range
        if not (te[1] < tr[0] or tr[1] < te[0]):
            raise ValueError("train and test gain ranges must be disjoint")
        if not 0 <= self.highlight_jitter < 1:
            raise ValueError("highlight_jitter must be in [0, 1)")
        if not 0 <= self.channel_mix <= 1:
            raise ValueError("channel_mix must be in [0, 1]")

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @property
    def n_train(self):
        return int(round(self.n_samples * self.train_fraction))


@dataclass
class SceneDecomposition:
    reflectance: np.ndarray
    shading: np.ndarray
    highlight: np.ndarray
    label: int


@dataclass
class Sample:
    index: int
    split: str
    image: np.ndarray
    label: int
    decomposition: SceneDecomposition
    gains: tuple
    clamp_count: int = 0


@dataclass
class Dataset:
    config: SynthConfig
    samples: list = field(default_factory=list)

    @property
    def train(self):
        return [s for s in self.samples if s.split == "train"]

    @property
    def test(self):
        return [s for s in self.samples if s.split == "test"]


def _rng(seed):
    return np.random.default_rng(seed)


def _shape_mask(shape, size, rng):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    radius = rng.uniform(0.18, 0.28) * size
    margin = radius + 1
    cy, cx = rng.uniform(margin, size - margin, size=2)
    angle = rng.uniform(0, 2 * np.pi)
    dy, dx = yy - cy, xx - cx
    # rotated frame
    ry = dy * np.cos(angle) - dx * np.sin(angle)
    rx = dy * np.sin(angle) + dx * np.cos(angle)
    if shape == "disk":
        return dy**2 + dx**2 <= radius**2
    if shape == "ring":
        d2 = dy**2 + dx**2
        return (d2 <= radius**2) & (d2 >= (0.55 * radius) ** 2)
    if shape == "square":
        half = radius / np.sqrt(2) * 1.1
        return (np.abs(ry) <= half) & (np.abs(rx) <= half)
    if shape == "diamond":
        return np.abs(ry) / radius + np.abs(rx) / (0.6 * radius) <= 1
    if shape == "cross":
        arm = 0.35 * radius
        return ((np.abs(ry) <= radius) & (np.abs(rx) <= arm)) | ((np.abs(rx) <= radius) & (np.abs(ry) <= arm))
    if shape == "triangle":
        # equilateral triangle inscribed in the circle of the given radius
        inside = np.ones_like(ry, dtype=bool)
        for k in range(3):
            a = angle + 2 * np.pi * k / 3
            inside &= (dy * np.cos(a) + dx * np.sin(a)) <= radius / 2
        return inside
    raise ValueError(f"unknown shape {shape!r}")


def make_reflectance(config, class_id, seed):
    """Grey background plus one class-coloured shape; returns ``(rho, label)``."""
    if not 0 <= class_id < config.n_classes:
        raise ValueError(f"class_id must be in [0, {config.n_classes}), got {class_id}")
    rng = _rng(seed)
    n = config.size
    background = rng.uniform(0.3, 0.5) + rng.uniform(-0.02, 0.02, size=3)
    colour = np.asarray(PALETTE[class_id]) + rng.uniform(-0.05, 0.05, size=3)
    mask = _shape_mask(SHAPES[class_id], n, rng)
    rho = np.empty((3, n, n))
    for c in range(3):
        rho[c] = np.where(mask, colour[c], background[c])
    return np.clip(rho, LOG_FLOOR, 1.0), class_id


def gaussian_blur_periodic(plane, sigma):
    """Circular Gaussian blur through the frequency domain."""
    h, w = plane.shape
    fy = normalized_freqs(h)[:, None]
    fx = normalized_freqs(w)[None, :]
    transfer = np.exp(-2.0 * np.pi**2 * sigma**2 * (fy**2 + fx**2))
    return np.fft.ifft2(np.fft.fft2(plane) * transfer).real


def make_shading(config, seed, gains=(1.0, 1.0, 1.0), scale=None, value_range=None):
    """Smooth positive shading, shape ``(3, h, w)``.

    Zero-mean white noise is blurred to ``scale`` pixels, mapped by a fixed
    affine rule into ``value_range`` (clamped), and multiplied by per-channel
    ``gains``.  A share ``channel_mix`` of each channel comes from its own
    noise field, the rest is common to all three.
    """
    scale = config.shading_scale if scale is None else scale
    if scale < 2:
        raise ValueError(f"shading scale must be >= 2 pixels, got {scale}")
    lo, hi = config.shading_range if value_range is None else value_range
    rng = _rng(seed)
    n = config.size
    noise = rng.standard_normal((4, n, n))
    noise -= noise.mean(axis=(1, 2), keepdims=True)
    blurred = np.stack([gaussian_blur_periodic(p, scale) for p in noise])
    # white noise blurred at sigma has std ~ 1 / (2 sqrt(pi) sigma)
    z = blurred * (2.0 * np.sqrt(np.pi) * scale)
    mix = config.channel_mix
    out = np.empty((3, n, n))
    for c in range(3):
        t = 0.5 + config.shading_contrast * ((1 - mix) * z[0] + mix * z[c + 1])
        out[c] = lo + (hi - lo) * np.clip(t, 0.0, 1.0)
    return out * np.asarray(gains, dtype=np.float64)[:, None, None]


def make_highlight(config, seed, amplitude_range=None, n_blobs=None, jitter=None, saturate=True):
    """Sum of isotropic Gaussian blobs per channel, shape ``(3, h, w)``.

    Blob centres sit on pixel centres; channels share geometry and differ by
    an amplitude factor in ``[1 - jitter, 1]``.  Overlapping blobs saturate just
    below the amplitude upper bound so the field stays in ``[0, hi)``;
    ``saturate=False`` keeps the raw sum (used for amplitude-scaling checks).
    """
    lo, hi = config.train_highlight_range if amplitude_range is None else amplitude_range
    if hi >= 1:
        raise ValueError(f"highlight amplitude upper bound must be < 1, got {hi}")
    jitter = config.highlight_jitter if jitter is None else jitter
    rng = _rng(seed)
    n = config.size
    if n_blobs is None:
        n_blobs = int(rng.integers(config.blob_count_range[0], config.blob_count_range[1] + 1))
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    out = np.zeros((3, n, n))
    for _ in range(n_blobs):
        cy, cx = rng.integers(0, n, size=2)
        sigma = rng.uniform(*config.blob_radius_range)
        amp = rng.uniform(lo, hi)
        per_channel = amp * (1.0 - jitter * rng.uniform(0.0, 1.0, size=3))
        g = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
        out += per_channel[:, None, None] * g[None]
    if saturate and n_blobs > 1 and hi > 0:
        out = np.minimum(out, np.nextafter(hi, 0.0))
    return out


def compose_image(decomp):
    """Return ``(image, clamp_count)`` with ``I = L * rho * (1 + H)`` clamped to [1/255, 1]."""
    raw = decomp.shading * decomp.reflectance * (1.0 + decomp.highlight)
    clamp_count = int(np.count_nonzero((raw > 1.0) | (raw < LOG_FLOOR)))
    if clamp_count:
        raw = np.clip(raw, LOG_FLOOR, 1.0)
    return raw, clamp_count


def balanced_labels(n, n_classes, seed, start=0):
    """Shuffled labels ``(start + i) % n_classes`` for ``i < n``.

    Splitting one label cycle across train and test keeps the overall class
    counts exact whenever ``n_classes`` divides the dataset size.
    """
    labels = (start + np.arange(n)) % n_classes
    return _rng(seed).permutation(labels)


def make_sample(config, index, split, label):
    base = (config.seed, index)
    gain_range = config.train_gain_range if split == "train" else config.test_gain_range
    amp_range = config.train_highlight_range if split == "train" else config.test_highlight_range
    gains = tuple(float(g) for g in _rng(base + (0,)).uniform(*gain_range, size=3))
    rho, label = make_reflectance(config, int(label), base + (1,))
    shading = make_shading(config, base + (2,), gains=gains)
    highlight = make_highlight(config, base + (3,), amplitude_range=amp_range)
    decomp = SceneDecomposition(reflectance=rho, shading=shading, highlight=highlight, label=label)
    image, clamp_count = compose_image(decomp)
    return Sample(index=index, split=split, image=image, label=label, decomposition=decomp,
                  gains=gains, clamp_count=clamp_count)


def gen_dataset(config):
    """Generate the full train/test set; sample ``i`` depends only on ``(seed, i)``."""
    n_train = config.n_train
    n_test = config.n_samples - n_train
    train_labels = balanced_labels(n_train, config.n_classes, (config.seed, 10**6, 0))
    test_labels = balanced_labels(n_test, config.n_classes, (config.seed, 10**6, 1), start=n_train) if n_test else []
    samples = [make_sample(config, i, "train", lab) for i, lab in enumerate(train_labels)]
    samples += [make_sample(config, n_train + j, "test", lab) for j, lab in enumerate(test_labels)]
    return Dataset(config=config, samples=samples)


def stack_images(samples):
    return np.stack([s.image for s in samples]), np.array([s.label for s in samples], dtype=np.int64)


def save_dataset(dataset, path, png=False):
    """Write ``meta.json``, ``labels.csv`` and per-sample FRBT tensors under ``path``."""
    from .imageio import save_rgb_png

    root = Path(path)
    (root / "samples").mkdir(parents=True, exist_ok=True)
    meta = {
        "format": "frbnet-synth/1",
        "config": dataset.config.to_dict(),
        "splits": {
            "train": [s.index for s in dataset.train],
            "test": [s.index for s in dataset.test],
        },
        "seeds": {str(s.index): [dataset.config.seed, s.index] for s in dataset.samples},
        "gains": {str(s.index): list(s.gains) for s in dataset.samples},
        "clamp_counts": {str(s.index): s.clamp_count for s in dataset.samples},
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    with open(root / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "label"])
        for s in dataset.samples:
            writer.writerow([s.index, s.label])
    for s in dataset.samples:
        stem = root / "samples" / f"{s.index:05d}"
        frbt.save(f"{stem}_image.frbt", s.image)
        frbt.save(f"{stem}_reflectance.frbt", s.decomposition.reflectance)
        frbt.save(f"{stem}_shading.frbt", s.decomposition.shading)
        frbt.save(f"{stem}_highlight.frbt", s.decomposition.highlight)
        if png:
            (root / "png").mkdir(exist_ok=True)
            save_rgb_png(root / "png" / f"{s.index:05d}.png", s.image)
    return root


def load_dataset(path):
    root = Path(path)
    if not (root / "meta.json").is_file():
        raise FileNotFoundError(f"no dataset at {root} (meta.json missing)")
    meta = json.loads((root / "meta.json").read_text())
    config = SynthConfig.from_dict(meta["config"])
    labels = {}
    with open(root / "labels.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            labels[int(row["index"])] = int(row["label"])
    samples = []
    for split in ("train", "test"):
        for idx in meta["splits"][split]:
            stem = root / "samples" / f"{idx:05d}"
            decomp = SceneDecomposition(
                reflectance=frbt.load(f"{stem}_reflectance.frbt"),
                shading=frbt.load(f"{stem}_shading.frbt"),
                highlight=frbt.load(f"{stem}_highlight.frbt"),
                label=labels[idx],
            )
            samples.append(Sample(
                index=idx, split=split, image=frbt.load(f"{stem}_image.frbt"), label=labels[idx],
                decomposition=decomp, gains=tuple(meta["gains"][str(idx)]),
                clamp_count=meta["clamp_counts"][str(idx)],
            ))
    samples.sort(key=lambda s: s.index)
    return Dataset(config=config, samples=samples)
