"""8-bit PNG export for images, feature planes and filter heat maps."""

import json
from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(values):
    """Scale [0, 1] values by 255 and round half-to-even."""
    return np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_rgb_png(path, image):
    """Write a ``(3, h, w)`` image in [0, 1] as an RGB PNG."""
    img = np.asarray(image)
    Image.fromarray(to_uint8(np.moveaxis(img, 0, -1))).save(path)


def minmax_normalize(plane, atol=1e-12):
    """Map ``plane`` onto [0, 1]; a spread within ``atol`` (rounding noise) maps to all zeros."""
    p = np.asarray(plane, dtype=np.float64)
    lo, hi = float(p.min()), float(p.max())
    if hi - lo > atol:
        return (p - lo) / (hi - lo), lo, hi
    return np.zeros_like(p), lo, hi


def save_plane_png(path, plane, sidecar=True):
    """Min-max normalized grayscale PNG; (min, max) go to ``<path>.json``."""
    norm, lo, hi = minmax_normalize(plane)
    Image.fromarray(to_uint8(norm)).save(path)
    if sidecar:
        Path(str(path) + ".json").write_text(json.dumps({"min": lo, "max": hi}))
    return lo, hi
