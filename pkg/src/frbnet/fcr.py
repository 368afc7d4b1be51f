"""Frequency-domain channel ratio and its diagnostics.

For an RGB image ``(3, h, w)`` the three cyclic pairs RG, GB, BR produce the
spectra ``dft2(log X) - dft2(log Y)``.  A per-channel global gain moves only
the DC bin of each pair, which is what the zero-DC filter removes.
"""

from enum import Enum

import numpy as np

from .spectral import as_plane, dft2

LOG_FLOOR = 1.0 / 255.0
UNDEFINED_MAG = 1e-12


class Pair(Enum):
    RG = (0, 1)
    GB = (1, 2)
    BR = (2, 0)

    @property
    def channels(self):
        return self.value


PAIRS = (Pair.RG, Pair.GB, Pair.BR)


def as_rgb(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected an RGB image of shape (3, h, w), got {img.shape}")
    for c in range(3):
        as_plane(img[c], name=f"channel {c}")
    return img


def log_plane(plane, floor=LOG_FLOOR):
    """Natural log of ``max(plane, floor)``."""
    if not floor > 0:
        raise ValueError(f"log floor must be positive, got {floor}")
    return np.log(np.maximum(np.asarray(plane, dtype=np.float64), floor))


def log_spectra(image, floor=LOG_FLOOR):
    """Per-channel spectra of the log image, shape ``(3, h, w)``."""
    return dft2(log_plane(as_rgb(image), floor))


def fcr_pairs(image, floor=LOG_FLOOR):
    """Return ``{Pair: dif spectrum}`` for the three cyclic channel pairs."""
    logs = log_spectra(image, floor)
    return {p: logs[p.channels[0]] - logs[p.channels[1]] for p in PAIRS}


def stack_pairs(pairs):
    return np.stack([pairs[p] for p in PAIRS])


def corr_coeff(spec_a, spec_b):
    """Per-bin phase correlation ``A conj(B) / (|A||B|)``.

    Returns ``(cor, defined)``; bins where either magnitude is below 1e-12
    carry no phase and are set to 0 with ``defined`` False.
    """
    a = np.asarray(spec_a, dtype=np.complex128)
    b = np.asarray(spec_b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"spectrum shapes differ: {a.shape} vs {b.shape}")
    mag = np.abs(a) * np.abs(b)
    defined = (np.abs(a) >= UNDEFINED_MAG) & (np.abs(b) >= UNDEFINED_MAG)
    cor = np.zeros_like(a)
    cor[defined] = a[defined] * np.conj(b[defined]) / mag[defined]
    return cor, defined


def residual_linearization_error(h_r, h_g):
    """Compare the exact highlight residual with its first-order form.

    Returns ``(exact, approx, err)`` where ``exact`` transforms
    ``log(1+H_R) - log(1+H_G)``, ``approx`` transforms ``H_R - H_G`` and
    ``err`` is their max-abs per-bin difference.
    """
    hr = as_plane(h_r, "H_R")
    hg = as_plane(h_g, "H_G")
    for name, h in (("H_R", hr), ("H_G", hg)):
        if h.min() < 0 or h.max() >= 1:
            raise ValueError(f"{name} must lie in [0, 1), got range [{h.min()}, {h.max()}]")
    exact = dft2(np.log1p(hr) - np.log1p(hg))
    approx = dft2(hr - hg)
    return exact, approx, float(np.max(np.abs(exact - approx)))
