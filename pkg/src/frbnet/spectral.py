"""2D DFT with 1/(wh) forward normalization, frequency coordinates, symmetry helpers.

Planes are 2D float64 arrays indexed ``[row, col]``; spectra are complex128
arrays of the same shape with DC at ``[0, 0]``.  The forward transform carries
the whole normalization so that the DC bin equals the plane mean.
"""

from dataclasses import dataclass

import numpy as np

THETA_EPS = 1e-8
R_MAX = float(np.sqrt(0.5**2 + 0.5**2))


def as_plane(data, name="plane"):
    """Validate and return ``data`` as a float64 2D array.

    Raises ``ValueError`` for wrong rank, dimensions below 2, or non-finite
    values (naming the first offending index).
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2D array, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"{name}: height and width must be >= 2, got {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name}: non-finite value {arr[idx]!r} at index {idx}")
    return arr


def _check_spectrum(spec):
    arr = np.asarray(spec)
    if arr.ndim < 2:
        raise ValueError(f"spectrum: expected at least 2 dims, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise ValueError(f"spectrum: non-finite value at index {idx}")
    return arr.astype(np.complex128, copy=False)


def dft2(plane):
    """Forward DFT normalized by 1/(h*w); DC equals the plane mean.

    Accepts a single plane or a stack ``(..., h, w)``; the transform runs over
    the last two axes.
    """
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim == 2:
        arr = as_plane(arr)
    elif not np.all(np.isfinite(arr)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise ValueError(f"plane: non-finite value at index {idx}")
    h, w = arr.shape[-2:]
    return np.fft.fft2(arr) / (h * w)


def dft2_direct(plane):
    """Reference DFT evaluated bin by bin from the defining double sum."""
    p = as_plane(plane)
    h, w = p.shape
    y = np.arange(h)[:, None]
    x = np.arange(w)[None, :]
    out = np.empty((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            out[u, v] = np.sum(p * np.exp(-2j * np.pi * (u * y / h + v * x / w))) / (h * w)
    return out


def idft2(spectrum):
    """Complex inverse of :func:`dft2` (no normalization factor)."""
    s = _check_spectrum(spectrum)
    h, w = s.shape[-2:]
    return np.fft.ifft2(s) * (h * w)


def idft2_real(spectrum):
    """Inverse transform returning ``(real_plane, imag_residual)``.

    ``imag_residual`` is the max-abs of the discarded imaginary part; it is
    ~1e-16 for Hermitian input.
    """
    z = idft2(spectrum)
    return np.ascontiguousarray(z.real), float(np.max(np.abs(z.imag)))


def reflect_index(n):
    """Index map ``k -> (n - k) mod n``."""
    return (-np.arange(n)) % n


def point_reflect(grid):
    """Return ``G[(H-u) mod H, (W-v) mod W]`` over the last two axes."""
    g = np.asarray(grid)
    h, w = g.shape[-2:]
    return g[..., reflect_index(h)[:, None], reflect_index(w)[None, :]]


def symmetrize_real_grid(grid):
    """Average a real grid with its point reflection; idempotent.

    A symmetric real gain multiplied into a Hermitian spectrum keeps it
    Hermitian, so the inverse transform stays real.  The map is self-adjoint,
    which the backward pass relies on.
    """
    g = np.asarray(grid, dtype=np.float64)
    return 0.5 * (g + point_reflect(g))


def hermitian_error(spectrum):
    """Max-abs deviation from ``S[-u,-v] = conj(S[u,v])``."""
    s = np.asarray(spectrum)
    return float(np.max(np.abs(point_reflect(s) - np.conj(s))))


@dataclass(frozen=True)
class FreqGrid:
    """Per-bin normalized coordinates for an ``height x width`` spectrum."""

    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    theta: np.ndarray

    @property
    def shape(self):
        return self.r.shape


def normalized_freqs(n):
    """Bin k -> k/n for k < n/2, else (k - n)/n; values in [-0.5, 0.5)."""
    k = np.arange(n, dtype=np.float64)
    return np.where(k < n / 2, k / n, (k - n) / n)


def make_freq_grid(height, width):
    if height < 2 or width < 2:
        raise ValueError(f"frequency grid needs height, width >= 2, got {(height, width)}")
    un = normalized_freqs(height)[:, None] * np.ones((1, width))
    vn = normalized_freqs(width)[None, :] * np.ones((height, 1))
    r = np.sqrt(un**2 + vn**2) / R_MAX
    # single-argument arctan of the ratio, not arctan2
    theta = np.arctan(vn / (un + THETA_EPS))
    for a in (un, vn, r, theta):
        a.setflags(write=False)
    return FreqGrid(u=un, v=vn, r=r, theta=theta)
