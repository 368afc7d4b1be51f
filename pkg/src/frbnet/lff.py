"""Learnable frequency-domain filter.

The gain at each bin is ``W_g * Phi * M``:

* ``W_g = exp(-r^2 / sigma_w^2)`` with the DC bin forced to 0,
* ``Phi = sum_k a_k exp(-(r - mu_k)^2 / (2 sigma_h^2))``,
* ``M = 1 + lambda * sum_{n=1..N} (cos n theta + sin n theta)``.

The bandwidths are stored as logs so any real value is a valid state.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .spectral import symmetrize_real_grid

DEFAULT_K = 10
DEFAULT_LAMBDA = 0.1
DEFAULT_N = 4
DEFAULT_SIGMA_W = 0.3


def default_mu(k):
    if k < 1:
        raise ValueError(f"need at least one radial basis, got K={k}")
    if k == 1:
        return np.zeros(1)
    return np.linspace(0.0, 1.0, k)


@dataclass
class FilterParams:
    log_sigma_w: float
    log_sigma_h: float
    a: np.ndarray
    mu: np.ndarray
    lam: float = DEFAULT_LAMBDA
    n_harmonics: int = DEFAULT_N
    learn_lambda: bool = False

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64).copy()
        self.mu = np.asarray(self.mu, dtype=np.float64).copy()
        if self.a.shape != self.mu.shape or self.a.ndim != 1 or self.a.size < 1:
            raise ValueError("a and mu must be 1D arrays of the same length K >= 1")
        if self.mu.size > 1 and not np.all(np.diff(self.mu) > 0):
            raise ValueError("mu must be strictly increasing")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.n_harmonics < 1:
            raise ValueError(f"N must be a positive integer, got {self.n_harmonics}")

    @classmethod
    def default(cls, k=DEFAULT_K, lam=DEFAULT_LAMBDA, n_harmonics=DEFAULT_N, learn_lambda=False):
        mu = default_mu(k)
        spacing = 1.0 / (k - 1) if k > 1 else 1.0
        return cls(
            log_sigma_w=float(np.log(DEFAULT_SIGMA_W)),
            log_sigma_h=float(np.log(0.5 * spacing)),
            a=np.ones(k),
            mu=mu,
            lam=lam,
            n_harmonics=n_harmonics,
            learn_lambda=learn_lambda,
        )

    @property
    def k(self):
        return self.a.size

    @property
    def sigma_w(self):
        return float(np.exp(self.log_sigma_w))

    @property
    def sigma_h(self):
        return float(np.exp(self.log_sigma_h))

    def n_learnable(self):
        return self.k + 2 + int(self.learn_lambda)

    def copy(self):
        return FilterParams(self.log_sigma_w, self.log_sigma_h, self.a, self.mu,
                            self.lam, self.n_harmonics, self.learn_lambda)

    def to_dict(self):
        return {
            "log_sigma_w": self.log_sigma_w,
            "log_sigma_h": self.log_sigma_h,
            "a": self.a.tolist(),
            "mu": self.mu.tolist(),
            "lambda": self.lam,
            "K": self.k,
            "N": self.n_harmonics,
            "learn_lambda": self.learn_lambda,
        }

    @classmethod
    def from_dict(cls, d):
        missing = [key for key in ("log_sigma_w", "log_sigma_h", "a", "mu") if key not in d]
        if missing:
            raise KeyError(f"filter params missing key(s): {', '.join(missing)}")
        return cls(
            log_sigma_w=float(d["log_sigma_w"]),
            log_sigma_h=float(d["log_sigma_h"]),
            a=d["a"],
            mu=d["mu"],
            lam=float(d.get("lambda", DEFAULT_LAMBDA)),
            n_harmonics=int(d.get("N", DEFAULT_N)),
            learn_lambda=bool(d.get("learn_lambda", False)),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class FilterGrid:
    values: np.ndarray
    symmetrized: bool = field(default=True)


def eval_window(grid, params):
    w = np.exp(-grid.r**2 / params.sigma_w**2)
    w[0, 0] = 0.0
    return w


def eval_rbf_bank(grid, params):
    """Stack of K radial Gaussians, shape ``(K, h, w)``."""
    d = grid.r[None, :, :] - params.mu[:, None, None]
    return np.exp(-(d**2) / (2.0 * params.sigma_h**2))


def eval_radial(grid, params, bank=None):
    if bank is None:
        bank = eval_rbf_bank(grid, params)
    return np.tensordot(params.a, bank, axes=1)


def _harmonic_sum(grid, n_harmonics):
    # sum_n cos(n t) + sin(n t) via powers of exp(i t): two trig calls instead of 2N
    step = np.exp(1j * grid.theta)
    z = step.copy()
    acc = np.zeros(grid.theta.shape)
    for n in range(n_harmonics):
        if n:
            z *= step
        acc += z.real + z.imag
    return acc


def _fold_index(n):
    # bin k and bin n-k have the same |frequency|
    k = np.arange(n)
    return np.minimum(k, n - k)


def _radial_window(grid, params, use_window=True):
    """``Phi(r) * W_g(r)`` evaluated on one quadrant and mirrored out.

    Both factors depend only on ``r``, which is even in ``u`` and ``v``, so the
    quadrant values are exact copies of the full-grid ones.
    """
    fu, fv = _fold_index(grid.shape[0]), _fold_index(grid.shape[1])
    rq = grid.r[: fu.max() + 1, : fv.max() + 1]
    if not np.array_equal(rq[fu[:, None], fv[None, :]], grid.r):
        # not a standard frequency grid: evaluate everywhere
        out = eval_radial(grid, params)
        return out * eval_window(grid, params) if use_window else out
    d = rq[None, :, :] - params.mu[:, None, None]
    q = np.tensordot(params.a, np.exp(-(d**2) / (2.0 * params.sigma_h**2)), axes=1)
    if use_window:
        wq = np.exp(-rq**2 / params.sigma_w**2)
        wq[0, 0] = 0.0
        q = q * wq
    return q[fu[:, None], fv[None, :]]


def eval_angular(grid, params, harmonics=None):
    """``1 + lambda * sum_n (cos n theta + sin n theta)``; ``harmonics`` may carry a precomputed sum."""
    if harmonics is None:
        harmonics = _harmonic_sum(grid, params.n_harmonics)
    return 1.0 + params.lam * harmonics


def eval_lff(grid, params, symmetrize=True, use_window=True, use_angular=True, harmonics=None):
    """Evaluate the filter gain grid.

    ``use_window=False`` drops the zero-DC window (and with it the DC zero);
    ``use_angular=False`` sets the angular factor to 1.
    """
    g = _radial_window(grid, params, use_window)
    if use_angular:
        g = g * eval_angular(grid, params, harmonics)
    if symmetrize:
        g = symmetrize_real_grid(g)
    return FilterGrid(values=g, symmetrized=symmetrize)


def grad_params(grid, params, upstream, symmetrize=True, use_window=True, use_angular=True):
    """Contract ``dLoss/dLFF`` into gradients of the stored filter parameters.

    Returns a dict with ``log_sigma_w``, ``log_sigma_h``, ``a`` (length K) and,
    when lambda is learnable and the angular factor active, ``lam``.
    """
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != grid.shape:
        raise ValueError(f"upstream shape {up.shape} does not match grid {grid.shape}")
    if symmetrize:
        up = symmetrize_real_grid(up)

    r = grid.r
    bank = eval_rbf_bank(grid, params)
    phi = np.tensordot(params.a, bank, axes=1)
    m = eval_angular(grid, params) if use_angular else np.ones_like(r)
    w = eval_window(grid, params) if use_window else np.ones_like(r)

    out = {}
    sw = params.sigma_w
    if use_window:
        dw = w * (2.0 * r**2 / sw**3)
        out["log_sigma_w"] = float(np.sum(up * dw * phi * m)) * sw
    else:
        out["log_sigma_w"] = 0.0

    wm_up = up * w * m
    out["a"] = np.tensordot(bank, wm_up, axes=([1, 2], [0, 1]))

    sh = params.sigma_h
    d2 = (r[None, :, :] - params.mu[:, None, None]) ** 2
    dphi_dsh = np.tensordot(params.a, bank * d2, axes=1) / sh**3
    out["log_sigma_h"] = float(np.sum(wm_up * dphi_dsh)) * sh

    if params.learn_lambda and use_angular:
        out["lam"] = float(np.sum(up * w * phi * _harmonic_sum(grid, params.n_harmonics)))
    return out
