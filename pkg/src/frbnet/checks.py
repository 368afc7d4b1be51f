"""Numerical self-checks shared by ``frbnet check`` and the acceptance tests.

Each check returns a :class:`CheckResult` holding the measured value, the
tolerance it is compared against and the wall time.
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .fcr import PAIRS, fcr_pairs, residual_linearization_error
from .lff import FilterParams, default_mu, eval_lff, grad_params
from .pipeline import (Flags, forward_features, init_state, invariance_score, invariant_features,
                       loss_and_grads)
from .spectral import dft2, dft2_direct, idft2_real, make_freq_grid
from .synth import SynthConfig, gen_dataset, make_highlight


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    comparison: str = "<"
    detail: str = ""
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return (f"[{status}] {self.name}: measured {self.value:.3e} {self.comparison} "
                f"{self.tolerance:g}  [{self.seconds:.2f}s]{extra}")


@contextmanager
def _timed(out):
    t0 = time.perf_counter()
    yield
    out.append(time.perf_counter() - t0)


def rel_err(analytic, numeric, floor=1e-7):
    """``|a - n| / max(|a|, |n|, floor)``; the floor absorbs roundoff on near-zero gradients."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_dft_oracle(seed=0, sizes=(4, 8, 16)):
    t = []
    with _timed(t):
        rng = np.random.default_rng(seed)
        oracle_err = 0.0
        round_err = 0.0
        for h in sizes:
            for w in sizes:
                p = rng.standard_normal((h, w))
                oracle_err = max(oracle_err, float(np.max(np.abs(dft2(p) - dft2_direct(p)))))
                back, _ = idft2_real(dft2(p))
                round_err = max(round_err, float(np.max(np.abs(back - p))))
    ok = oracle_err < 1e-10 and round_err < 1e-9
    return CheckResult("dft oracle equivalence", oracle_err, 1e-10, ok,
                       detail=f"roundtrip {round_err:.2e} < 1e-09", seconds=t[0])


def _random_images(rng, n, size, lo=0.01, hi=1.0):
    return rng.uniform(lo, hi, size=(n, 3, size, size))


def check_cyclic_closure(seed=0, n=50, size=64):
    t = []
    with _timed(t):
        rng = np.random.default_rng(seed)
        worst = 0.0
        for img in _random_images(rng, n, size):
            pairs = fcr_pairs(img)
            total = sum(pairs[p] for p in PAIRS)
            worst = max(worst, float(np.max(np.abs(total))))
    return CheckResult("cyclic closure", worst, 1e-10, worst < 1e-10, seconds=t[0])


def clamp_free_images(n, seed=0, size=64):
    """Synthetic scenes dim enough that any gain in [0.5, 2] keeps them in [1/255, 1]."""
    cfg = SynthConfig(size=size, n_samples=n, train_fraction=1.0, train_gain_range=(0.15, 0.3),
                      test_gain_range=(0.4, 0.5), seed=seed)
    images = [s.image for s in gen_dataset(cfg).samples]
    for img in images:
        if img.max() * 2.0 > 1.0 or img.min() * 0.5 < 1.0 / 255.0:
            raise AssertionError("clamp-free image pool violated its own range")
    return images


def check_gain_invariance(seed=0, n=50):
    t = []
    with _timed(t):
        rng = np.random.default_rng(seed)
        images = clamp_free_images(n, seed=seed)
        state = init_state(seed=seed)
        worst = 0.0
        for img in images:
            gains = rng.uniform(0.5, 2.0, size=3)
            worst = max(worst, invariance_score(img, state, gains))
    return CheckResult("zero-DC gain invariance", worst, 1e-6, worst < 1e-6, seconds=t[0])


def random_filter_params(rng, k=None, learn_lambda=True):
    k = int(rng.integers(3, 13)) if k is None else k
    return FilterParams(
        log_sigma_w=float(np.log(rng.uniform(0.1, 1.0))),
        log_sigma_h=float(np.log(rng.uniform(0.03, 0.3))),
        a=rng.uniform(-1.0, 2.0, size=k),
        mu=default_mu(k),
        lam=float(rng.uniform(0.0, 0.3)),
        n_harmonics=int(rng.integers(1, 6)),
        learn_lambda=learn_lambda,
    )


def _filter_loss(grid, fp, upstream, symmetrize):
    return float(np.sum(upstream * eval_lff(grid, fp, symmetrize=symmetrize).values))


def filter_gradient_errors(fp, grid, upstream, symmetrize=True, step=1e-5):
    """Relative errors of every stored filter scalar against central differences."""
    g = grad_params(grid, fp, upstream, symmetrize=symmetrize)
    errs = {}

    def fd(setter, x0):
        p = fp.copy()
        setter(p, x0 + step)
        up = _filter_loss(grid, p, upstream, symmetrize)
        setter(p, x0 - step)
        down = _filter_loss(grid, p, upstream, symmetrize)
        return (up - down) / (2 * step)

    errs["log_sigma_w"] = rel_err(g["log_sigma_w"], fd(lambda p, x: setattr(p, "log_sigma_w", x), fp.log_sigma_w))
    errs["log_sigma_h"] = rel_err(g["log_sigma_h"], fd(lambda p, x: setattr(p, "log_sigma_h", x), fp.log_sigma_h))
    if fp.learn_lambda:
        errs["lam"] = rel_err(g["lam"], fd(lambda p, x: setattr(p, "lam", x), fp.lam))
    for i in range(fp.k):
        def set_a(p, x, i=i):
            a = p.a.copy()
            a[i] = x
            p.a = a
        errs[f"a[{i}]"] = rel_err(g["a"][i], fd(set_a, fp.a[i]))
    return errs


def check_filter_gradients(seed=0, n_configs=20, size=16):
    t = []
    with _timed(t):
        rng = np.random.default_rng(seed)
        worst = 0.0
        count = 0
        for c in range(n_configs):
            fp = random_filter_params(rng)
            grid = make_freq_grid(size, size)
            up = rng.standard_normal((size, size))
            errs = filter_gradient_errors(fp, grid, up, symmetrize=bool(c % 2 == 0))
            worst = max(worst, max(errs.values()))
            count += len(errs)
    return CheckResult("filter gradients vs finite differences", worst, 1e-4, worst < 1e-4,
                       detail=f"{count} scalars over {n_configs} configs", seconds=t[0])


def random_model(rng, n_classes=4):
    state = init_state(n_classes=n_classes, seed=int(rng.integers(1 << 31)), learn_lambda=True)
    for fp in state.filters:
        new = random_filter_params(rng, k=fp.k)
        new.lam = float(rng.uniform(0.05, 0.3))
        fp.log_sigma_w, fp.log_sigma_h, fp.a, fp.lam, fp.n_harmonics = (
            new.log_sigma_w, new.log_sigma_h, new.a, new.lam, new.n_harmonics)
    for blk in (state.fusion.cb_inv, state.fusion.cb_img, state.fusion.cb_cat):
        blk.gamma = rng.uniform(0.5, 1.5, size=blk.gamma.shape)
        blk.beta = rng.uniform(-0.5, 0.5, size=blk.beta.shape)
    state.fusion.out_b = rng.uniform(-0.5, 0.5, size=state.fusion.out_b.shape)
    state.head_w = rng.standard_normal(state.head_w.shape)
    state.head_b = rng.uniform(-0.5, 0.5, size=state.head_b.shape)
    return state


def end_to_end_gradient_errors(state, images, labels, names=None, rng=None, per_block=None, step=1e-5):
    """Relative errors (keyed by ``name[index]``) of the full training-mode loss gradient.

    ``per_block`` limits each parameter block to that many random entries.
    """
    _, _, grads = loss_and_grads(images, labels, state, training=True, update_buffers=False)
    base = state.params()
    errs = {}
    for name, arr in base.items():
        if names is not None and name not in names:
            continue
        idx = np.arange(arr.size)
        if per_block is not None and arr.size > per_block:
            idx = rng.choice(arr.size, size=per_block, replace=False)
        for i in idx:
            val = arr.reshape(-1)[i]
            out = []
            for delta in (step, -step):
                trial = {k: v.copy() for k, v in base.items()}
                trial[name].reshape(-1)[i] = val + delta
                state.set_params(trial)
                out.append(loss_and_grads(images, labels, state, training=True,
                                          update_buffers=False, need_grads=False)[0])
            num = (out[0] - out[1]) / (2 * step)
            errs[f"{name}[{i}]"] = rel_err(float(grads[name].reshape(-1)[i]), num)
    state.set_params(base)
    return errs


def check_end_to_end_gradients(seed=0, n_configs=20, size=16, batch=2, per_block=6):
    """Every scalar of the first configuration, a random subset per block for the rest."""
    t = []
    with _timed(t):
        rng = np.random.default_rng(seed)
        worst = 0.0
        count = 0
        for c in range(n_configs):
            state = random_model(rng)
            images = _random_images(rng, batch, size, lo=0.02)
            labels = rng.integers(0, state.n_classes, size=batch)
            errs = end_to_end_gradient_errors(state, images, labels, rng=rng,
                                              per_block=None if c == 0 else per_block)
            worst = max(worst, max(errs.values()))
            count += len(errs)
    return CheckResult("end-to-end gradients vs finite differences", worst, 1e-3, worst < 1e-3,
                       detail=f"{count} scalars over {n_configs} configs", seconds=t[0])


def taylor_ratios(seed=0, n=10, amplitude=0.2, size=64):
    """``err(a) / err(a/2)`` for seeded blob fields with R and G sharing geometry."""
    cfg = SynthConfig(size=size)
    ratios = []
    for s in range(n):
        errs = []
        for amp in (amplitude, amplitude / 2):
            h = make_highlight(cfg, (seed, s), amplitude_range=(amp, amp), n_blobs=3,
                               jitter=0.5, saturate=False)
            errs.append(residual_linearization_error(h[0], h[1])[2])
        ratios.append(errs[0] / errs[1])
    return np.array(ratios)


def check_taylor_scaling(seed=0, n=10):
    t = []
    with _timed(t):
        ratios = taylor_ratios(seed=seed, n=n)
    lo, hi = float(ratios.min()), float(ratios.max())
    ok = bool(lo >= 3.5 and hi <= 4.5)
    return CheckResult("taylor residual scaling", lo, 3.5, ok, comparison=">=",
                       detail=f"ratios in [{lo:.3f}, {hi:.3f}], required within [3.5, 4.5]", seconds=t[0])


def hermitian_residuals(seed=0, n=50, size=32):
    """Max imaginary residual over random runs with and without symmetrization."""
    rng = np.random.default_rng(seed)
    on, off = 0.0, 0.0
    for _ in range(n):
        state = random_model(rng)
        img = _random_images(rng, 1, size)
        state.flags.symmetrize = True
        on = max(on, float(invariant_features(img, state)[1].max()))
        state.flags.symmetrize = False
        off = max(off, float(invariant_features(img, state)[1].max()))
    return on, off


def check_hermitian(seed=0, n=50):
    t = []
    with _timed(t):
        on, off = hermitian_residuals(seed=seed, n=n)
    ok = on < 1e-9 and off > on
    return CheckResult("hermitian filtering (imag residual)", on, 1e-9, ok,
                       detail=f"unsymmetrized residual {off:.3e} > symmetrized", seconds=t[0])


def check_param_count():
    t = []
    with _timed(t):
        counts = init_state().param_counts()
    ok = counts["filter"] == 36 and counts["module"] < 10_000
    return CheckResult("module parameter count", counts["module"], 10_000, ok,
                       detail=f"filter {counts['filter']} == 36, fusion {counts['fusion']}", seconds=t[0])


def forward_latency(size=256, repeats=10, seed=0):
    """Best-of-``repeats`` wall time (seconds) of one single-image forward pass."""
    state = init_state(seed=seed)
    img = np.random.default_rng(seed).uniform(0.02, 1.0, size=(3, size, size))
    forward_features(img, state)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        forward_features(img, state)
        best = min(best, time.perf_counter() - t0)
    return best


def check_latency(size=256):
    t = []
    with _timed(t), threadpool_limits(limits=1):
        best = forward_latency(size)
    return CheckResult(f"forward latency {size}x{size}", best * 1000.0, 100.0, best < 0.1,
                       detail="milliseconds, single-threaded", seconds=t[0])


FAST_CHECKS = {
    "dft": check_dft_oracle,
    "closure": check_cyclic_closure,
    "invariance": check_gain_invariance,
    "filter-grad": check_filter_gradients,
    "e2e-grad": check_end_to_end_gradients,
    "taylor": check_taylor_scaling,
    "hermitian": check_hermitian,
    "params": lambda seed=0: check_param_count(),
    "latency": lambda seed=0: check_latency(),
}


def run_checks(seed=0, names=None):
    results = []
    for name, fn in FAST_CHECKS.items():
        if names is not None and name not in names:
            continue
        results.append(fn(seed=seed))
    return results
