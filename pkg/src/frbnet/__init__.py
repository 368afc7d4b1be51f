"""Illumination-invariant features from frequency-domain channel ratios."""

from .fcr import LOG_FLOOR, PAIRS, Pair, corr_coeff, fcr_pairs, log_plane, residual_linearization_error
from .lff import FilterGrid, FilterParams, eval_lff, grad_params
from .pipeline import Flags, ModelState, evaluate, forward_features, fuse, init_state, invariance_score, train_toy
from .spectral import FreqGrid, dft2, idft2_real, make_freq_grid, symmetrize_real_grid
from .synth import SynthConfig, compose_image, gen_dataset

__version__ = "0.1.0"
