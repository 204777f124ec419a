"""Small numpy neural networks with reverse-mode gradients.

- :mod:`iroco.neural.autodiff`  graph/tape of array ops with backward passes
- :mod:`iroco.neural.mlp`       multilayer perceptrons with per-layer dropout
- :mod:`iroco.neural.optim`     Adam optimizer
"""

from .autodiff import Var, backward
from .mlp import MaskRecord, MlpParams, MlpSpec, ShapeMismatch, init_mlp, mlp_forward
from .optim import AdamState, adam_init, adam_step

__all__ = [
    "Var",
    "backward",
    "MaskRecord",
    "MlpParams",
    "MlpSpec",
    "ShapeMismatch",
    "init_mlp",
    "mlp_forward",
    "AdamState",
    "adam_init",
    "adam_step",
]
