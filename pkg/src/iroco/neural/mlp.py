"""Multilayer perceptrons over the autodiff tape.

ReLU on hidden layers, linear output.  Hidden layers flagged stochastic get
inverted dropout (mask drawn per forward pass, activations scaled by
1/keep), which is how the filter injects per-member process noise: each
ensemble member runs the network with its own mask.  Masks are recorded so a
pass can be replayed exactly, which the finite-difference gradient checks
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var


class ShapeMismatch(ValueError):
    """Input or parameter shapes disagree with the layer spec."""


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    stochastic: tuple[bool, ...]  # per hidden layer: dropout on or off

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0 or any(h <= 0 for h in self.hidden):
            raise ValueError("layer widths must be positive")
        if len(self.stochastic) != len(self.hidden):
            raise ValueError("need one stochastic flag per hidden layer")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.in_dim, *self.hidden, self.out_dim)

    @classmethod
    def dense(cls, in_dim: int, hidden: tuple[int, ...], out_dim: int) -> "MlpSpec":
        return cls(in_dim, hidden, out_dim, (False,) * len(hidden))

    @classmethod
    def sampling(cls, in_dim: int, hidden: tuple[int, ...], out_dim: int) -> "MlpSpec":
        return cls(in_dim, hidden, out_dim, (True,) * len(hidden))


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat_arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a stable order (for the optimizer)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass(frozen=True)
class MaskRecord:
    """Dropout masks of one stochastic forward pass (None for dense layers)."""

    masks: tuple[np.ndarray | None, ...]
    rate: float


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Fan-in-scaled uniform weights, zero biases."""
    weights, biases = [], []
    dims = spec.layer_dims
    for i in range(len(dims) - 1):
        limit = np.sqrt(6.0 / dims[i])
        weights.append(rng.uniform(-limit, limit, size=(dims[i], dims[i + 1])))
        biases.append(np.zeros(dims[i + 1]))
    return MlpParams(weights=weights, biases=biases)


def check_params(spec: MlpSpec, params: MlpParams) -> None:
    dims = spec.layer_dims
    if len(params.weights) != len(dims) - 1 or len(params.biases) != len(dims) - 1:
        raise ShapeMismatch(f"expected {len(dims) - 1} layers")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise ShapeMismatch(
                f"layer {i}: weight {w.shape}, bias {b.shape}, "
                f"expected {(dims[i], dims[i + 1])} and {(dims[i + 1],)}"
            )


def make_masks(
    spec: MlpSpec, batch_shape: tuple[int, ...], rate: float, rng: np.random.Generator
) -> MaskRecord:
    """Draw inverted-dropout masks for one forward pass over a batch."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    masks: list[np.ndarray | None] = []
    for width, stochastic in zip(spec.hidden, spec.stochastic):
        if stochastic and rate > 0.0:
            keep = rng.random(size=batch_shape + (width,)) >= rate
            masks.append(keep.astype(np.float64) / (1.0 - rate))
        else:
            masks.append(None)
    return MaskRecord(masks=tuple(masks), rate=rate)


def mlp_forward(
    params: MlpParams, spec: MlpSpec, x: np.ndarray, masks: MaskRecord | None = None
) -> np.ndarray:
    """Plain numpy forward pass; pass a MaskRecord for the stochastic variant."""
    check_params(spec, params)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 1 or x.shape[-1] != spec.in_dim:
        raise ShapeMismatch(f"input last dim {x.shape}, expected {spec.in_dim}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
            if masks is not None and masks.masks[i] is not None:
                h = h * masks.masks[i]
    return h


def params_to_vars(params: MlpParams) -> tuple[list[Var], list[Var]]:
    return [Var(w) for w in params.weights], [Var(b) for b in params.biases]


def mlp_forward_var(
    weights: list[Var],
    biases: list[Var],
    spec: MlpSpec,
    x: Var,
    masks: MaskRecord | None = None,
) -> Var:
    """Tape-building forward pass for training; masks enter as constants."""
    if x.value.shape[-1] != spec.in_dim:
        raise ShapeMismatch(f"input last dim {x.value.shape}, expected {spec.in_dim}")
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = ad.add(ad.matmul(h, w), b)
        if i < last:
            h = ad.relu(h)
            if masks is not None and masks.masks[i] is not None:
                h = ad.mul(h, masks.masks[i])
    return h


def mlp_backward(
    params: MlpParams,
    spec: MlpSpec,
    x: np.ndarray,
    gy: np.ndarray,
    masks: MaskRecord | None = None,
) -> tuple[MlpParams, np.ndarray]:
    """Gradients of sum(y * gy) with respect to parameters and input."""
    wv, bv = params_to_vars(params)
    xv = Var(x)
    y = mlp_forward_var(wv, bv, spec, xv, masks)
    if y.value.shape != np.shape(gy):
        raise ShapeMismatch(f"gy shape {np.shape(gy)} does not match output {y.value.shape}")
    ad.backward(ad.vsum(ad.mul(y, gy)))
    grads = MlpParams(
        weights=[w.grad if w.grad is not None else np.zeros_like(w.value) for w in wv],
        biases=[b.grad if b.grad is not None else np.zeros_like(b.value) for b in bv],
    )
    return grads, xv.grad if xv.grad is not None else np.zeros_like(x)
