"""Ensemble state and the per-frame filter step.

One step is the composition

    predict -> sensor_sample -> observe -> innovation_cov -> kalman_update

Ensembles are stored members-as-rows: an (E, 27) matrix plus a ring buffer of
the last `window` member matrices.  The transition model conditions on each
member's own flattened history; the sensor model turns the raw observation
window into an ensemble of state-space observations (one stochastic pass per
member).  The update blends predicted members toward those observations with
the standard ensemble gain, using a symmetric positive-definite solve rather
than an explicit inverse.

Stochasticity normally comes from dropout in the transition and sensor
models.  The `extra_*_std` knobs inject additive Gaussian noise instead,
which is how linear no-dropout configurations (diagnostics, convergence
tests) obtain their process and measurement noise.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..datamodel import PoseState
from ..neural.mlp import make_masks, mlp_forward
from .models import FilterModels

RIDGE = 1e-6  # diagonal regularizer keeping the innovation covariance invertible


class HistoryNotWarm(RuntimeError):
    """The ensemble history or raw window has fewer than `window` frames."""


class SolveFailure(RuntimeError):
    """The innovation covariance solve failed; filter state is corrupt."""


@dataclass
class Ensemble:
    members: np.ndarray  # (n_members, state_dim)
    history: Deque[np.ndarray]  # ring buffer of member matrices, oldest first

    def __post_init__(self):
        if self.members.ndim != 2 or self.members.shape[0] < 2:
            raise ValueError("need at least 2 members")

    @property
    def n_members(self) -> int:
        return self.members.shape[0]


@dataclass(frozen=True)
class StepDiagnostics:
    predicted_mean: np.ndarray  # ensemble mean before the update
    innovation_norm: float  # |sensor mean - projected mean|
    gain_norm: float  # Frobenius norm of the Kalman gain
    spread: np.ndarray  # per-dimension member std after the update
    cond_innovation: float  # condition number of the innovation covariance


def init_ensemble(
    x0,
    n_members: int,
    window: int,
    jitter_std: float,
    rng: np.random.Generator,
) -> Ensemble:
    """Spawn members around a single state and fill the history with them."""
    if n_members < 2:
        raise ValueError("need at least 2 members")
    flat = x0.flatten() if isinstance(x0, PoseState) else np.asarray(x0, dtype=np.float64)
    members = np.tile(flat, (n_members, 1)).astype(np.float64)
    if jitter_std > 0:
        members += rng.normal(scale=jitter_std, size=members.shape)
    history: Deque[np.ndarray] = deque(maxlen=window)
    for _ in range(window):
        history.append(members)
    return Ensemble(members=members.copy(), history=history)


def _flatten_history(history: Sequence[np.ndarray]) -> np.ndarray:
    # (window, E, S) oldest first -> (E, window*S)
    stacked = np.stack(list(history), axis=1)
    return stacked.reshape(stacked.shape[0], -1)


def predict(
    ens: Ensemble,
    models: FilterModels,
    rng: np.random.Generator | None = None,
    extra_noise_std: float = 0.0,
) -> np.ndarray:
    """One stochastic transition pass per member over its own history window."""
    if len(ens.history) < models.window:
        raise HistoryNotWarm(
            f"history has {len(ens.history)} frames, needs {models.window}"
        )
    window_input = _flatten_history(ens.history)
    masks = None
    if models.dropout > 0.0 and rng is not None:
        masks = make_masks(models.transition_spec, (ens.n_members,), models.dropout, rng)
    out = mlp_forward(models.transition, models.transition_spec, window_input, masks)
    if extra_noise_std > 0.0:
        if rng is None:
            raise ValueError("extra noise needs an rng")
        out = out + rng.normal(scale=extra_noise_std, size=out.shape)
    return out


def sensor_sample(
    raw_window: np.ndarray,
    models: FilterModels,
    n_members: int,
    rng: np.random.Generator | None = None,
    extra_noise_std: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """n_members stochastic sensor passes over one raw window, plus their mean."""
    raw_window = np.asarray(raw_window, dtype=np.float64)
    if raw_window.shape != (models.window, models.raw_dim):
        raise HistoryNotWarm(
            f"raw window shape {raw_window.shape}, needs {(models.window, models.raw_dim)}"
        )
    flat = np.broadcast_to(raw_window.reshape(-1), (n_members, models.sensor_spec.in_dim))
    masks = None
    if models.dropout > 0.0 and rng is not None:
        masks = make_masks(models.sensor_spec, (n_members,), models.dropout, rng)
    samples = mlp_forward(models.sensor, models.sensor_spec, flat, masks)
    if extra_noise_std > 0.0:
        if rng is None:
            raise ValueError("extra noise needs an rng")
        samples = samples + rng.normal(scale=extra_noise_std, size=samples.shape)
    return samples, samples.mean(axis=0)


def observe(members: np.ndarray, models: FilterModels) -> tuple[np.ndarray, np.ndarray]:
    """Project members into observation space; also return the centered matrix."""
    projected = mlp_forward(models.observation, models.observation_spec, members)
    return projected, projected - projected.mean(axis=0)


def innovation_cov(
    centered_obs: np.ndarray,
    sensor_mean: np.ndarray,
    models: FilterModels,
    ridge: float = RIDGE,
) -> np.ndarray:
    """Sample covariance of projected members plus the learned noise diagonal."""
    n = centered_obs.shape[0]
    if n < 2:
        raise ValueError("need at least 2 members")
    raw = mlp_forward(models.noise, models.noise_spec, sensor_mean)
    noise_diag = np.logaddexp(0.0, raw)  # softplus keeps the diagonal positive
    dim = centered_obs.shape[1]
    return (
        centered_obs.T @ centered_obs / (n - 1)
        + np.diag(noise_diag)
        + ridge * np.eye(dim)
    )


def kalman_update(
    predicted: np.ndarray,
    centered_obs: np.ndarray,
    projected: np.ndarray,
    sensor_samples: np.ndarray,
    innovation: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Blend predicted members toward sensor samples; returns (members, gain)."""
    n = predicted.shape[0]
    anomalies = predicted - predicted.mean(axis=0)
    cross = anomalies.T @ centered_obs / (n - 1)  # (state, obs)
    try:
        factor = cho_factor(innovation, lower=True)
        gain = cho_solve(factor, cross.T).T  # cross @ innovation^-1, symmetric solve
    except (LinAlgError, np.linalg.LinAlgError, ValueError) as exc:
        # ValueError covers non-finite entries, which scipy rejects before factoring
        raise SolveFailure(f"innovation covariance solve failed: {exc}") from exc
    updated = predicted + (sensor_samples - projected) @ gain.T
    return updated, gain


def filter_step(
    ens: Ensemble,
    raw_window: np.ndarray,
    models: FilterModels,
    rng: np.random.Generator | None = None,
    process_noise_std: float = 0.0,
    obs_noise_std: float = 0.0,
) -> tuple[Ensemble, np.ndarray, StepDiagnostics]:
    """Advance one frame; returns the new ensemble, its mean, and diagnostics."""
    predicted = predict(ens, models, rng, extra_noise_std=process_noise_std)
    samples, sensor_mean = sensor_sample(
        raw_window, models, ens.n_members, rng, extra_noise_std=obs_noise_std
    )
    projected, centered_obs = observe(predicted, models)
    innovation = innovation_cov(centered_obs, sensor_mean, models)
    updated, gain = kalman_update(predicted, centered_obs, projected, samples, innovation)

    history = deque(ens.history, maxlen=models.window)
    history.append(updated)
    new_ens = Ensemble(members=updated, history=history)
    diag = StepDiagnostics(
        predicted_mean=predicted.mean(axis=0),
        innovation_norm=float(np.linalg.norm(sensor_mean - projected.mean(axis=0))),
        gain_norm=float(np.linalg.norm(gain)),
        spread=updated.std(axis=0, ddof=1),
        cond_innovation=float(np.linalg.cond(innovation)),
    )
    return new_ens, updated.mean(axis=0), diag


@dataclass
class FilterRun:
    """Per-frame estimates of one filtered session."""

    means: np.ndarray  # (T, state_dim)
    spreads: np.ndarray  # (T, state_dim); zeros during warm-up
    warm: np.ndarray  # (T,) bool; False while the raw window is filling
    diagnostics: list[StepDiagnostics | None]
    members: list[np.ndarray | None] | None = None  # kept only on request


def filter_session(
    observations: np.ndarray,
    models: FilterModels,
    rng: np.random.Generator,
    n_members: int = 32,
    jitter_std: float = 0.05,
    keep_members: bool = False,
) -> FilterRun:
    """Run the filter over a whole session of raw observations (T, raw_dim).

    Until `window` frames have arrived the raw window is padded by repeating
    the first frame and the sensor-model mean is reported directly, flagged
    not warm.  The ensemble is initialized from the sensor mean of the first
    full window.
    """
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim != 2 or observations.shape[1] != models.raw_dim:
        raise ValueError(f"observations must be (T, {models.raw_dim})")
    t_total = observations.shape[0]
    window: Deque[np.ndarray] = deque(maxlen=models.window)
    means = np.zeros((t_total, models.state_dim))
    spreads = np.zeros((t_total, models.state_dim))
    warm = np.zeros(t_total, dtype=bool)
    diags: list[StepDiagnostics | None] = []
    members: list[np.ndarray | None] = []
    ens: Ensemble | None = None

    for t in range(t_total):
        window.append(observations[t])
        if len(window) < models.window:
            padded = [window[0]] * (models.window - len(window)) + list(window)
            _, mean = sensor_sample(np.stack(padded), models, n_members, rng)
            means[t] = mean
            diags.append(None)
            if keep_members:
                members.append(None)
            continue
        raw = np.stack(window)
        if ens is None:
            _, mean = sensor_sample(raw, models, n_members, rng)
            ens = init_ensemble(mean, n_members, models.window, jitter_std, rng)
        ens, mean, diag = filter_step(ens, raw, models, rng)
        means[t] = mean
        spreads[t] = diag.spread
        warm[t] = True
        diags.append(diag)
        if keep_members:
            members.append(ens.members.copy())
    return FilterRun(
        means=means,
        spreads=spreads,
        warm=warm,
        diagnostics=diags,
        members=members if keep_members else None,
    )


def spread_groups(spread: np.ndarray) -> np.ndarray:
    """Collapse a per-dimension spread vector to (upper, lower, heading) groups."""
    spread = np.asarray(spread)
    return np.array(
        [
            float(spread[..., 0:6].mean()),
            float(spread[..., 6:12].mean()),
            float(spread[..., 12:14].mean()),
        ]
    )
