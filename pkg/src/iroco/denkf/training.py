"""End-to-end training of the filter models.

Sessions are cut into fixed-length subsequences.  Each subsequence starts
with a teacher-forced ensemble (ground-truth history plus jitter) and is then
filtered step by step with the same algebra as inference, built on the
autodiff tape.  Three losses apply at every step:

- end-to-end: MSE between the updated ensemble mean and the ground truth
- transition: MSE between a direct transition pass over the recent sensor
  means and the ground truth
- sensor: MSE between the sensor-sample mean and the ground truth (the
  ground-truth state doubles as the target observation since observations
  share the state layout)

Gradients are truncated at step boundaries: each step consumes the previous
step's output as a constant, so one backward pass per step suffices and the
per-batch update averages the step gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..datamodel import LabeledFrame, frames_to_arrays
from ..neural import autodiff as ad
from ..neural.autodiff import Var
from ..neural.mlp import MaskRecord, make_masks, mlp_forward_var, params_to_vars
from ..neural.optim import adam_init, adam_step
from .filtering import RIDGE
from .models import FilterModels, build_filter_models

_MODULE_NAMES = ("transition", "observation", "noise", "sensor")


class DataTooShort(ValueError):
    """A session has too few frames to form even one training window."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-4
    ensemble_size: int = 32
    window: int = 5
    dropout: float = 0.1
    subseq_len: int = 16
    stride: int = 8
    init_jitter: float = 0.05
    width_div: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.ensemble_size, self.window) < 1:
            raise ValueError("epochs, batch_size, ensemble_size, window must be >= 1")
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be >= 2")
        if self.subseq_len < 1 or self.stride < 1:
            raise ValueError("subseq_len and stride must be >= 1")

    @classmethod
    def smoke(cls, **overrides) -> "TrainConfig":
        """Desk-scale preset: narrow networks, few epochs.

        Small batches, a denser subsequence grid, and a higher learning rate
        compensate for the short run: at full-scale settings five epochs over
        a small dataset yield too few optimizer steps to move the weights.
        """
        base = cls(epochs=5, width_div=8, batch_size=8, learning_rate=2e-3, stride=1)
        return replace(base, **overrides)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    end_to_end: float
    transition_loss: float
    sensor_loss: float


@dataclass
class ParamVars:
    """Tape variables for every parameter array, in optimizer order."""

    by_module: dict[str, tuple[list[Var], list[Var]]]

    def ordered(self) -> list[Var]:
        out: list[Var] = []
        for name in _MODULE_NAMES:
            weights, biases = self.by_module[name]
            for w, b in zip(weights, biases):
                out.append(w)
                out.append(b)
        return out


def build_param_vars(models: FilterModels) -> ParamVars:
    return ParamVars(
        by_module={
            name: params_to_vars(getattr(models, name)) for name in _MODULE_NAMES
        }
    )


def draw_step_masks(
    models: FilterModels, batch: int, ensemble: int, rng: np.random.Generator
) -> dict[str, MaskRecord | None]:
    """Dropout masks for one training step (None entries mean deterministic)."""
    if models.dropout <= 0.0:
        return {"transition": None, "sensor": None, "transition_direct": None}
    return {
        "transition": make_masks(
            models.transition_spec, (batch, ensemble), models.dropout, rng
        ),
        "sensor": make_masks(models.sensor_spec, (batch, ensemble), models.dropout, rng),
        "transition_direct": make_masks(
            models.transition_spec, (batch,), models.dropout, rng
        ),
    }


def step_losses(
    models: FilterModels,
    pvars: ParamVars,
    history: np.ndarray,
    raw_flat: np.ndarray,
    direct_input: np.ndarray,
    gt: np.ndarray,
    masks: dict[str, MaskRecord | None],
) -> tuple[Var, dict[str, float], np.ndarray, np.ndarray]:
    """One filter step on the tape over a batch.

    history: (batch, ensemble, window, state) member histories (constants)
    raw_flat: (batch, ensemble, window*raw) repeated raw windows
    direct_input: (batch, window*state) recent sensor means for the
        transition loss
    gt: (batch, state) ground truth at this step

    Returns the summed loss Var, the loss parts as floats, and the detached
    updated members and sensor means that seed the next step.
    """
    batch, ensemble = history.shape[0], history.shape[1]
    wv_f, bv_f = pvars.by_module["transition"]
    wv_h, bv_h = pvars.by_module["observation"]
    wv_r, bv_r = pvars.by_module["noise"]
    wv_s, bv_s = pvars.by_module["sensor"]

    predicted = mlp_forward_var(
        wv_f,
        bv_f,
        models.transition_spec,
        Var(history.reshape(batch, ensemble, -1)),
        masks["transition"],
    )
    samples = mlp_forward_var(
        wv_s, bv_s, models.sensor_spec, Var(raw_flat), masks["sensor"]
    )
    sensor_mean = ad.mean(samples, axis=1)

    projected = mlp_forward_var(wv_h, bv_h, models.observation_spec, predicted)
    centered_obs = ad.sub(projected, ad.mean(projected, axis=1, keepdims=True))

    noise_diag = ad.softplus(
        mlp_forward_var(wv_r, bv_r, models.noise_spec, sensor_mean)
    )
    obs_dim = models.observation_spec.out_dim
    innovation = ad.add(
        ad.add(
            ad.scale(
                ad.matmul(ad.transpose_last(centered_obs), centered_obs),
                1.0 / (ensemble - 1),
            ),
            ad.diag_embed(noise_diag),
        ),
        RIDGE * np.eye(obs_dim),
    )

    anomalies = ad.sub(predicted, ad.mean(predicted, axis=1, keepdims=True))
    cross = ad.scale(
        ad.matmul(ad.transpose_last(anomalies), centered_obs), 1.0 / (ensemble - 1)
    )
    # innovation^-1 @ cross^T is the transposed gain; members multiply it directly.
    gain_t = ad.solve(innovation, ad.transpose_last(cross))
    updated = ad.add(predicted, ad.matmul(ad.sub(samples, projected), gain_t))

    end_to_end = ad.mse(ad.mean(updated, axis=1), gt)
    direct = mlp_forward_var(
        wv_f, bv_f, models.transition_spec, Var(direct_input), masks["transition_direct"]
    )
    transition_loss = ad.mse(direct, gt)
    sensor_loss = ad.mse(sensor_mean, gt)
    total = ad.add(ad.add(end_to_end, transition_loss), sensor_loss)
    parts = {
        "end_to_end": float(end_to_end.value),
        "transition": float(transition_loss.value),
        "sensor": float(sensor_loss.value),
    }
    return total, parts, updated.value, sensor_mean.value


def _normalize_sessions(dataset) -> list[tuple[np.ndarray, np.ndarray]]:
    sessions = []
    for item in dataset:
        if isinstance(item, tuple):
            obs, gt = item
            sessions.append(
                (np.asarray(obs, dtype=np.float64), np.asarray(gt, dtype=np.float64))
            )
        else:
            frames: Sequence[LabeledFrame] = item
            _, obs, gt = frames_to_arrays(list(frames))
            sessions.append((obs, gt))
    return sessions


def train(
    dataset,
    cfg: TrainConfig,
    models: FilterModels | None = None,
) -> tuple[FilterModels, list[EpochStats]]:
    """Train the filter models on a dataset of sessions.

    dataset: iterable of sessions, each either a list of LabeledFrame or an
    (obs, gt) array pair.  Returns the trained models and per-epoch losses.
    """
    sessions = _normalize_sessions(dataset)
    if not sessions:
        raise DataTooShort("dataset has no sessions")
    n = cfg.window
    for i, (obs, gt) in enumerate(sessions):
        if len(obs) < n + 1:
            raise DataTooShort(
                f"session {i} has {len(obs)} frames, needs at least {n + 1}"
            )
    rng = np.random.default_rng(cfg.seed)
    if models is None:
        models = build_filter_models(
            window=n, dropout=cfg.dropout, width_div=cfg.width_div, rng=rng
        )
    models.validate()
    if models.window != n:
        raise ValueError("models.window disagrees with cfg.window")

    # Fixed-length subsequences; very short sessions shorten the length for all.
    min_frames = min(len(obs) for obs, _ in sessions)
    eff_len = min(cfg.subseq_len, min_frames - n)
    subseqs = [
        (si, start)
        for si, (obs, _) in enumerate(sessions)
        for start in range(n, len(obs) - eff_len + 1, cfg.stride)
    ]

    arrays = models.parameter_arrays()
    opt = adam_init(arrays)
    stats: list[EpochStats] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(subseqs))
        sums = {"end_to_end": 0.0, "transition": 0.0, "sensor": 0.0}
        steps = 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = len(idx)
            obs_seq = np.stack(
                [sessions[subseqs[i][0]][0][subseqs[i][1] - n + 1 : subseqs[i][1] + eff_len]
                 for i in idx]
            )  # (batch, n-1+eff_len, raw)
            gt_seq = np.stack(
                [sessions[subseqs[i][0]][1][subseqs[i][1] : subseqs[i][1] + eff_len]
                 for i in idx]
            )  # (batch, eff_len, state)
            gt_hist = np.stack(
                [sessions[subseqs[i][0]][1][subseqs[i][1] - n : subseqs[i][1]] for i in idx]
            )  # (batch, n, state)

            history = gt_hist[:, None, :, :] + rng.normal(
                scale=cfg.init_jitter,
                size=(batch, cfg.ensemble_size, n, models.state_dim),
            )
            direct_hist = gt_hist.copy()  # sensor-mean history, gt-bootstrapped

            pvars = build_param_vars(models)
            for t in range(eff_len):
                raw_window = obs_seq[:, t : t + n].reshape(batch, 1, -1)
                raw_flat = np.broadcast_to(
                    raw_window, (batch, cfg.ensemble_size, raw_window.shape[-1])
                )
                masks = draw_step_masks(models, batch, cfg.ensemble_size, rng)
                total, parts, updated, sensor_mean = step_losses(
                    models,
                    pvars,
                    history,
                    raw_flat,
                    direct_hist.reshape(batch, -1),
                    gt_seq[:, t],
                    masks,
                )
                ad.backward(total)
                for key in sums:
                    sums[key] += parts[key]
                steps += 1
                # Next step consumes this step's outputs as constants.
                history = np.concatenate(
                    [history[:, :, 1:], updated[:, :, None, :]], axis=2
                )
                direct_hist = np.concatenate(
                    [direct_hist[:, 1:], sensor_mean[:, None, :]], axis=1
                )

            grads = [
                (v.grad if v.grad is not None else np.zeros_like(v.value)) / eff_len
                for v in pvars.ordered()
            ]
            adam_step(opt, arrays, grads, lr=cfg.learning_rate)

        stats.append(
            EpochStats(
                epoch=epoch,
                end_to_end=sums["end_to_end"] / max(steps, 1),
                transition_loss=sums["transition"] / max(steps, 1),
                sensor_loss=sums["sensor"] / max(steps, 1),
            )
        )
    return models, stats
