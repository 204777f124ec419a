from collections import deque

import numpy as np
import pytest
from helpers import grad_rel_err, numeric_grad

from iroco.denkf.filtering import Ensemble, filter_step
from iroco.denkf.models import build_filter_models
from iroco.denkf.training import (
    DataTooShort,
    TrainConfig,
    build_param_vars,
    draw_step_masks,
    step_losses,
    train,
)
from iroco.neural import autodiff as ad


def test_config_validation_and_smoke_preset():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(ensemble_size=1)
    smoke = TrainConfig.smoke()
    assert smoke.epochs == 5 and smoke.width_div == 8
    assert smoke.batch_size < TrainConfig().batch_size  # more steps per epoch
    assert TrainConfig.smoke(epochs=2).epochs == 2
    # Untouched fields keep full-scale defaults.
    assert smoke.window == TrainConfig().window
    assert smoke.ensemble_size == TrainConfig().ensemble_size


def test_rejects_empty_and_short_sessions():
    cfg = TrainConfig(epochs=1, window=3, ensemble_size=2, width_div=64)
    with pytest.raises(DataTooShort):
        train([], cfg)
    obs = np.zeros((3, 22))
    gt = np.zeros((3, 27))
    with pytest.raises(DataTooShort):
        train([(obs, gt)], cfg)


def test_rejects_window_mismatch():
    models = build_filter_models(window=3, dropout=0.0, width_div=64)
    cfg = TrainConfig(epochs=1, window=2, ensemble_size=2, width_div=64)
    obs = np.zeros((8, 22))
    gt = np.zeros((8, 27))
    with pytest.raises(ValueError):
        train([(obs, gt)], cfg, models=models)


def test_draw_step_masks_shapes():
    rng = np.random.default_rng(0)
    models = build_filter_models(window=2, dropout=0.2, width_div=64, rng=rng)
    masks = draw_step_masks(models, batch=3, ensemble=4, rng=rng)
    t0 = masks["transition"].masks[0]
    assert t0.shape == (3, 4, models.transition_spec.hidden[0])
    d0 = masks["transition_direct"].masks[0]
    assert d0.shape == (3, models.transition_spec.hidden[0])
    flat = build_filter_models(window=2, dropout=0.0, width_div=64, rng=rng)
    none_masks = draw_step_masks(flat, 3, 4, rng)
    assert all(v is None for v in none_masks.values())


def _training_inputs(models, batch, ensemble, rng):
    n, s, r = models.window, models.state_dim, models.raw_dim
    history = rng.normal(size=(batch, ensemble, n, s))
    raw = rng.normal(size=(batch, n * r))
    raw_flat = np.broadcast_to(raw[:, None, :], (batch, ensemble, n * r)).copy()
    direct = rng.normal(size=(batch, n * s))
    gt = rng.normal(size=(batch, s))
    return history, raw, raw_flat, direct, gt


def test_step_losses_matches_inference_without_dropout():
    # Same algebra two ways: the tape step and the numpy inference step.
    rng = np.random.default_rng(1)
    models = build_filter_models(window=3, dropout=0.0, width_div=32, rng=rng)
    ensemble = 5
    history, raw, raw_flat, direct, gt = _training_inputs(models, 1, ensemble, rng)

    pvars = build_param_vars(models)
    masks = {"transition": None, "sensor": None, "transition_direct": None}
    total, parts, updated, sensor_mean = step_losses(
        models, pvars, history, raw_flat, direct, gt, masks
    )

    hist = deque((history[0, :, i] for i in range(models.window)), maxlen=models.window)
    ens = Ensemble(members=history[0, :, -1].copy(), history=hist)
    raw_window = raw[0].reshape(models.window, models.raw_dim)
    _, mean, diag = filter_step(ens, raw_window, models)

    np.testing.assert_allclose(updated[0].mean(axis=0), mean, atol=1e-9)
    assert np.isfinite(total.value)
    assert parts["end_to_end"] >= 0 and parts["sensor"] >= 0
    np.testing.assert_allclose(
        parts["end_to_end"], np.mean((mean - gt[0]) ** 2), atol=1e-9
    )


def test_step_losses_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    models = build_filter_models(
        window=2, dropout=0.1, width_div=128, rng=rng, state_dim=4, raw_dim=3
    )
    # Nudge biases off zero so no ReLU pre-activation sits exactly on the kink
    # (finite differences straddle it there).
    for arr in models.parameter_arrays():
        if arr.ndim == 1:
            arr += rng.normal(scale=0.1, size=arr.shape)
    batch, ensemble = 2, 3
    history, _, raw_flat, direct, gt = _training_inputs(models, batch, ensemble, rng)
    masks = draw_step_masks(models, batch, ensemble, rng)

    def loss() -> float:
        pvars = build_param_vars(models)
        total, _, _, _ = step_losses(models, pvars, history, raw_flat, direct, gt, masks)
        return float(total.value)

    pvars = build_param_vars(models)
    total, _, _, _ = step_losses(models, pvars, history, raw_flat, direct, gt, masks)
    ad.backward(total)
    analytic = [v.grad for v in pvars.ordered()]

    for arr, grad in zip(models.parameter_arrays(), analytic):
        if grad is None:
            grad = np.zeros_like(arr)
        numeric = numeric_grad(lambda _: loss(), arr, h=1e-5)
        assert grad_rel_err(grad, numeric) < 1e-4


def test_gradients_accumulate_across_steps():
    rng = np.random.default_rng(3)
    models = build_filter_models(
        window=2, dropout=0.0, width_div=128, rng=rng, state_dim=3, raw_dim=3
    )
    history, _, raw_flat, direct, gt = _training_inputs(models, 1, 3, rng)
    masks = {"transition": None, "sensor": None, "transition_direct": None}
    pvars = build_param_vars(models)
    total, _, _, _ = step_losses(models, pvars, history, raw_flat, direct, gt, masks)
    ad.backward(total)
    one_step = [v.grad.copy() for v in pvars.ordered()]
    # Same step again on the same tape variables: grads double exactly.
    total, _, _, _ = step_losses(models, pvars, history, raw_flat, direct, gt, masks)
    ad.backward(total)
    for v, g1 in zip(pvars.ordered(), one_step):
        np.testing.assert_allclose(v.grad, 2.0 * g1, rtol=1e-12)


def _toy_dataset(rng, sessions=3, frames=60, dim=3):
    out = []
    for _ in range(sessions):
        t = np.linspace(0, 4 * np.pi, frames)
        phase = rng.uniform(0, 2 * np.pi, size=dim)
        gt = np.sin(t[:, None] + phase[None, :])
        obs = gt + rng.normal(scale=0.1, size=gt.shape)
        out.append((obs, gt))
    return out


def test_training_reduces_losses():
    rng = np.random.default_rng(4)
    dataset = _toy_dataset(rng)
    models = build_filter_models(
        window=2, dropout=0.05, width_div=16, rng=rng, state_dim=3, raw_dim=3
    )
    cfg = TrainConfig(
        epochs=10,
        batch_size=16,
        learning_rate=3e-3,
        ensemble_size=4,
        window=2,
        dropout=0.05,
        subseq_len=8,
        stride=4,
        seed=0,
    )
    trained, stats = train(dataset, cfg, models=models)
    assert len(stats) == cfg.epochs
    assert trained is models  # updates happen in place
    assert stats[-1].sensor_loss < 0.5 * stats[0].sensor_loss
    assert stats[-1].end_to_end < stats[0].end_to_end
    assert all(np.isfinite([s.end_to_end, s.transition_loss, s.sensor_loss]).all() for s in stats)


def test_train_builds_default_models_when_none_given():
    rng = np.random.default_rng(5)
    obs = rng.normal(size=(20, 22))
    gt = rng.normal(size=(20, 27))
    cfg = TrainConfig(
        epochs=1, batch_size=4, ensemble_size=2, window=2, width_div=64, subseq_len=4
    )
    models, stats = train([(obs, gt)], cfg)
    assert models.window == 2
    assert models.state_dim == 27 and models.raw_dim == 22
    assert len(stats) == 1
