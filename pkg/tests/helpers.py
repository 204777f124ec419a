"""Shared test utilities: finite differences, reference filter algebra, stubs."""

from __future__ import annotations

import numpy as np

from iroco.denkf.models import FilterModels
from iroco.neural.mlp import MlpParams, MlpSpec


def inv_softplus(y):
    """Pre-activation value whose softplus equals y (y > 0)."""
    return np.log(np.expm1(np.asarray(y, dtype=np.float64)))


def linear_models(
    window: int,
    state_dim: int,
    transition_mat: np.ndarray,
    noise_diag: np.ndarray,
    dropout: float = 0.0,
) -> FilterModels:
    """Filter models that are plain linear maps (no hidden layers).

    The transition applies `transition_mat` to the newest state in the
    history window; the observation model is the identity; the noise model
    ignores its input and produces `noise_diag` after softplus; the sensor
    model copies the newest raw frame (raw dim equals state dim here).
    """
    s = state_dim
    trans_w = np.zeros((window * s, s))
    trans_w[(window - 1) * s :, :] = np.asarray(transition_mat, dtype=np.float64).T
    sensor_w = np.zeros((window * s, s))
    sensor_w[(window - 1) * s :, :] = np.eye(s)
    return FilterModels(
        transition_spec=MlpSpec(window * s, (), s, ()),
        observation_spec=MlpSpec(s, (), s, ()),
        noise_spec=MlpSpec(s, (), s, ()),
        sensor_spec=MlpSpec(window * s, (), s, ()),
        transition=MlpParams(weights=[trans_w], biases=[np.zeros(s)]),
        observation=MlpParams(weights=[np.eye(s)], biases=[np.zeros(s)]),
        noise=MlpParams(weights=[np.zeros((s, s))], biases=[inv_softplus(noise_diag)]),
        sensor=MlpParams(weights=[sensor_w], biases=[np.zeros(s)]),
        window=window,
        dropout=dropout,
    )


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x.

    Perturbs x in place entry by entry; f must read the current contents on
    every call.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = f(x)
        flat_x[i] = orig - h
        f_minus = f(x)
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def grad_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative disagreement between two gradients of one tensor."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


def classic_kalman_filter(x0, p0, f_mat, q_mat, h_mat, r_mat, observations):
    """Textbook linear Kalman filter; returns per-step posterior means.

    All arguments are plain matrices; observations is (T, obs_dim).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    p = np.asarray(p0, dtype=np.float64).copy()
    means = []
    for y in observations:
        # Predict.
        x = f_mat @ x
        p = f_mat @ p @ f_mat.T + q_mat
        # Update.
        s = h_mat @ p @ h_mat.T + r_mat
        k = p @ h_mat.T @ np.linalg.inv(s)
        x = x + k @ (y - h_mat @ x)
        p = (np.eye(len(x)) - k @ h_mat) @ p
        means.append(x.copy())
    return np.stack(means)


def dense_ensemble_update(members, projected, noise_diag, perturbed_obs, ridge=1e-6):
    """Reference ensemble update in members-as-columns dense algebra.

    members: (state_dim, n_members) forecast ensemble X~
    projected: (obs_dim, n_members) HX~
    noise_diag: (obs_dim,) observation noise variances
    perturbed_obs: (obs_dim, n_members) Y~
    Uses an explicit matrix inverse, deliberately different from the
    production solve path.
    """
    n = members.shape[1]
    a = members - members.mean(axis=1, keepdims=True)
    ha = projected - projected.mean(axis=1, keepdims=True)
    s = ha @ ha.T / (n - 1) + np.diag(noise_diag) + ridge * np.eye(projected.shape[0])
    k = (a @ ha.T / (n - 1)) @ np.linalg.inv(s)
    return members + k @ (perturbed_obs - projected)
