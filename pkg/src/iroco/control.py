"""Mapping estimated poses to robot end-effector targets.

The user's heading defines a body-local frame that turns with them.  The
wrist position in that frame is projected onto the sagittal plane (the
lateral X component is dropped), optionally smoothed and scaled, then
shifted by the workspace origin and clamped per axis into the workspace
box.  Because the heading is removed before projection, turning in place
leaves the target fixed; only the arm's pose relative to the body matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import PoseState, arm_points
from .rotations import BodyModel


class LengthMismatch(ValueError):
    """Paired trace sequences have different lengths."""


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box the robot end effector may occupy, in its base frame."""

    x_extent: float = 1.6
    y_extent: float = 0.6
    z_extent: float = 1.0
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if min(self.x_extent, self.y_extent, self.z_extent) <= 0:
            raise ValueError("workspace extents must be positive")
        origin = np.asarray(self.origin, dtype=np.float64)
        if origin.shape != (3,):
            raise ValueError("origin must be a 3-vector")
        object.__setattr__(self, "origin", origin)

    @property
    def half_extents(self) -> np.ndarray:
        return np.array([self.x_extent, self.y_extent, self.z_extent]) / 2.0


@dataclass(frozen=True)
class EndEffectorTarget:
    position: np.ndarray  # 3-vector, robot-base frame, inside the workspace
    clamped: np.ndarray  # per-axis bool, True where the box boundary was hit


@dataclass
class EmaSmoother:
    """Exponential moving average over 3-vectors; alpha 1 passes through."""

    alpha: float
    _prev: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")

    def reset(self) -> None:
        self._prev = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self._prev is None:
            self._prev = x.copy()
        else:
            self._prev = self.alpha * x + (1.0 - self.alpha) * self._prev
        return self._prev.copy()


def ee_target(
    state: PoseState,
    body: BodyModel,
    ws: Workspace,
    gain: float = 1.0,
    smoother: EmaSmoother | None = None,
) -> EndEffectorTarget:
    """Body-local wrist, projected to the sagittal plane, clamped to the box."""
    wrist = arm_points(state, body, frame="local").wrist
    projected = np.array([0.0, wrist[1], wrist[2]])
    if smoother is not None:
        projected = smoother(projected)
    position = ws.origin + gain * projected
    lo = ws.origin - ws.half_extents
    hi = ws.origin + ws.half_extents
    clamped = (position < lo) | (position > hi)
    return EndEffectorTarget(position=np.clip(position, lo, hi), clamped=clamped)


def _positions(seq) -> np.ndarray:
    rows = [p.position if isinstance(p, EndEffectorTarget) else np.asarray(p) for p in seq]
    return np.stack(rows).astype(np.float64)


def trace_eval(targets, reference, tolerance: float = 0.02) -> dict:
    """Compare a traced path against a template on the sagittal plane.

    Returns pointwise RMSE in meters and the fraction of points within
    `tolerance` of the template.  Sequences must already be resampled to
    equal length.
    """
    targets, reference = list(targets), list(reference)
    if len(targets) != len(reference):
        raise LengthMismatch(f"{len(targets)} trace points vs {len(reference)} reference")
    if not targets:
        raise LengthMismatch("empty traces")
    got = _positions(targets)
    ref = _positions(reference)
    delta = got[:, 1:] - ref[:, 1:]  # sagittal plane: Y and Z only
    dist_sq = (delta**2).sum(axis=1)
    return {
        "rmse": float(np.sqrt(dist_sq.mean())),
        "completion": float((np.sqrt(dist_sq) <= tolerance).mean()),
    }
