"""Observation/state records, calibration, yaw augmentation, and dataset files.

The sensor stream is a 22-number observation per frame and the estimated pose
is a 27-number state; the flat layouts below are the contract every other
module builds on:

observation (22): [dt, watch_rot(6), velocity(3), lin_acc(3), gravity(3),
                   gyro(3), pressure, heading(2)]
state (27):       [upper_rot(6), lower_rot(6), heading(2), upper_vel(6),
                   lower_vel(6), heading_vel]

``upper_rot``/``lower_rot`` live in the calibrated world frame (the frame set
by the start pose), matching the watch orientation channel; the body-local
arm pose is recovered by removing the heading yaw (:func:`arm_points`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .rotations import (
    ArmPoints,
    BodyModel,
    Heading,
    Quaternion,
    SixDRR,
    fk_local,
    heading_decode,
    heading_encode,
    heading_to_matrix,
    quat_to_6drr,
    rotate_heading,
    yaw_matrix,
)

OBS_DIM = 22
STATE_DIM = 27

OBS_COLUMNS = (
    ["dt"]
    + [f"watch_rot.{i}" for i in range(6)]
    + [f"velocity.{i}" for i in range(3)]
    + [f"lin_acc.{i}" for i in range(3)]
    + [f"gravity.{i}" for i in range(3)]
    + [f"gyro.{i}" for i in range(3)]
    + ["pressure"]
    + [f"heading.{i}" for i in range(2)]
)
STATE_COLUMNS = (
    [f"upper_rot.{i}" for i in range(6)]
    + [f"lower_rot.{i}" for i in range(6)]
    + [f"heading.{i}" for i in range(2)]
    + [f"upper_vel.{i}" for i in range(6)]
    + [f"lower_vel.{i}" for i in range(6)]
    + ["heading_vel"]
)

_UNITS = {
    "dt": "s",
    "watch_rot": "6d",
    "velocity": "m/s",
    "lin_acc": "m/s^2",
    "gravity": "m/s^2",
    "gyro": "rad/s",
    "pressure": "hPa",
    "heading": "sincos",
    "upper_rot": "6d",
    "lower_rot": "6d",
    "upper_vel": "1/s",
    "lower_vel": "1/s",
    "heading_vel": "rad/s",
    "t": "s",
}

_FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed dataset file; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _vecn(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"expected {n}-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class Observation:
    """One calibrated sensor sample from the watch/phone pair."""

    dt: float
    watch_rot: SixDRR
    velocity: np.ndarray
    lin_acc: np.ndarray
    gravity: np.ndarray
    gyro: np.ndarray
    pressure: float
    heading: Heading

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "velocity", _vecn(self.velocity, 3))
        object.__setattr__(self, "lin_acc", _vecn(self.lin_acc, 3))
        object.__setattr__(self, "gravity", _vecn(self.gravity, 3))
        object.__setattr__(self, "gyro", _vecn(self.gyro, 3))

    def flatten(self) -> np.ndarray:
        out = np.empty(OBS_DIM, dtype=np.float64)
        out[0] = self.dt
        out[1:7] = self.watch_rot.flatten()
        out[7:10] = self.velocity
        out[10:13] = self.lin_acc
        out[13:16] = self.gravity
        out[16:19] = self.gyro
        out[19] = self.pressure
        out[20:22] = self.heading.flatten()
        return out

    @classmethod
    def from_flat(cls, flat) -> "Observation":
        f = _vecn(flat, OBS_DIM)
        return cls(
            dt=float(f[0]),
            watch_rot=SixDRR.from_flat(f[1:7]),
            velocity=f[7:10].copy(),
            lin_acc=f[10:13].copy(),
            gravity=f[13:16].copy(),
            gyro=f[16:19].copy(),
            pressure=float(f[19]),
            heading=Heading(float(f[20]), float(f[21])),
        )


@dataclass(frozen=True, eq=False)
class PoseState:
    """Arm pose, heading, and their velocities (the filter's state vector)."""

    upper_rot: SixDRR
    lower_rot: SixDRR
    heading: Heading
    upper_vel: np.ndarray
    lower_vel: np.ndarray
    heading_vel: float

    def __post_init__(self):
        object.__setattr__(self, "upper_vel", _vecn(self.upper_vel, 6))
        object.__setattr__(self, "lower_vel", _vecn(self.lower_vel, 6))

    @classmethod
    def rest(cls) -> "PoseState":
        """Calibration start pose: identity rotations, zero velocities."""
        return cls(
            upper_rot=SixDRR.identity(),
            lower_rot=SixDRR.identity(),
            heading=Heading.identity(),
            upper_vel=np.zeros(6),
            lower_vel=np.zeros(6),
            heading_vel=0.0,
        )

    def flatten(self) -> np.ndarray:
        out = np.empty(STATE_DIM, dtype=np.float64)
        out[0:6] = self.upper_rot.flatten()
        out[6:12] = self.lower_rot.flatten()
        out[12:14] = self.heading.flatten()
        out[14:20] = self.upper_vel
        out[20:26] = self.lower_vel
        out[26] = self.heading_vel
        return out

    @classmethod
    def from_flat(cls, flat) -> "PoseState":
        f = _vecn(flat, STATE_DIM)
        return cls(
            upper_rot=SixDRR.from_flat(f[0:6]),
            lower_rot=SixDRR.from_flat(f[6:12]),
            heading=Heading(float(f[12]), float(f[13])),
            upper_vel=f[14:20].copy(),
            lower_vel=f[20:26].copy(),
            heading_vel=float(f[26]),
        )


@dataclass(frozen=True)
class CalibrationSnapshot:
    """Raw device readings captured in the start pose; later frames are relative."""

    theta0: Quaternion
    yaw0: float
    rho0: float

    def __post_init__(self):
        object.__setattr__(self, "theta0", self.theta0.normalized())


@dataclass(frozen=True, eq=False)
class LabeledFrame:
    obs: Observation
    gt: PoseState
    t: float


def calibrate(
    raw_theta: Quaternion, raw_yaw: float, raw_rho: float, snap: CalibrationSnapshot
) -> tuple[SixDRR, Heading, float]:
    """Express raw watch/phone/barometer readings relative to the snapshot."""
    rel = snap.theta0.conjugate() * raw_theta.normalized()
    return quat_to_6drr(rel), heading_encode(raw_yaw - snap.yaw0), raw_rho - snap.rho0


def integrate_velocity(alpha, dt: float) -> np.ndarray:
    """Per-interval integral of linear acceleration over one frame gap.

    Deliberately stateless: a running integral of noisy acceleration diverges,
    so accumulation across frames is left to callers that want it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _vecn(alpha, 3) * dt


def _rotate_sixdrr(r: SixDRR, ry: np.ndarray) -> SixDRR:
    # Column-wise rotation; linear, so it applies to noisy encodings too.
    return SixDRR(ry @ r.a1, ry @ r.a2)


def _rotate_vel6(v: np.ndarray, ry: np.ndarray) -> np.ndarray:
    return np.concatenate([ry @ v[:3], ry @ v[3:]])


def augment_yaw(frame: LabeledFrame, angle: float) -> LabeledFrame:
    """Rotate the world-frame channels of a frame about the up axis.

    Simulates an extra body orientation: the watch orientation, phone heading,
    and ground-truth pose turn together while every watch-frame sensor channel
    (velocity, accelerations, gravity, gyro, pressure, dt) is left untouched.
    Ground-truth rotation velocities co-rotate so they stay the finite
    differences of the rotated orientations.
    """
    if angle == 0.0:
        return frame
    ry = yaw_matrix(angle)
    obs = replace(
        frame.obs,
        watch_rot=_rotate_sixdrr(frame.obs.watch_rot, ry),
        heading=rotate_heading(frame.obs.heading, angle),
    )
    gt = replace(
        frame.gt,
        upper_rot=_rotate_sixdrr(frame.gt.upper_rot, ry),
        lower_rot=_rotate_sixdrr(frame.gt.lower_rot, ry),
        heading=rotate_heading(frame.gt.heading, angle),
        upper_vel=_rotate_vel6(frame.gt.upper_vel, ry),
        lower_vel=_rotate_vel6(frame.gt.lower_vel, ry),
    )
    return LabeledFrame(obs=obs, gt=gt, t=frame.t)


def arm_points(state: PoseState, body: BodyModel, frame: str = "local") -> ArmPoints:
    """Elbow/wrist positions of a state, body-local (heading removed) or world.

    State rotations are world-frame, so the body-local pose is obtained by
    removing the heading yaw before running the kinematic chain.
    """
    if frame not in ("local", "world"):
        raise ValueError(f"frame must be 'local' or 'world', got {frame!r}")
    ry_inv = heading_to_matrix(state.heading).T
    q_u = _rotate_sixdrr(state.upper_rot, ry_inv)
    q_l = _rotate_sixdrr(state.lower_rot, ry_inv)
    local = fk_local(q_u, q_l, body)
    if frame == "local":
        return local
    ry = heading_to_matrix(state.heading)
    return ArmPoints(ry @ local.elbow, ry @ local.wrist)


def state_yaw(state: PoseState) -> float:
    return heading_decode(state.heading)


def finite_difference_velocities(
    rot6_prev: np.ndarray, rot6_cur: np.ndarray, yaw_prev: float, yaw_cur: float, dt: float
) -> tuple[np.ndarray, float]:
    """Backward-difference velocity estimate for one rotation group + yaw."""
    dv = (np.asarray(rot6_cur) - np.asarray(rot6_prev)) / dt
    dyaw = math.remainder(yaw_cur - yaw_prev, 2.0 * math.pi) / dt
    return dv, dyaw


def _header() -> dict:
    return {
        "version": _FORMAT_VERSION,
        "columns": [f"obs.{c}" for c in OBS_COLUMNS] + [f"gt.{c}" for c in STATE_COLUMNS],
        "units": _UNITS,
    }


def dataset_write(frames: Iterable[LabeledFrame], path) -> None:
    """Write one session to a JSON-Lines file (header line + one line per frame)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_header(), separators=(",", ":")) + "\n")
        for fr in frames:
            row = {
                "t": fr.t,
                "obs": fr.obs.flatten().tolist(),
                "gt": fr.gt.flatten().tolist(),
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def dataset_read(path) -> list[LabeledFrame]:
    """Read a session file; raises :class:`FormatError` with the bad line number."""
    frames: list[LabeledFrame] = []
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError("missing header", 1)
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad header: {exc.msg}", 1) from exc
        if header.get("version") != _FORMAT_VERSION:
            raise FormatError(f"unsupported version {header.get('version')!r}", 1)
        if len(header.get("columns", [])) != OBS_DIM + STATE_DIM:
            raise FormatError("unexpected column count in header", 1)
        prev_t = -math.inf
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad record: {exc.msg}", lineno) from exc
            try:
                obs = Observation.from_flat(row["obs"])
                gt = PoseState.from_flat(row["gt"])
                t = float(row["t"])
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(str(exc), lineno) from exc
            if t <= prev_t:
                raise FormatError(f"time not strictly increasing at t={t}", lineno)
            prev_t = t
            frames.append(LabeledFrame(obs=obs, gt=gt, t=t))
    return frames


def frames_to_arrays(frames: Sequence[LabeledFrame]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a session into (t, obs[T,22], gt[T,27]) float64 arrays."""
    t = np.array([f.t for f in frames], dtype=np.float64)
    obs = np.stack([f.obs.flatten() for f in frames]) if frames else np.zeros((0, OBS_DIM))
    gt = np.stack([f.gt.flatten() for f in frames]) if frames else np.zeros((0, STATE_DIM))
    return t, obs, gt
