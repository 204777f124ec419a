"""Synthetic arm-motion trajectories and simulated device sensor streams.

Motion model: each of the six body-local joint angle channels (three per arm
segment) is a product of two sinusoids evaluated on a warped clock, so the
whole arm speeds up and slows down together.  The warp rate follows a slow
sinusoidal envelope, which gives every session distinct slow and fast phases.
Heading is an independent sum of slow sinusoids.  Both the joint angles and
the heading are shifted so that every session starts exactly in the
calibration rest pose (identity rotations, yaw zero); streamed raw readings
calibrated against the first frame then land in the same frame as the
ground truth.

Sensor model (all watch channels expressed in the lower-arm frame):

- orientation: ground-truth lower-arm rotation with rotation-vector noise
- gravity: world down vector rotated into the watch frame
- gyro: rotation-vector log of the frame-to-frame relative rotation over dt
- linear acceleration: second difference of the world wrist path, watch frame
- velocity: per-interval integral of the noisy acceleration (optionally
  accumulated across frames, off by default because it drifts)
- pressure: height-proportional drop from the session start, 0.12 hPa per m
- heading: ground-truth yaw with additive noise

A fixed sample rate is assumed when differencing.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .datamodel import LabeledFrame, Observation, PoseState, arm_points
from .rotations import (
    BodyModel,
    Quaternion,
    SixDRR,
    heading_encode,
    quat_to_6drr,
    random_quaternion,
    rotmat_to_quat,
    sixdrr_to_rotmat,
)

GRAVITY = 9.81
PRESSURE_PER_METER = 0.12  # hPa drop per meter of altitude gain
SEA_LEVEL_PRESSURE = 1013.25  # hPa


class TooShort(ValueError):
    """Not enough frames to form the finite differences the sensors need."""


@dataclass(frozen=True)
class MotionConfig:
    rate: float = 50.0  # frames per second
    duration: float = 60.0  # seconds
    joint_amp: float = 0.9  # peak joint angle, radians
    base_freq: float = 0.35  # nominal joint oscillation frequency, Hz
    env_period: float = 20.0  # seconds per slow/fast cycle
    env_min: float = 0.25  # slowest clock rate multiplier
    env_max: float = 1.75  # fastest clock rate multiplier
    heading_amp: float = 0.6  # radians per heading sinusoid
    heading_period: float = 30.0  # seconds, base heading period

    def __post_init__(self):
        if self.rate <= 0 or self.duration <= 0:
            raise ValueError("rate and duration must be positive")
        if not (0 < self.env_min <= self.env_max):
            raise ValueError("need 0 < env_min <= env_max")
        if self.env_period <= 0 or self.heading_period <= 0:
            raise ValueError("periods must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    watch_rot: float = 0.02  # rad, rotation-vector std
    lin_acc: float = 0.3  # m/s^2 per axis
    gravity: float = 0.1  # m/s^2 per axis
    gyro: float = 0.05  # rad/s per axis
    pressure: float = 0.05  # hPa
    heading: float = 0.03  # rad

    def __post_init__(self):
        for name in ("watch_rot", "lin_acc", "gravity", "gyro", "pressure", "heading"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} noise must be non-negative")

    @classmethod
    def silent(cls) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class _Channel:
    # Angle = amp * (sin(2*pi*f1*s + p1) * sin(2*pi*f2*s + p2) - offset), with
    # offset chosen so the angle is exactly zero at s = 0: every session starts
    # in the calibration rest pose.
    amp: float
    f1: float
    p1: float
    f2: float
    p2: float
    offset: float

    def value(self, s: float) -> float:
        return self.amp * (
            math.sin(2 * math.pi * self.f1 * s + self.p1)
            * math.sin(2 * math.pi * self.f2 * s + self.p2)
            - self.offset
        )


class _OscillatorBank:
    """Closed-form joint angle, envelope, and heading functions of time."""

    def __init__(self, cfg: MotionConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.channels = []
        for _ in range(6):
            p1 = rng.uniform(0, 2 * math.pi)
            p2 = rng.uniform(0, 2 * math.pi)
            offset = math.sin(p1) * math.sin(p2)
            self.channels.append(
                _Channel(
                    amp=cfg.joint_amp * rng.uniform(0.4, 1.0) / (1.0 + abs(offset)),
                    f1=cfg.base_freq * rng.uniform(0.5, 1.5),
                    p1=p1,
                    f2=cfg.base_freq * rng.uniform(0.1, 0.5),
                    p2=p2,
                    offset=offset,
                )
            )
        self.env_phase = rng.uniform(0, 2 * math.pi)
        self.heading_terms = [
            (
                cfg.heading_amp * rng.uniform(0.3, 1.0) / (j + 1),
                cfg.heading_period / (j + 1) * rng.uniform(0.8, 1.2),
                rng.uniform(0, 2 * math.pi),
            )
            for j in range(3)
        ]

    def envelope(self, t: float) -> float:
        base = 0.5 * (self.cfg.env_max + self.cfg.env_min)
        amp = 0.5 * (self.cfg.env_max - self.cfg.env_min)
        return base + amp * math.sin(2 * math.pi * t / self.cfg.env_period + self.env_phase)

    def warped_time(self, t: float) -> float:
        # Analytic integral of the envelope from 0 to t.
        base = 0.5 * (self.cfg.env_max + self.cfg.env_min)
        amp = 0.5 * (self.cfg.env_max - self.cfg.env_min)
        w = 2 * math.pi / self.cfg.env_period
        return base * t - amp / w * (math.cos(w * t + self.env_phase) - math.cos(self.env_phase))

    def yaw(self, t: float) -> float:
        total = 0.0
        for amp, period, phase in self.heading_terms:
            total += amp * (math.sin(2 * math.pi * t / period + phase) - math.sin(phase))
        return total

    def local_rotations(self, t: float) -> tuple[Quaternion, Quaternion]:
        s = self.warped_time(t)
        a = [ch.value(s) for ch in self.channels]
        upper = (
            Quaternion.from_axis_angle((1, 0, 0), a[0])
            * Quaternion.from_axis_angle((0, 1, 0), a[1])
            * Quaternion.from_axis_angle((0, 0, 1), a[2])
        )
        lower = (
            Quaternion.from_axis_angle((1, 0, 0), a[3])
            * Quaternion.from_axis_angle((0, 1, 0), a[4])
            * Quaternion.from_axis_angle((0, 0, 1), a[5])
        )
        return upper, lower

    def pose_at(self, t: float) -> tuple[SixDRR, SixDRR, float]:
        """World-frame segment rotations and yaw at time t (no velocities)."""
        yaw = self.yaw(t)
        q_yaw = Quaternion.from_axis_angle((0, 1, 0), yaw)
        local_u, local_l = self.local_rotations(t)
        return quat_to_6drr(q_yaw * local_u), quat_to_6drr(q_yaw * local_l), yaw


def _state_from_bank(bank: _OscillatorBank, t: float, dt: float, first: bool) -> PoseState:
    q_u, q_l, yaw = bank.pose_at(t)
    if first:
        vel_u = np.zeros(6)
        vel_l = np.zeros(6)
        dyaw = 0.0
    else:
        pu, pl, pyaw = bank.pose_at(t - dt)
        vel_u = (q_u.flatten() - pu.flatten()) / dt
        vel_l = (q_l.flatten() - pl.flatten()) / dt
        dyaw = math.remainder(yaw - pyaw, 2 * math.pi) / dt
    return PoseState(
        upper_rot=q_u,
        lower_rot=q_l,
        heading=heading_encode(yaw),
        upper_vel=vel_u,
        lower_vel=vel_l,
        heading_vel=dyaw,
    )


def gen_trajectory(
    cfg: MotionConfig, rng: np.random.Generator
) -> tuple[np.ndarray, list[PoseState]]:
    """Sample a ground-truth pose trajectory at the configured rate.

    Velocities are backward differences of the encoded pose; the first frame's
    velocities are zero.
    """
    bank = _OscillatorBank(cfg, rng)
    dt = 1.0 / cfg.rate
    n = max(int(round(cfg.duration * cfg.rate)), 1)
    times = np.arange(n, dtype=np.float64) * dt
    states = [_state_from_bank(bank, float(t), dt, first=(k == 0)) for k, t in enumerate(times)]
    return times, states


def _rotvec_noise(rng: np.random.Generator, scale: float) -> np.ndarray:
    if scale == 0.0:
        return np.eye(3)
    return _ScipyRotation.from_rotvec(rng.normal(scale=scale, size=3)).as_matrix()


def simulate_sensors(
    times: np.ndarray,
    states: list[PoseState],
    noise: NoiseConfig,
    body: BodyModel | None = None,
    rng: np.random.Generator | None = None,
    accumulate_velocity: bool = False,
) -> list[LabeledFrame]:
    """Turn a ground-truth trajectory into labeled sensor frames.

    Needs at least three frames for the wrist-path second difference; shorter
    inputs raise :class:`TooShort`.  Boundary frames reuse the nearest interior
    acceleration/gyro estimate.
    """
    if len(states) < 3:
        raise TooShort(f"need at least 3 frames, got {len(states)}")
    if len(times) != len(states):
        raise ValueError("times and states must have equal length")
    body = body or BodyModel.default()
    rng = rng or np.random.default_rng()
    n = len(states)
    dt = float(times[1] - times[0])
    if dt <= 0:
        raise ValueError("times must be strictly increasing")

    rot_l = [sixdrr_to_rotmat(s.lower_rot) for s in states]
    wrist = np.stack([arm_points(s, body, frame="world").wrist for s in states])
    down = np.array([0.0, -GRAVITY, 0.0])

    # Central second difference of the wrist path, watch frame.
    acc = np.zeros((n, 3))
    for k in range(1, n - 1):
        world_acc = (wrist[k + 1] - 2 * wrist[k] + wrist[k - 1]) / (dt * dt)
        acc[k] = rot_l[k].T @ world_acc
    acc[0] = acc[1]
    acc[-1] = acc[-2]

    # Frame-to-frame angular velocity in the watch frame.
    gyro = np.zeros((n, 3))
    for k in range(1, n):
        rel = rot_l[k - 1].T @ rot_l[k]
        gyro[k] = _ScipyRotation.from_matrix(rel).as_rotvec() / dt
    gyro[0] = gyro[1]

    frames: list[LabeledFrame] = []
    vel = np.zeros(3)
    base_height = float(wrist[0, 1])
    for k in range(n):
        state = states[k]
        noisy_acc = acc[k] + rng.normal(scale=noise.lin_acc, size=3)
        if accumulate_velocity:
            vel = vel + noisy_acc * dt
        else:
            vel = noisy_acc * dt
        watch_rot6 = sixdrr_to_rotmat(state.lower_rot) @ _rotvec_noise(rng, noise.watch_rot)
        obs = Observation(
            dt=dt,
            watch_rot=SixDRR(watch_rot6[:, 0].copy(), watch_rot6[:, 1].copy()),
            velocity=vel.copy(),
            lin_acc=noisy_acc,
            gravity=rot_l[k].T @ down + rng.normal(scale=noise.gravity, size=3),
            gyro=gyro[k] + rng.normal(scale=noise.gyro, size=3),
            pressure=-PRESSURE_PER_METER * (float(wrist[k, 1]) - base_height)
            + rng.normal(scale=noise.pressure),
            heading=heading_encode(
                math.atan2(state.heading.s, state.heading.c) + rng.normal(scale=noise.heading)
            ),
        )
        frames.append(LabeledFrame(obs=obs, gt=state, t=float(times[k])))
    return frames


def gen_session(
    motion: MotionConfig,
    noise: NoiseConfig,
    rng: np.random.Generator,
    body: BodyModel | None = None,
    accumulate_velocity: bool = False,
) -> list[LabeledFrame]:
    """Convenience wrapper: trajectory plus sensors in one call."""
    times, states = gen_trajectory(motion, rng)
    return simulate_sensors(
        times, states, noise, body=body, rng=rng, accumulate_velocity=accumulate_velocity
    )


@dataclass(frozen=True, eq=False)
class RawSample:
    """One uncalibrated device reading, as the live service would receive it.

    Orientation carries the device's arbitrary boot-time reference frame,
    heading carries a compass offset, and pressure is absolute.
    """

    t: float
    dt: float
    theta: Quaternion
    velocity: np.ndarray
    lin_acc: np.ndarray
    gravity: np.ndarray
    gyro: np.ndarray
    pressure: float
    yaw: float


class StreamingSensorSim:
    """Turns a live stream of ground-truth states into raw device readings.

    States are pushed in frame by frame, so the inertial channels use causal
    (backward) differences and report zeros until enough history exists.
    Unlike :func:`simulate_sensors` the outputs are uncalibrated: the watch
    orientation is premultiplied by a random fixed reference rotation, the
    compass has a random constant offset, and pressure is absolute around
    standard sea level.  Consumers run the calibration step themselves,
    which is exactly what the live service does.
    """

    def __init__(
        self,
        rate: float,
        noise: NoiseConfig,
        body: BodyModel | None = None,
        seed: int = 0,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self._rng = np.random.default_rng(seed)
        self._noise = noise
        self._body = body or BodyModel.default()
        self._dt = 1.0 / rate
        self._mount = random_quaternion(self._rng)
        self._yaw_offset = float(self._rng.uniform(-math.pi, math.pi))
        self._k = 0
        self._base_height: float | None = None
        self._rots: deque[np.ndarray] = deque(maxlen=2)
        self._wrists: deque[np.ndarray] = deque(maxlen=3)

    def push(self, state: PoseState) -> RawSample:
        """Consume one ground-truth frame and emit its raw reading."""
        rng, noise, dt = self._rng, self._noise, self._dt
        k = self._k
        self._k += 1

        r_l = sixdrr_to_rotmat(state.lower_rot)
        wrist = arm_points(state, self._body, frame="world").wrist
        self._rots.append(r_l)
        self._wrists.append(wrist)
        if self._base_height is None:
            self._base_height = float(wrist[1])

        acc = np.zeros(3)
        if len(self._wrists) == 3:
            world_acc = (self._wrists[2] - 2 * self._wrists[1] + self._wrists[0]) / (dt * dt)
            acc = r_l.T @ world_acc
        acc = acc + rng.normal(scale=noise.lin_acc, size=3)

        gyro = np.zeros(3)
        if len(self._rots) == 2:
            gyro = _ScipyRotation.from_matrix(self._rots[0].T @ self._rots[1]).as_rotvec() / dt
        gyro = gyro + rng.normal(scale=noise.gyro, size=3)

        noisy_world = r_l @ _rotvec_noise(rng, noise.watch_rot)
        theta = self._mount * rotmat_to_quat(noisy_world)
        yaw = math.atan2(state.heading.s, state.heading.c)
        return RawSample(
            t=k * dt,
            dt=dt,
            theta=theta,
            velocity=acc * dt,
            lin_acc=acc,
            gravity=r_l.T @ np.array([0.0, -GRAVITY, 0.0])
            + rng.normal(scale=noise.gravity, size=3),
            gyro=gyro,
            pressure=SEA_LEVEL_PRESSURE
            - PRESSURE_PER_METER * (float(wrist[1]) - self._base_height)
            + rng.normal(scale=noise.pressure),
            yaw=yaw + self._yaw_offset + float(rng.normal(scale=noise.heading)),
        )
