"""Live teleoperation service.

A session turns a steering stream into a closed loop: the pointer drives a
synthetic ground-truth arm pose (two-link inverse kinematics in the sagittal
plane, integrated heading), the streaming sensor simulator produces raw
device readings from it, and the filter plus the control mapping turn those
back into a state estimate and an end-effector target that are streamed to
the client.

Wire protocol (one JSON object per WebSocket text frame):
  client -> server: {"type": "steer", "t": s, "px": f, "py": f, "dyaw": rad}
                    {"type": "recalibrate"}
  server -> client: {"type": "state", "t": s, "x": [27], "spread": [3],
                     "ee": [3], "clamped": [3 bools], "hz": f, "warm": b}
                    {"type": "error", "msg": str}

px/py are normalized pointer coordinates in [-1, 1]; (0, 0) holds the rest
pose.  dyaw is the heading increment for this tick in radians.  Frames are
exchanged through bounded queues (8 newest win) so a slow consumer drops
frames instead of growing memory.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
import secrets
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse

from .control import Workspace, ee_target
from .datamodel import CalibrationSnapshot, Observation, PoseState, calibrate
from .denkf.checkpoint import load_checkpoint
from .denkf.filtering import (
    Ensemble,
    SolveFailure,
    filter_step,
    init_ensemble,
    sensor_sample,
    spread_groups,
)
from .denkf.models import FilterModels
from .rotations import (
    BodyModel,
    Heading,
    SixDRR,
    rotmat_to_6drr,
    sixdrr_to_rotmat,
    yaw_matrix,
)
from .synthgen import NoiseConfig, StreamingSensorSim

QUEUE_LIMIT = 8


class SteerRejected(ValueError):
    """Malformed steering message; the session state is untouched."""


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def steer_to_local_rotations(
    px: float, py: float, body: BodyModel, travel: float = 0.25
) -> tuple[SixDRR, SixDRR]:
    """Map a pointer position to body-local arm rotations.

    The pointer offsets the rest wrist in the sagittal plane (px forward,
    py up, `travel` meters at full deflection); a two-link inverse
    kinematics solve about the lateral axis produces the joint rotations.
    The wrist-to-shoulder distance is clamped into the reachable annulus,
    so every pointer position yields a valid pose.
    """
    a, b = body.upper_len, body.lower_len
    rest = np.array([-a, b])  # wrist relative to shoulder, (y, z)
    target = rest + np.array([py * travel, px * travel])
    d = float(np.linalg.norm(target))
    lo, hi = abs(a - b) + 1e-3, a + b - 1e-3
    if d < 1e-9:
        target, d = rest / np.linalg.norm(rest) * lo, lo
    else:
        clamped_d = min(max(d, lo), hi)
        target, d = target * (clamped_d / d), clamped_d

    phi_t = math.atan2(target[1], target[0])
    gamma = math.acos(min(max((a * a + d * d - b * b) / (2.0 * a * d), -1.0), 1.0))
    phi_u = phi_t + gamma
    u = np.array([math.cos(phi_u), math.sin(phi_u)])
    v = (target - a * u) / b
    alpha_u = math.atan2(-u[1], -u[0])
    alpha_l = math.atan2(-v[0], v[1])
    return rotmat_to_6drr(_rot_x(alpha_u)), rotmat_to_6drr(_rot_x(alpha_l))


@dataclass
class TeleopSession:
    """One steering loop: synthetic truth -> raw sensors -> filter -> target.

    Sequential by construction; the server owns exactly one task that calls
    `handle` at a time.
    """

    models: FilterModels
    rate: float
    n_members: int
    rng: np.random.Generator
    sim: StreamingSensorSim
    body: BodyModel
    workspace: Workspace
    jitter_std: float = 0.05
    pointer_travel: float = 0.25

    yaw: float = 0.0
    tick_count: int = 0
    snap: CalibrationSnapshot | None = None
    recalibrate_pending: bool = False
    ensemble: Ensemble | None = None
    window: deque = field(default_factory=deque)
    prev_upper: np.ndarray | None = None
    prev_lower: np.ndarray | None = None

    def __post_init__(self):
        self.window = deque(maxlen=self.models.window)

    def handle(self, message: str) -> dict | None:
        """Process one wire message; returns the reply frame or None."""
        try:
            doc = json.loads(message)
        except json.JSONDecodeError as exc:
            return {"type": "error", "msg": f"bad json: {exc}"}
        if not isinstance(doc, dict):
            return {"type": "error", "msg": "message must be an object"}
        kind = doc.get("type")
        if kind == "recalibrate":
            self.recalibrate_pending = True
            return None
        if kind != "steer":
            return {"type": "error", "msg": f"unknown message type: {kind!r}"}
        try:
            return self.tick(doc)
        except SteerRejected as exc:
            return {"type": "error", "msg": str(exc)}
        except SolveFailure as exc:
            return {"type": "error", "msg": f"filter diverged: {exc}"}

    def tick(self, steer: dict) -> dict:
        fields = {}
        for name in ("px", "py", "dyaw"):
            value = steer.get(name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise SteerRejected(f"steer field {name} must be a finite number")
            fields[name] = float(value)
        px, py = fields["px"], fields["py"]
        if not (-1.0 <= px <= 1.0 and -1.0 <= py <= 1.0):
            raise SteerRejected("pointer out of range [-1, 1]")

        # All validation passed; from here on the session may advance.
        dt = 1.0 / self.rate
        self.yaw += fields["dyaw"]
        gt = self._ground_truth(px, py, fields["dyaw"], dt)
        raw = self.sim.push(gt)
        if self.snap is None or self.recalibrate_pending:
            self.snap = CalibrationSnapshot(theta0=raw.theta, yaw0=raw.yaw, rho0=raw.pressure)
            if self.recalibrate_pending:
                self.window.clear()
                self.ensemble = None
                self.recalibrate_pending = False
        watch_rot, heading, rho = calibrate(raw.theta, raw.yaw, raw.pressure, self.snap)
        obs = Observation(
            dt=raw.dt,
            watch_rot=watch_rot,
            velocity=raw.velocity,
            lin_acc=raw.lin_acc,
            gravity=raw.gravity,
            gyro=raw.gyro,
            pressure=rho,
            heading=heading,
        ).flatten()

        self.window.append(obs)
        n = self.models.window
        if len(self.window) < n:
            padded = [self.window[0]] * (n - len(self.window)) + list(self.window)
            _, mean = sensor_sample(np.stack(padded), self.models, self.n_members, self.rng)
            warm = False
            spread = np.zeros(3)
        else:
            raw_win = np.stack(self.window)
            if self.ensemble is None:
                _, mean = sensor_sample(raw_win, self.models, self.n_members, self.rng)
                self.ensemble = init_ensemble(
                    mean, self.n_members, n, self.jitter_std, self.rng
                )
            self.ensemble, mean, diag = filter_step(
                self.ensemble, raw_win, self.models, self.rng
            )
            warm = True
            spread = spread_groups(diag.spread)

        target = ee_target(PoseState.from_flat(mean), self.body, self.workspace)
        t = self.tick_count * dt
        self.tick_count += 1
        return {
            "type": "state",
            "t": t,
            "x": mean.tolist(),
            "spread": spread.tolist(),
            "ee": target.position.tolist(),
            "clamped": [bool(c) for c in target.clamped],
            "hz": self.rate,
            "warm": warm,
        }

    def _ground_truth(self, px: float, py: float, dyaw: float, dt: float) -> PoseState:
        upper, lower = steer_to_local_rotations(px, py, self.body, self.pointer_travel)
        spin = yaw_matrix(self.yaw)
        upper = rotmat_to_6drr(spin @ sixdrr_to_rotmat(upper))
        lower = rotmat_to_6drr(spin @ sixdrr_to_rotmat(lower))
        u_flat, l_flat = upper.flatten(), lower.flatten()
        upper_vel = np.zeros(6) if self.prev_upper is None else (u_flat - self.prev_upper) / dt
        lower_vel = np.zeros(6) if self.prev_lower is None else (l_flat - self.prev_lower) / dt
        self.prev_upper, self.prev_lower = u_flat, l_flat
        return PoseState(
            upper_rot=upper,
            lower_rot=lower,
            heading=Heading(math.sin(self.yaw), math.cos(self.yaw)),
            upper_vel=upper_vel,
            lower_vel=lower_vel,
            heading_vel=dyaw / dt,
        )


def _put_newest(queue: asyncio.Queue, item) -> None:
    # Bounded, newest-wins: drop the oldest entry rather than grow or block.
    while True:
        try:
            queue.put_nowait(item)
            return
        except asyncio.QueueFull:
            try:
                queue.get_nowait()
            except asyncio.QueueEmpty:
                pass


def create_app(
    checkpoint_path: str | None = None,
    models: FilterModels | None = None,
    rate: float = 50.0,
    n_members: int = 32,
    seed: int = 0,
    noise: NoiseConfig | None = None,
    workspace: Workspace | None = None,
    jitter_std: float = 0.05,
    pointer_travel: float = 0.25,
):
    """Build the ASGI app; models come from a checkpoint or are passed directly."""
    if models is None:
        if checkpoint_path is None:
            raise ValueError("need a checkpoint path or models")
        models, _ = load_checkpoint(checkpoint_path)
    if rate <= 0 or n_members < 2:
        raise ValueError("rate must be positive and n_members >= 2")
    noise = noise if noise is not None else NoiseConfig()
    workspace = workspace if workspace is not None else Workspace()
    body = BodyModel.default()

    app = FastAPI(title="teleopd")
    # The browser UI is typically served from another origin (a static
    # file server), so /session/new must answer cross-origin requests.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, TeleopSession] = {}
    claimed: set[str] = set()
    counter = itertools.count()

    def build_session(session_seed: int) -> TeleopSession:
        return TeleopSession(
            models=models,
            rate=rate,
            n_members=n_members,
            rng=np.random.default_rng((seed, session_seed, 1)),
            sim=StreamingSensorSim(rate, noise, body=body, seed=(seed, session_seed, 2)),
            body=body,
            workspace=workspace,
            jitter_std=jitter_std,
            pointer_travel=pointer_travel,
        )

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.get("/session/new")
    def session_new(seed: int | None = None):
        session_seed = seed if seed is not None else next(counter)
        session_id = secrets.token_hex(8)
        sessions[session_id] = build_session(session_seed)
        return {"id": session_id, "ws_url": f"/ws/{session_id}"}

    @app.websocket("/ws/{session_id}")
    async def ws_session(websocket: WebSocket, session_id: str):
        await websocket.accept()
        session = sessions.get(session_id)
        if session is None or session_id in claimed:
            msg = "unknown session" if session is None else "session already connected"
            await websocket.send_text(json.dumps({"type": "error", "msg": msg}))
            await websocket.close(code=4404)
            return
        claimed.add(session_id)

        inbox: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)
        outbox: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)

        async def reader():
            while True:
                _put_newest(inbox, await websocket.receive_text())

        async def worker():
            while True:
                frame = session.handle(await inbox.get())
                if frame is not None:
                    _put_newest(outbox, frame)

        async def sender():
            while True:
                await websocket.send_text(json.dumps(await outbox.get()))

        tasks = [asyncio.create_task(t()) for t in (reader, worker, sender)]
        try:
            done, _ = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
            claimed.discard(session_id)
            sessions.pop(session_id, None)

    return app
