"""
Tracing a letter with the control mapping
=========================================

The teleoperation chain maps a 2-d pointer to arm joint rotations
(inverse kinematics), then maps the resulting wrist position to a
robot end-effector target inside a clamped workspace box.  Here a
scripted pointer traces the letter M; the end-effector trace is scored
against the intended path with the same sagittal-plane metric the
letter-writing experiments use.
"""

import numpy as np

from iroco.control import Workspace, ee_target, trace_eval
from iroco.datamodel import PoseState
from iroco.rotations import BodyModel, Heading
from iroco.teleopd import steer_to_local_rotations

body = BodyModel.default()
ws = Workspace()
TRAVEL = 0.25  # meters of wrist motion at full pointer deflection


def pointer_path(corners, per_stroke=40):
    """Piecewise-linear pointer positions through the given corners."""
    pts = []
    for (x0, y0), (x1, y1) in zip(corners, corners[1:]):
        for s in np.linspace(0.0, 1.0, per_stroke, endpoint=False):
            pts.append((x0 + s * (x1 - x0), y0 + s * (y1 - y0)))
    pts.append(corners[-1])
    return pts


# The letter M, pointer coordinates in [-1, 1]: px is forward, py is up.
corners = [(-0.5, -0.5), (-0.5, 0.5), (0.0, 0.0), (0.5, 0.5), (0.5, -0.5)]
path = pointer_path(corners)

# Where the pointer *should* land: the rest wrist offset by the pointer,
# expressed as a workspace position.
rest_wrist = body.shoulder_offset + np.array([0.0, -body.upper_len, body.lower_len])
reference = [
    ws.origin + np.array([0.0, rest_wrist[1] + py * TRAVEL, rest_wrist[2] + px * TRAVEL])
    for px, py in path
]

# Where it lands after the full chain: pointer -> joint rotations ->
# forward kinematics -> projection -> clamp.
targets = []
for px, py in path:
    upper, lower = steer_to_local_rotations(px, py, body, travel=TRAVEL)
    state = PoseState(upper, lower, Heading.identity(), np.zeros(6), np.zeros(6), 0.0)
    targets.append(ee_target(state, body, ws))

clamped = sum(bool(t.clamped.any()) for t in targets)
print(f"{len(targets)} trace points, {clamped} clamped against the workspace box")

score = trace_eval(targets, reference)
print(f"ideal actor:  rmse {score['rmse'] * 100:.3f} cm, "
      f"completion {score['completion']:.0%}")

# A human is sloppier: jitter the pointer and score again.  Points are
# "complete" when they land within 2 cm of the template.
rng = np.random.default_rng(3)
sloppy = []
for px, py in path:
    upper, lower = steer_to_local_rotations(
        px + rng.normal(0.0, 0.05), py + rng.normal(0.0, 0.05), body, travel=TRAVEL
    )
    state = PoseState(upper, lower, Heading.identity(), np.zeros(6), np.zeros(6), 0.0)
    sloppy.append(ee_target(state, body, ws))
score = trace_eval(sloppy, reference)
print(f"sloppy actor: rmse {score['rmse'] * 100:.3f} cm, "
      f"completion {score['completion']:.0%}")

# Crude terminal rendering of the traced letter, forward axis across,
# height up the page.
ys = np.array([t.position[2] for t in targets])
zs = np.array([t.position[1] for t in targets])
cols = np.clip(((ys - ys.min()) / (np.ptp(ys) + 1e-9) * 40).astype(int), 0, 40)
rows = np.clip(((zs - zs.min()) / (np.ptp(zs) + 1e-9) * 14).astype(int), 0, 14)
grid = [[" "] * 41 for _ in range(15)]
for r, c in zip(rows, cols):
    grid[14 - r][c] = "*"
print()
print("\n".join("".join(row) for row in grid))
