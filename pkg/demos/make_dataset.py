"""
Generating labeled sensor sessions
==================================

The synthetic generator produces what a wrist-worn device would record
during smooth random arm motion: orientation, accelerations, gyro rates,
barometric pressure, and a compass heading, each frame paired with the
ground-truth arm pose.  Sessions round-trip through a JSON-Lines file,
and a yaw augmentation turns each recording into many.
"""

import os
import tempfile

import numpy as np

from iroco.datamodel import augment_yaw, dataset_read, dataset_write
from iroco.rotations import BodyModel, forward_kinematics
from iroco.synthgen import MotionConfig, NoiseConfig, gen_session

# Ten seconds at 50 Hz.  MotionConfig shapes the trajectory, NoiseConfig
# the sensor imperfections; NoiseConfig() uses realistic defaults and
# NoiseConfig.silent() turns every error source off.
motion = MotionConfig(duration=10.0, rate=50.0)
frames = gen_session(motion, NoiseConfig(), np.random.default_rng(0))
print(f"{len(frames)} frames, obs dim {frames[0].obs.flatten().shape[0]}, "
      f"state dim {frames[0].gt.flatten().shape[0]}")

# Every session starts in the calibration rest pose, so a live filter can
# assume the same starting point the training data had.
first = frames[0].gt
print("first-frame rotations are identity:",
      np.allclose(first.upper_rot.flatten(), [1, 0, 0, 0, 1, 0]),
      np.allclose(first.lower_rot.flatten(), [1, 0, 0, 0, 1, 0]))

# How far does the wrist actually move?
body = BodyModel.default()
wrists = np.stack([
    forward_kinematics(f.gt.upper_rot, f.gt.lower_rot, f.gt.heading, body).wrist
    for f in frames
])
span = wrists.max(axis=0) - wrists.min(axis=0)
print("wrist travel per axis (m):", span.round(3))

# Round-trip through the on-disk format: nothing changes.
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "session.jsonl")
    dataset_write(frames, path)
    again = dataset_read(path)
    drift = max(
        np.abs(a.obs.flatten() - b.obs.flatten()).max() for a, b in zip(frames, again)
    )
    print(f"{os.path.getsize(path) / 1024:.0f} KiB on disk, round-trip drift {drift}")

# Yaw augmentation rotates the world around the user.  Device-frame
# readings (accelerometer, gyro) are untouched; world-frame quantities
# (watch orientation, heading) co-rotate with the ground truth.
rotated = augment_yaw(frames[100], np.pi / 2)
print("gyro unchanged:", np.array_equal(rotated.obs.gyro, frames[100].obs.gyro))
print("heading before/after:",
      np.round(frames[100].obs.heading.flatten(), 3),
      np.round(rotated.obs.heading.flatten(), 3))
