"""
Rotations, headings, and the arm chain
======================================

A tour of the rotation toolbox: the continuous six-number rotation
encoding, compass headings as (sin, cos) pairs, and the two-link
forward kinematics that turns joint rotations into elbow and wrist
positions.
"""

import numpy as np

from iroco.rotations import (
    BodyModel,
    SixDRR,
    angular_distance,
    fk_local,
    forward_kinematics,
    heading_decode,
    heading_encode,
    quat_to_6drr,
    random_quaternion,
    rotmat_to_6drr,
    sixdrr_to_rotmat,
)

rng = np.random.default_rng(7)

# A rotation can round-trip quaternion -> six numbers -> matrix -> six
# numbers without losing anything.  The six-number form is what the
# filter state carries, because it has no discontinuities to confuse
# a neural network.
q = random_quaternion(rng)
r6 = quat_to_6drr(q)
m = sixdrr_to_rotmat(r6)
back = rotmat_to_6drr(m)
print("round-trip drift:", np.abs(r6.flatten() - back.flatten()).max())

# The matrix really is a rotation: orthonormal, determinant one.
print("orthogonality:", np.abs(m.T @ m - np.eye(3)).max())
print("determinant:  ", np.linalg.det(m))

# Even a noisy, non-orthogonal six-vector decodes to a proper rotation;
# the decoder re-orthonormalizes.
noisy = rotmat_to_6drr(m + 0.05 * rng.standard_normal((3, 3)))
m2 = sixdrr_to_rotmat(noisy)
print("decoded from noisy input, orthogonality:", np.abs(m2.T @ m2 - np.eye(3)).max())

# Headings live on the unit circle as (sin, cos).  Encoding and decoding
# are inverse, and the representation has no wrap-around seam at +/- pi.
for yaw in (0.0, 1.0, np.pi - 0.01, -np.pi + 0.01):
    h = heading_encode(yaw)
    print(f"yaw {yaw:+.3f} -> (sin, cos) = ({h.s:+.3f}, {h.c:+.3f}) -> {heading_decode(h):+.3f}")

# Forward kinematics: identity joint rotations give the calibration rest
# pose, arm hanging and forearm pointing forward.
body = BodyModel.default()
rest = fk_local(SixDRR.identity(), SixDRR.identity(), body)
print("rest elbow:", rest.elbow.round(3), " rest wrist:", rest.wrist.round(3))

# Turning the whole body (the heading) moves the wrist in the world frame
# but never changes limb lengths.
upper, lower = quat_to_6drr(random_quaternion(rng)), quat_to_6drr(random_quaternion(rng))
for yaw in (0.0, 0.8, 2.0):
    pts = forward_kinematics(upper, lower, heading_encode(yaw), body)
    forearm = np.linalg.norm(pts.wrist - pts.elbow)
    print(f"yaw {yaw:.1f}: wrist {pts.wrist.round(3)}  forearm length {forearm:.3f}")

# angular_distance measures how far apart two rotations are, in radians.
print("self distance:", angular_distance(upper, upper))
print("upper vs lower:", f"{angular_distance(upper, lower):.3f} rad")
