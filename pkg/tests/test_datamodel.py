import json
import math

import numpy as np
import pytest

from iroco.datamodel import (
    OBS_COLUMNS,
    OBS_DIM,
    STATE_COLUMNS,
    STATE_DIM,
    CalibrationSnapshot,
    FormatError,
    LabeledFrame,
    Observation,
    PoseState,
    arm_points,
    augment_yaw,
    calibrate,
    dataset_read,
    dataset_write,
    frames_to_arrays,
    integrate_velocity,
)
from iroco.rotations import (
    BodyModel,
    Heading,
    Quaternion,
    SixDRR,
    heading_decode,
    heading_encode,
    quat_to_6drr,
    random_quaternion,
    yaw_matrix,
)


def _random_obs(rng) -> Observation:
    return Observation(
        dt=0.02,
        watch_rot=quat_to_6drr(random_quaternion(rng)),
        velocity=rng.normal(size=3),
        lin_acc=rng.normal(size=3),
        gravity=rng.normal(size=3),
        gyro=rng.normal(size=3),
        pressure=float(rng.normal()),
        heading=heading_encode(rng.uniform(-math.pi, math.pi)),
    )


def _random_state(rng) -> PoseState:
    return PoseState(
        upper_rot=quat_to_6drr(random_quaternion(rng)),
        lower_rot=quat_to_6drr(random_quaternion(rng)),
        heading=heading_encode(rng.uniform(-math.pi, math.pi)),
        upper_vel=rng.normal(size=6),
        lower_vel=rng.normal(size=6),
        heading_vel=float(rng.normal()),
    )


def test_dimension_constants():
    assert OBS_DIM == 22
    assert STATE_DIM == 27
    assert len(OBS_COLUMNS) == 22
    assert len(STATE_COLUMNS) == 27


def test_observation_flatten_layout():
    rng = np.random.default_rng(1)
    obs = _random_obs(rng)
    flat = obs.flatten()
    assert flat.shape == (22,)
    assert flat[0] == obs.dt
    np.testing.assert_array_equal(flat[1:7], obs.watch_rot.flatten())
    np.testing.assert_array_equal(flat[7:10], obs.velocity)
    np.testing.assert_array_equal(flat[10:13], obs.lin_acc)
    np.testing.assert_array_equal(flat[13:16], obs.gravity)
    np.testing.assert_array_equal(flat[16:19], obs.gyro)
    assert flat[19] == obs.pressure
    np.testing.assert_array_equal(flat[20:22], obs.heading.flatten())


def test_state_flatten_layout():
    rng = np.random.default_rng(2)
    st = _random_state(rng)
    flat = st.flatten()
    assert flat.shape == (27,)
    np.testing.assert_array_equal(flat[0:6], st.upper_rot.flatten())
    np.testing.assert_array_equal(flat[6:12], st.lower_rot.flatten())
    np.testing.assert_array_equal(flat[12:14], st.heading.flatten())
    np.testing.assert_array_equal(flat[14:20], st.upper_vel)
    np.testing.assert_array_equal(flat[20:26], st.lower_vel)
    assert flat[26] == st.heading_vel


def test_flatten_round_trips():
    rng = np.random.default_rng(3)
    for _ in range(100):
        obs = _random_obs(rng)
        np.testing.assert_array_equal(Observation.from_flat(obs.flatten()).flatten(), obs.flatten())
        st = _random_state(rng)
        np.testing.assert_array_equal(PoseState.from_flat(st.flatten()).flatten(), st.flatten())


def test_observation_rejects_bad_inputs():
    rng = np.random.default_rng(4)
    obs = _random_obs(rng)
    with pytest.raises(ValueError):
        Observation.from_flat(np.zeros(21))
    with pytest.raises(ValueError):
        Observation(
            dt=0.0,
            watch_rot=obs.watch_rot,
            velocity=obs.velocity,
            lin_acc=obs.lin_acc,
            gravity=obs.gravity,
            gyro=obs.gyro,
            pressure=obs.pressure,
            heading=obs.heading,
        )
    with pytest.raises(ValueError):
        PoseState.from_flat(np.zeros(28))


def test_rest_state():
    st = PoseState.rest()
    np.testing.assert_array_equal(st.upper_rot.flatten(), [1, 0, 0, 0, 1, 0])
    np.testing.assert_array_equal(st.lower_rot.flatten(), [1, 0, 0, 0, 1, 0])
    assert st.heading.s == 0.0 and st.heading.c == 1.0
    assert not st.flatten()[14:].any()


def test_calibrate_start_pose_is_identity():
    rng = np.random.default_rng(5)
    theta0 = random_quaternion(rng)
    snap = CalibrationSnapshot(theta0=theta0, yaw0=0.7, rho0=1013.0)
    rot, heading, rho = calibrate(theta0, 0.7, 1013.0, snap)
    np.testing.assert_allclose(rot.flatten(), [1, 0, 0, 0, 1, 0], atol=1e-12)
    assert heading_decode(heading) == pytest.approx(0.0, abs=1e-12)
    assert rho == pytest.approx(0.0)


def test_calibrate_relative_rotation():
    # Mounted with an offset: a later reading differing from the snapshot by a
    # known turn calibrates to exactly that turn.
    rng = np.random.default_rng(6)
    for _ in range(50):
        theta0 = random_quaternion(rng)
        delta = random_quaternion(rng)
        raw = theta0 * delta
        snap = CalibrationSnapshot(theta0=theta0, yaw0=-0.2, rho0=990.0)
        rot, heading, rho = calibrate(raw, 0.1, 991.5, snap)
        np.testing.assert_allclose(rot.flatten(), quat_to_6drr(delta).flatten(), atol=1e-12)
        assert heading_decode(heading) == pytest.approx(0.3, abs=1e-12)
        assert rho == pytest.approx(1.5)


def test_integrate_velocity():
    np.testing.assert_allclose(
        integrate_velocity([1.0, -2.0, 0.5], 0.02), [0.02, -0.04, 0.01]
    )
    with pytest.raises(ValueError):
        integrate_velocity([0.0, 0.0, 0.0], 0.0)


def _random_frame(rng, t=0.0) -> LabeledFrame:
    return LabeledFrame(obs=_random_obs(rng), gt=_random_state(rng), t=t)


def test_augment_yaw_keeps_watch_frame_channels_bit_identical():
    rng = np.random.default_rng(7)
    for _ in range(50):
        frame = _random_frame(rng)
        angle = rng.uniform(-math.pi, math.pi)
        out = augment_yaw(frame, angle)
        assert out.obs.dt == frame.obs.dt
        np.testing.assert_array_equal(out.obs.velocity, frame.obs.velocity)
        np.testing.assert_array_equal(out.obs.lin_acc, frame.obs.lin_acc)
        np.testing.assert_array_equal(out.obs.gravity, frame.obs.gravity)
        np.testing.assert_array_equal(out.obs.gyro, frame.obs.gyro)
        assert out.obs.pressure == frame.obs.pressure
        assert out.t == frame.t


def test_augment_yaw_rotates_world_channels():
    rng = np.random.default_rng(8)
    frame = _random_frame(rng)
    angle = 0.9
    ry = yaw_matrix(angle)
    out = augment_yaw(frame, angle)
    np.testing.assert_allclose(out.obs.watch_rot.a1, ry @ frame.obs.watch_rot.a1, atol=1e-12)
    np.testing.assert_allclose(out.obs.watch_rot.a2, ry @ frame.obs.watch_rot.a2, atol=1e-12)
    np.testing.assert_allclose(out.gt.upper_rot.a1, ry @ frame.gt.upper_rot.a1, atol=1e-12)
    yaw_before = heading_decode(frame.obs.heading)
    yaw_after = heading_decode(out.obs.heading)
    assert math.remainder(yaw_after - yaw_before - angle, 2 * math.pi) == pytest.approx(
        0.0, abs=1e-12
    )
    # Velocities co-rotate so they remain finite differences of the rotated pose.
    np.testing.assert_allclose(out.gt.upper_vel[:3], ry @ frame.gt.upper_vel[:3], atol=1e-12)
    np.testing.assert_allclose(out.gt.lower_vel[3:], ry @ frame.gt.lower_vel[3:], atol=1e-12)
    assert out.gt.heading_vel == frame.gt.heading_vel


def test_augment_yaw_round_trip():
    rng = np.random.default_rng(9)
    for _ in range(50):
        frame = _random_frame(rng)
        angle = rng.uniform(-math.pi, math.pi)
        back = augment_yaw(augment_yaw(frame, angle), -angle)
        np.testing.assert_allclose(back.obs.flatten(), frame.obs.flatten(), atol=1e-9)
        np.testing.assert_allclose(back.gt.flatten(), frame.gt.flatten(), atol=1e-9)


def test_augment_yaw_preserves_body_local_arm():
    rng = np.random.default_rng(10)
    body = BodyModel.default()
    for _ in range(50):
        frame = _random_frame(rng)
        out = augment_yaw(frame, rng.uniform(-math.pi, math.pi))
        before = arm_points(frame.gt, body, frame="local")
        after = arm_points(out.gt, body, frame="local")
        np.testing.assert_allclose(after.wrist, before.wrist, atol=1e-9)
        np.testing.assert_allclose(after.elbow, before.elbow, atol=1e-9)


def test_augment_yaw_zero_angle_is_identity():
    rng = np.random.default_rng(11)
    frame = _random_frame(rng)
    assert augment_yaw(frame, 0.0) is frame


def test_arm_points_world_vs_local():
    # World-frame state rotations equal to the heading yaw leave the body-local
    # arm in its rest pose; world points are the yaw-rotated rest points.
    yaw = 1.1
    ry6 = quat_to_6drr(Quaternion.from_axis_angle((0.0, 1.0, 0.0), yaw))
    st = PoseState(
        upper_rot=ry6,
        lower_rot=ry6,
        heading=heading_encode(yaw),
        upper_vel=np.zeros(6),
        lower_vel=np.zeros(6),
        heading_vel=0.0,
    )
    body = BodyModel.default()
    local = arm_points(st, body, frame="local")
    np.testing.assert_allclose(local.elbow, [0.0, 0.15, 0.0], atol=1e-12)
    np.testing.assert_allclose(local.wrist, [0.0, 0.15, 0.28], atol=1e-12)
    world = arm_points(st, body, frame="world")
    np.testing.assert_allclose(world.wrist, yaw_matrix(yaw) @ local.wrist, atol=1e-12)
    with pytest.raises(ValueError):
        arm_points(st, body, frame="global")


def _session(rng, n=20):
    frames = []
    for i in range(n):
        frames.append(_random_frame(rng, t=0.02 * i))
    return frames


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    frames = _session(rng)
    path = tmp_path / "session.jsonl"
    dataset_write(frames, path)
    back = dataset_read(path)
    assert len(back) == len(frames)
    for a, b in zip(frames, back):
        assert a.t == b.t
        np.testing.assert_array_equal(a.obs.flatten(), b.obs.flatten())
        np.testing.assert_array_equal(a.gt.flatten(), b.gt.flatten())


def test_dataset_header_contents(tmp_path):
    path = tmp_path / "session.jsonl"
    dataset_write([], path)
    header = json.loads(path.read_text().splitlines()[0])
    assert header["version"] == 1
    assert len(header["columns"]) == 49
    assert header["columns"][0] == "obs.dt"
    assert header["columns"][22] == "gt.upper_rot.0"
    assert "units" in header


def test_dataset_errors_carry_line_numbers(tmp_path):
    rng = np.random.default_rng(13)
    path = tmp_path / "bad.jsonl"

    dataset_write(_session(rng, 3), path)
    lines = path.read_text().splitlines()

    # Corrupt JSON on a record line.
    path.write_text("\n".join([lines[0], lines[1], "{not json", lines[3]]) + "\n")
    with pytest.raises(FormatError) as exc:
        dataset_read(path)
    assert exc.value.line == 3

    # Wrong vector length.
    bad = json.loads(lines[2])
    bad["obs"] = bad["obs"][:-1]
    path.write_text("\n".join([lines[0], lines[1], json.dumps(bad)]) + "\n")
    with pytest.raises(FormatError) as exc:
        dataset_read(path)
    assert exc.value.line == 3

    # Time going backwards.
    path.write_text("\n".join([lines[0], lines[2], lines[1]]) + "\n")
    with pytest.raises(FormatError) as exc:
        dataset_read(path)
    assert exc.value.line == 3

    # Unsupported version.
    path.write_text(json.dumps({"version": 99, "columns": []}) + "\n")
    with pytest.raises(FormatError) as exc:
        dataset_read(path)
    assert exc.value.line == 1

    # Empty file.
    path.write_text("")
    with pytest.raises(FormatError):
        dataset_read(path)


def test_frames_to_arrays(tmp_path):
    rng = np.random.default_rng(14)
    frames = _session(rng, 5)
    t, obs, gt = frames_to_arrays(frames)
    assert t.shape == (5,) and obs.shape == (5, 22) and gt.shape == (5, 27)
    np.testing.assert_array_equal(obs[2], frames[2].obs.flatten())
    np.testing.assert_array_equal(gt[4], frames[4].gt.flatten())
