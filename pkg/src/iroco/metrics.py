"""Error metrics and session reports for filtered pose estimates.

Positional errors come from forward kinematics: decode both poses, run the
arm chain in the world frame, and measure wrist/elbow separation in
centimeters.  Heading error is the wrapped yaw difference in degrees.
Ensemble estimates are averaged in the raw six-number rotation encoding and
decoded once (Gram-Schmidt afterwards), so the reported pose is exactly the
one a consumer of the ensemble mean would see.

Reports aggregate per-frame errors into means, percentiles, fixed-width
histograms (1 cm / 1 deg bins), and the correlation between wrist speed and
ensemble spread.  Speeds are measured on ground truth, not predictions, so
the spread correlation is not circular.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .datamodel import PoseState, arm_points
from .rotations import BodyModel, heading_decode


class TooFew(ValueError):
    """Not enough frames to aggregate."""


@dataclass(frozen=True)
class FrameError:
    """Per-frame estimate quality; distances in cm, angles in degrees."""

    wrist_cm: float
    elbow_cm: float
    hip_deg: float
    spread: np.ndarray  # ensemble std per state group (upper, lower, heading)
    spread_wrist: float  # RMS member wrist distance from the mean wrist, cm

    def __post_init__(self):
        if min(self.wrist_cm, self.elbow_cm, self.hip_deg, self.spread_wrist) < 0:
            raise ValueError("errors must be non-negative")


def _as_state_and_members(pred) -> tuple[PoseState, np.ndarray | None]:
    if isinstance(pred, PoseState):
        return pred, None
    arr = np.asarray(pred, dtype=np.float64)
    if arr.ndim == 1:
        return PoseState.from_flat(arr), None
    if arr.ndim == 2:
        return PoseState.from_flat(arr.mean(axis=0)), arr
    raise ValueError("pred must be a PoseState, a flat state, or an ensemble matrix")


def ensemble_wrist_spread(members: np.ndarray, body: BodyModel) -> float:
    """RMS distance (cm) of member wrists from the mean-state wrist.

    The mean state is the encoding-space average of the members, decoded once.
    """
    members = np.asarray(members, dtype=np.float64)
    if members.ndim != 2 or members.shape[0] < 2:
        raise ValueError("need a member matrix with at least 2 rows")
    mean_wrist = arm_points(
        PoseState.from_flat(members.mean(axis=0)), body, frame="world"
    ).wrist
    wrists = np.stack(
        [arm_points(PoseState.from_flat(m), body, frame="world").wrist for m in members]
    )
    dist_sq = ((wrists - mean_wrist) ** 2).sum(axis=1)
    return 100.0 * float(np.sqrt(dist_sq.mean()))


def pose_errors(pred, gt: PoseState, body: BodyModel) -> FrameError:
    """FK-based errors of one estimate (single state or member matrix) vs truth.

    Ensembles are averaged in encoding space before decoding; their member
    scatter feeds the spread fields, which are zero for single states.
    """
    mean_state, members = _as_state_and_members(pred)
    pred_pts = arm_points(mean_state, body, frame="world")
    gt_pts = arm_points(gt, body, frame="world")
    wrist_cm = 100.0 * float(np.linalg.norm(pred_pts.wrist - gt_pts.wrist))
    elbow_cm = 100.0 * float(np.linalg.norm(pred_pts.elbow - gt_pts.elbow))
    dyaw = math.remainder(
        heading_decode(mean_state.heading) - heading_decode(gt.heading), 2.0 * math.pi
    )
    hip_deg = abs(math.degrees(dyaw))

    spread = np.zeros(3)
    spread_wrist = 0.0
    if members is not None and members.shape[0] >= 2:
        std = members.std(axis=0, ddof=1)
        spread = np.array(
            [float(std[0:6].mean()), float(std[6:12].mean()), float(std[12:14].mean())]
        )
        spread_wrist = ensemble_wrist_spread(members, body)
    return FrameError(
        wrist_cm=wrist_cm,
        elbow_cm=elbow_cm,
        hip_deg=hip_deg,
        spread=spread,
        spread_wrist=spread_wrist,
    )


def gt_wrist_speeds(times, states, body: BodyModel) -> np.ndarray:
    """Wrist speed (m/s) from ground-truth positions, backward differences."""
    times = np.asarray(times, dtype=np.float64)
    wrists = np.stack([arm_points(s, body, frame="world").wrist for s in states])
    if len(times) != len(wrists):
        raise ValueError("times and states must have equal length")
    if len(times) < 2:
        return np.zeros(len(times))
    dt = np.diff(times)
    if (dt <= 0).any():
        raise ValueError("times must be strictly increasing")
    speeds = np.zeros(len(times))
    speeds[1:] = np.linalg.norm(np.diff(wrists, axis=0), axis=1) / dt
    speeds[0] = speeds[1]
    return speeds


def _stats(values: np.ndarray) -> dict:
    return {
        "mean": float(values.mean()),
        "p50": float(np.percentile(values, 50)),
        "p90": float(np.percentile(values, 90)),
        "p95": float(np.percentile(values, 95)),
        "p99": float(np.percentile(values, 99)),
    }


def _histogram(values: np.ndarray) -> dict:
    # Fixed unit-width bins from zero so runs stay comparable.
    counts = np.bincount(np.floor(values).astype(int))
    return {"bin_width": 1.0, "start": 0.0, "counts": counts.tolist()}


def session_report(errors, speeds=None) -> dict:
    """Aggregate per-frame errors into a summary dictionary.

    The result is order-free: the correlation is computed on (speed, spread)
    pairs, so shuffling frames together with their speeds changes nothing.
    speeds, when given, must align 1:1 with errors; degenerate inputs
    (constant series) report a correlation of 0.
    """
    errors = list(errors)
    if len(errors) < 2:
        raise TooFew(f"need at least 2 frames, got {len(errors)}")
    # Sort every series so the summary is bitwise identical under frame
    # reordering (summation order would otherwise leak into the last ulp).
    wrist = np.sort([e.wrist_cm for e in errors])
    elbow = np.sort([e.elbow_cm for e in errors])
    hip = np.sort([e.hip_deg for e in errors])
    spread_wrist = np.array([e.spread_wrist for e in errors])

    corr = None
    if speeds is not None:
        speeds = np.asarray(speeds, dtype=np.float64)
        if speeds.shape != (len(errors),):
            raise ValueError("speeds must align one-to-one with errors")
        if speeds.std() == 0 or spread_wrist.std() == 0:
            corr = 0.0
        else:
            order = np.lexsort((spread_wrist, speeds))
            corr = float(np.corrcoef(speeds[order], spread_wrist[order])[0, 1])
    spread_wrist = np.sort(spread_wrist)

    return {
        "n_frames": len(errors),
        "wrist_cm": _stats(wrist),
        "elbow_cm": _stats(elbow),
        "hip_deg": _stats(hip),
        "spread_wrist_cm": _stats(spread_wrist),
        "histograms": {
            "wrist_cm": _histogram(wrist),
            "elbow_cm": _histogram(elbow),
            "hip_deg": _histogram(hip),
        },
        "speed_spread_corr": corr,
    }


def write_frame_csv(path, times, errors, speeds) -> None:
    """Per-frame error table: t, wrist_cm, elbow_cm, hip_deg, spread_wrist, speed."""
    times, errors = list(times), list(errors)
    speeds = list(speeds)
    if not len(times) == len(errors) == len(speeds):
        raise ValueError("times, errors, and speeds must have equal length")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "wrist_cm", "elbow_cm", "hip_deg", "spread_wrist", "speed"])
        for t, err, speed in zip(times, errors, speeds):
            writer.writerow(
                [
                    f"{t:.6f}",
                    f"{err.wrist_cm:.6f}",
                    f"{err.elbow_cm:.6f}",
                    f"{err.hip_deg:.6f}",
                    f"{err.spread_wrist:.6f}",
                    f"{speed:.6f}",
                ]
            )


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
