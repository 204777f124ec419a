/**
 * Just enough arm kinematics to draw the skeleton.
 *
 * Mirrors the server's conventions: rotations arrive as the first two
 * rotation-matrix columns (six numbers, Gram-Schmidt re-orthonormalized
 * on decode), the heading is a (sin, cos) yaw about +Y, and the state
 * vector packs [upper 0:6, lower 6:12, heading 12:14, velocities ...].
 */

export type Vec3 = [number, number, number];
export type Mat3 = [Vec3, Vec3, Vec3]; // rows

export interface Body {
  upperLen: number;
  lowerLen: number;
  shoulder: Vec3;
  restDirUpper: Vec3;
  restDirLower: Vec3;
}

/** Server-side defaults; only used for drawing proportions. */
export const DEFAULT_BODY: Body = {
  upperLen: 0.3,
  lowerLen: 0.28,
  shoulder: [0, 0.45, 0],
  restDirUpper: [0, -1, 0],
  restDirLower: [0, 0, 1],
};

export interface ArmPose {
  shoulder: Vec3;
  elbow: Vec3;
  wrist: Vec3;
  /** yaw in radians, from the (sin, cos) heading entries */
  yaw: number;
}

function norm(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function matVec(m: Mat3, v: Vec3): Vec3 {
  return [dot(m[0], v), dot(m[1], v), dot(m[2], v)];
}

/** Decode six numbers (two matrix columns) into a rotation matrix. */
export function rotationFromSix(six: number[]): Mat3 {
  const a1: Vec3 = [six[0], six[1], six[2]];
  const a2: Vec3 = [six[3], six[4], six[5]];
  const b1 = scale(a1, 1 / norm(a1));
  const proj = dot(b1, a2);
  const r2: Vec3 = [a2[0] - proj * b1[0], a2[1] - proj * b1[1], a2[2] - proj * b1[2]];
  const b2 = scale(r2, 1 / norm(r2));
  const b3 = cross(b1, b2);
  // columns b1 b2 b3, stored as rows for matVec
  return [
    [b1[0], b2[0], b3[0]],
    [b1[1], b2[1], b3[1]],
    [b1[2], b2[2], b3[2]],
  ];
}

export function yawMatrix(yaw: number): Mat3 {
  const s = Math.sin(yaw);
  const c = Math.cos(yaw);
  return [
    [c, 0, s],
    [0, 1, 0],
    [-s, 0, c],
  ];
}

/** Body-local elbow and wrist from the first 12 state entries. */
export function armLocal(x: number[], body: Body = DEFAULT_BODY): { elbow: Vec3; wrist: Vec3 } {
  const ru = rotationFromSix(x.slice(0, 6));
  const rl = rotationFromSix(x.slice(6, 12));
  const elbow = add(body.shoulder, scale(matVec(ru, body.restDirUpper), body.upperLen));
  const wrist = add(elbow, scale(matVec(rl, body.restDirLower), body.lowerLen));
  return { elbow, wrist };
}

/** World-frame skeleton points plus the decoded yaw. */
export function armWorld(x: number[], body: Body = DEFAULT_BODY): ArmPose {
  const { elbow, wrist } = armLocal(x, body);
  const yaw = Math.atan2(x[12], x[13]);
  const ry = yawMatrix(yaw);
  return {
    shoulder: matVec(ry, body.shoulder),
    elbow: matVec(ry, elbow),
    wrist: matVec(ry, wrist),
    yaw,
  };
}
