/**
 * Canvas 2D scene: body-local side view of the arm chain with the
 * end-effector trace and an uncertainty halo, plus a top-down heading
 * dial.  The painter draws whatever scene it is handed; it never touches
 * network or input state.
 */

import { armLocal, DEFAULT_BODY } from "./fk.js";
import { StateFrame } from "./protocol.js";
import { TracePoint } from "./trace.js";

/** Structural subset of CanvasRenderingContext2D, so tests can stub it. */
export interface Painter {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export interface Scene {
  frame: StateFrame | null;
  trace: readonly TracePoint[];
  pointer: { px: number; py: number };
  status: string;
  fps: number;
}

const BG = "#10141a";
const INK = "#dde3ea";
const DIM = "#5a6572";
const ARM = "#6fc3ff";
const TRACE = "#ffb454";
const HALO = "#3f6fae";
const WARN = "#ff6b6b";

interface View {
  x0: number;
  y0: number;
  scale: number;
}

/** Sagittal mapping: world z (forward) to the right, world y (up) up. */
function toScreen(v: { y: number; z: number }, view: View): [number, number] {
  return [view.x0 + v.z * view.scale, view.y0 - v.y * view.scale];
}

export function paintScene(ctx: Painter, scene: Scene, w: number, h: number): void {
  ctx.setLineDash([]);
  ctx.globalAlpha = 1;
  ctx.fillStyle = BG;
  ctx.clearRect(0, 0, w, h);
  ctx.fillRect(0, 0, w, h);

  const sideW = Math.floor(w * 0.64);
  paintSideView(ctx, scene, sideW, h);
  paintDial(ctx, scene, sideW, 0, w - sideW, h);
}

function paintSideView(ctx: Painter, scene: Scene, w: number, h: number): void {
  // fit roughly 1.5 m x 1.3 m around the shoulder
  const view: View = { x0: w * 0.38, y0: h * 0.82, scale: Math.min(w / 1.5, h / 1.3) };

  // ground and torso
  ctx.strokeStyle = DIM;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, view.y0);
  ctx.lineTo(w, view.y0);
  ctx.stroke();

  const frame = scene.frame;
  if (!frame) {
    ctx.fillStyle = DIM;
    ctx.font = "14px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("waiting for state frames", w / 2, h / 2);
    return;
  }

  const body = DEFAULT_BODY;
  const { elbow, wrist } = armLocal(frame.x, body);
  const shoulder = body.shoulder;
  const [sx, sy] = toScreen({ y: shoulder[1], z: shoulder[2] }, view);
  const [ex, ey] = toScreen({ y: elbow[1], z: elbow[2] }, view);
  const [wx, wy] = toScreen({ y: wrist[1], z: wrist[2] }, view);

  // ensemble spread halo behind the arm: rotation-group spreads, scaled
  // up so centimeter-level uncertainty is visible
  const spread = frame.spread[0] + frame.spread[1];
  const halo = Math.min(6 + spread * 2.5 * view.scale, w / 3);
  ctx.globalAlpha = 0.25;
  ctx.fillStyle = HALO;
  ctx.beginPath();
  ctx.arc(wx, wy, halo, 0, 2 * Math.PI);
  ctx.fill();
  ctx.globalAlpha = 1;

  // trace of end-effector targets, oldest faded
  if (scene.trace.length > 1) {
    ctx.strokeStyle = TRACE;
    ctx.lineWidth = 2;
    ctx.globalAlpha = 0.8;
    ctx.beginPath();
    const pts = scene.trace;
    const [tx0, ty0] = toScreen({ y: pts[0].ee[1], z: pts[0].ee[2] }, view);
    ctx.moveTo(tx0, ty0);
    for (let i = 1; i < pts.length; i++) {
      const [tx, ty] = toScreen({ y: pts[i].ee[1], z: pts[i].ee[2] }, view);
      ctx.lineTo(tx, ty);
    }
    ctx.stroke();
    ctx.globalAlpha = 1;
  }

  // torso
  ctx.strokeStyle = DIM;
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(sx, view.y0);
  ctx.lineTo(sx, sy);
  ctx.stroke();

  // the arm itself
  ctx.strokeStyle = ARM;
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(sx, sy);
  ctx.lineTo(ex, ey);
  ctx.lineTo(wx, wy);
  ctx.stroke();
  for (const [jx, jy] of [
    [sx, sy],
    [ex, ey],
    [wx, wy],
  ]) {
    ctx.fillStyle = INK;
    ctx.beginPath();
    ctx.arc(jx, jy, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  // current ee target as a crosshair; red when clamped
  const [gx, gy] = toScreen({ y: frame.ee[1], z: frame.ee[2] }, view);
  ctx.strokeStyle = frame.clamped.some(Boolean) ? WARN : TRACE;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(gx - 7, gy);
  ctx.lineTo(gx + 7, gy);
  ctx.moveTo(gx, gy - 7);
  ctx.lineTo(gx, gy + 7);
  ctx.stroke();
}

function paintDial(ctx: Painter, scene: Scene, x: number, y: number, w: number, h: number): void {
  const cx = x + w / 2;
  const cy = y + h * 0.3;
  const r = Math.min(w, h) * 0.28;

  ctx.strokeStyle = DIM;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.stroke();

  ctx.fillStyle = DIM;
  ctx.font = "12px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText("heading", cx, cy + r + 16);

  const frame = scene.frame;
  if (frame) {
    // top-down: forward (+z) points up the page, turning left rotates ccw
    const yaw = Math.atan2(frame.x[12], frame.x[13]);
    const nx = cx - Math.sin(yaw) * r;
    const ny = cy - Math.cos(yaw) * r;
    ctx.strokeStyle = ARM;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(nx, ny);
    ctx.stroke();

    ctx.fillStyle = INK;
    ctx.textAlign = "left";
    const tx = x + 14;
    let ty = cy + r + 44;
    const spread = frame.spread.map((s) => s.toFixed(3)).join(" ");
    const lines = [
      `t      ${frame.t.toFixed(2)} s`,
      `rate   ${frame.hz.toFixed(0)} Hz nominal, ${scene.fps.toFixed(0)} fps drawn`,
      `spread ${spread}`,
      `ee     ${frame.ee.map((v) => v.toFixed(2)).join(" ")} m`,
      `warm   ${frame.warm === false ? "no (window filling)" : "yes"}`,
      `clamp  ${frame.clamped.map((c) => (c ? "X" : "-")).join(" ")}`,
    ];
    for (const line of lines) {
      ctx.fillText(line, tx, ty);
      ty += 18;
    }
  }

  // pointer box at the bottom of the panel
  const bs = Math.min(w, h) * 0.3;
  const bx = cx - bs / 2;
  const by = y + h - bs - 30;
  ctx.strokeStyle = DIM;
  ctx.lineWidth = 1;
  ctx.strokeRect(bx, by, bs, bs);
  const px = bx + ((scene.pointer.px + 1) / 2) * bs;
  const py = by + ((1 - scene.pointer.py) / 2) * bs;
  ctx.fillStyle = TRACE;
  ctx.beginPath();
  ctx.arc(px, py, 4, 0, 2 * Math.PI);
  ctx.fill();
  ctx.fillStyle = DIM;
  ctx.textAlign = "center";
  ctx.fillText("pointer", cx, by + bs + 16);
}
