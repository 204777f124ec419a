/**
 * Two-channel steering: the pointer drives the wrist target in the
 * sagittal plane, held keys (A/D or the arrow keys) turn the heading.
 * `tick` is called on a fixed cadence and emits one steer event with the
 * heading increment accumulated over that tick.
 */

import { SteerEvent } from "./protocol.js";

const YAW_KEYS: Record<string, number> = {
  a: 1,
  A: 1,
  ArrowLeft: 1,
  d: -1,
  D: -1,
  ArrowRight: -1,
};

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export class SteerState {
  px = 0;
  py = 0;
  private held = new Set<string>();
  private t = 0;

  /** yawRate: radians per second while a key is held */
  constructor(public yawRate = 1.5) {}

  /** Pointer position normalized to [-1, 1] on both axes. */
  setPointer(px: number, py: number): void {
    this.px = clamp(px, -1, 1);
    this.py = clamp(py, -1, 1);
  }

  keyDown(key: string): boolean {
    if (!(key in YAW_KEYS)) return false;
    this.held.add(key);
    return true;
  }

  keyUp(key: string): void {
    this.held.delete(key);
  }

  /** Net turn direction from the held keys: -1, 0, or +1. */
  get direction(): number {
    let dir = 0;
    for (const key of this.held) dir += YAW_KEYS[key];
    return Math.sign(dir);
  }

  /** One cadence step of `dt` seconds. */
  tick(dt: number): SteerEvent {
    this.t += dt;
    return {
      type: "steer",
      t: this.t,
      px: this.px,
      py: this.py,
      dyaw: this.direction * this.yawRate * dt,
    };
  }
}
