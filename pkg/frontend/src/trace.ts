/** Bounded history of end-effector targets for the sagittal trace view. */

export interface TracePoint {
  t: number;
  ee: [number, number, number];
}

export class TraceBuffer {
  private points_: TracePoint[] = [];

  constructor(private windowS = 10) {}

  /**
   * Append a point and drop everything older than the window.  A time
   * going backwards (recalibration or a fresh session) clears the trace,
   * since old targets no longer share the new session's clock.
   */
  push(t: number, ee: number[]): void {
    const last = this.points_[this.points_.length - 1];
    if (last !== undefined && t < last.t) this.points_ = [];
    this.points_.push({ t, ee: [ee[0], ee[1], ee[2]] });
    const cutoff = t - this.windowS;
    let start = 0;
    while (start < this.points_.length && this.points_[start].t < cutoff) start++;
    if (start > 0) this.points_ = this.points_.slice(start);
  }

  clear(): void {
    this.points_ = [];
  }

  get points(): readonly TracePoint[] {
    return this.points_;
  }
}
