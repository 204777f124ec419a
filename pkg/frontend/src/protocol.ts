/**
 * Wire protocol of the teleoperation service.
 *
 * Transport is a WebSocket carrying one JSON object per text frame.
 * Client to server:
 *   {"type":"steer", t, px, py, dyaw}   pointer in [-1,1], dyaw radians/tick
 *   {"type":"recalibrate"}
 * Server to client:
 *   {"type":"state", t, x:[27], spread:[3], ee:[3], clamped:[3], hz}
 *   {"type":"error", msg}
 * Sessions are created over HTTP: GET /session/new -> {id, ws_url}.
 */

export interface StateFrame {
  type: "state";
  /** session time, seconds */
  t: number;
  /** 27-entry filter state: upper rot 6, lower rot 6, heading (sin,cos), velocities */
  x: number[];
  /** ensemble spread per group: upper rot, lower rot, heading */
  spread: number[];
  /** robot end-effector target, meters */
  ee: number[];
  /** which ee axes hit the workspace boundary */
  clamped: boolean[];
  /** nominal server tick rate */
  hz: number;
  /** false while the filter window is still filling */
  warm?: boolean;
}

export interface ErrorFrame {
  type: "error";
  msg: string;
}

export type ServerFrame = StateFrame | ErrorFrame;

export interface SteerEvent {
  type: "steer";
  t: number;
  px: number;
  py: number;
  dyaw: number;
}

export class ProtocolError extends Error {}

const STATE_DIM = 27;

function numberArray(v: unknown, n: number, what: string): number[] {
  if (!Array.isArray(v) || v.length !== n) {
    throw new ProtocolError(`${what} must be an array of ${n} numbers`);
  }
  for (const e of v) {
    if (typeof e !== "number" || !Number.isFinite(e)) {
      throw new ProtocolError(`${what} has a non-finite entry`);
    }
  }
  return v as number[];
}

/** Parse one server frame; throws ProtocolError on anything malformed. */
export function parseServerFrame(text: string): ServerFrame {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("frame must be a JSON object");
  }
  const obj = doc as Record<string, unknown>;
  if (obj.type === "error") {
    if (typeof obj.msg !== "string") throw new ProtocolError("error frame without msg");
    return { type: "error", msg: obj.msg };
  }
  if (obj.type !== "state") {
    throw new ProtocolError(`unknown frame type: ${String(obj.type)}`);
  }
  if (typeof obj.t !== "number" || !Number.isFinite(obj.t)) {
    throw new ProtocolError("state frame needs a finite t");
  }
  if (typeof obj.hz !== "number" || !Number.isFinite(obj.hz)) {
    throw new ProtocolError("state frame needs a finite hz");
  }
  const clamped = obj.clamped;
  if (!Array.isArray(clamped) || clamped.length !== 3 || clamped.some((c) => typeof c !== "boolean")) {
    throw new ProtocolError("clamped must be three booleans");
  }
  return {
    type: "state",
    t: obj.t,
    x: numberArray(obj.x, STATE_DIM, "x"),
    spread: numberArray(obj.spread, 3, "spread"),
    ee: numberArray(obj.ee, 3, "ee"),
    clamped: clamped as boolean[],
    hz: obj.hz,
    warm: typeof obj.warm === "boolean" ? obj.warm : undefined,
  };
}

export function serializeSteer(ev: SteerEvent): string {
  return JSON.stringify({ type: "steer", t: ev.t, px: ev.px, py: ev.py, dyaw: ev.dyaw });
}

export function serializeRecalibrate(): string {
  return JSON.stringify({ type: "recalibrate" });
}

export interface ServerBase {
  /** e.g. "http://127.0.0.1:8472" */
  http: string;
  /** e.g. "ws://127.0.0.1:8472" */
  ws: string;
}

/**
 * Resolve the server base from a ?server= query value.  Accepts
 * "host:port", "http://host:port", or "https://host:port"; an empty
 * value falls back to the page's own origin.
 */
export function resolveServer(query: string, origin: string): ServerBase {
  const params = new URLSearchParams(query);
  let raw = params.get("server") ?? "";
  if (raw === "") raw = origin;
  if (!/^[a-z]+:\/\//.test(raw)) raw = `http://${raw}`;
  const url = new URL(raw);
  if (url.protocol !== "http:" && url.protocol !== "https:") {
    throw new ProtocolError(`unsupported server scheme: ${url.protocol}`);
  }
  const wsScheme = url.protocol === "https:" ? "wss:" : "ws:";
  return {
    http: `${url.protocol}//${url.host}`,
    ws: `${wsScheme}//${url.host}`,
  };
}
