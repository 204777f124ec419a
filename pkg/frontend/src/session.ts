/**
 * Connection lifecycle for one teleop session.
 *
 * Each (re)connect asks the server for a fresh session id, then opens
 * the WebSocket it names; sessions are single-use on the server, so a
 * dropped connection always means a new id.  Only the newest state frame
 * is kept: rendering pulls `latest`, so a slow tab can never build up
 * replay lag.  All failures land in `status`/`lastError` for the status
 * bar; nothing is thrown across the event loop.
 */

import {
  ProtocolError,
  ServerBase,
  ServerFrame,
  StateFrame,
  SteerEvent,
  parseServerFrame,
  serializeRecalibrate,
  serializeSteer,
} from "./protocol.js";

export type Status = "connecting" | "connected" | "disconnected";

/** The subset of WebSocket the client touches; tests substitute a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface SessionDeps {
  fetchJson(url: string): Promise<unknown>;
  makeSocket(url: string): SocketLike;
  setTimer(fn: () => void, ms: number): unknown;
  clearTimer(handle: unknown): void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 5000;

export class TeleopClient {
  status: Status = "disconnected";
  latest: StateFrame | null = null;
  lastError = "";
  framesReceived = 0;

  private socket: SocketLike | null = null;
  private timer: unknown = null;
  private backoffMs = BACKOFF_START_MS;
  private stopped = false;
  private generation = 0;

  constructor(
    private base: ServerBase,
    private deps: SessionDeps,
    private onChange: () => void = () => {},
  ) {}

  connect(): void {
    this.stopped = false;
    const gen = ++this.generation;
    this.setStatus("connecting");
    this.deps
      .fetchJson(`${this.base.http}/session/new`)
      .then((doc) => {
        if (gen !== this.generation || this.stopped) return;
        const wsUrl = (doc as { ws_url?: unknown })?.ws_url;
        if (typeof wsUrl !== "string") {
          throw new ProtocolError("session/new did not return ws_url");
        }
        this.openSocket(`${this.base.ws}${wsUrl}`, gen);
      })
      .catch((err) => {
        if (gen !== this.generation || this.stopped) return;
        this.lastError = err instanceof Error ? err.message : String(err);
        this.dropped();
      });
  }

  /** Stop for good; no further reconnect attempts. */
  close(): void {
    this.stopped = true;
    this.generation++;
    if (this.timer !== null) this.deps.clearTimer(this.timer);
    this.timer = null;
    this.socket?.close();
    this.socket = null;
    this.setStatus("disconnected");
  }

  sendSteer(ev: SteerEvent): void {
    if (this.status === "connected" && this.socket) {
      this.socket.send(serializeSteer(ev));
    }
  }

  sendRecalibrate(): void {
    if (this.status === "connected" && this.socket) {
      this.socket.send(serializeRecalibrate());
    }
  }

  private openSocket(url: string, gen: number): void {
    const sock = this.deps.makeSocket(url);
    this.socket = sock;
    sock.onopen = () => {
      if (gen !== this.generation) return;
      this.backoffMs = BACKOFF_START_MS;
      this.lastError = "";
      this.setStatus("connected");
    };
    sock.onmessage = (ev) => {
      if (gen !== this.generation) return;
      this.handleFrame(String(ev.data));
    };
    const drop = () => {
      if (gen !== this.generation) return;
      this.dropped();
    };
    sock.onclose = drop;
    sock.onerror = drop;
  }

  private handleFrame(text: string): void {
    let frame: ServerFrame;
    try {
      frame = parseServerFrame(text);
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.onChange();
      return;
    }
    if (frame.type === "error") {
      this.lastError = frame.msg;
      this.onChange();
      return;
    }
    this.latest = frame; // newest wins; skipped frames never queue up
    this.framesReceived++;
    this.onChange();
  }

  private dropped(): void {
    this.socket = null;
    if (this.stopped) return;
    this.setStatus("disconnected");
    const gen = this.generation;
    this.timer = this.deps.setTimer(() => {
      this.timer = null;
      if (gen === this.generation && !this.stopped) this.connect();
    }, this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
  }

  private setStatus(status: Status): void {
    this.status = status;
    this.onChange();
  }
}
