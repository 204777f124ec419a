import { describe, expect, it } from "vitest";

import { SessionDeps, SocketLike, TeleopClient } from "../src/session.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(public url: string) {}

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }
}

interface PendingFetch {
  url: string;
  resolve: (v: unknown) => void;
  reject: (e: unknown) => void;
}

interface FakeTimer {
  fn: () => void;
  ms: number;
  cleared: boolean;
}

function makeHarness() {
  const sockets: FakeSocket[] = [];
  const fetches: PendingFetch[] = [];
  const timers: FakeTimer[] = [];
  const deps: SessionDeps = {
    fetchJson: (url) =>
      new Promise((resolve, reject) => {
        fetches.push({ url, resolve, reject });
      }),
    makeSocket: (url) => {
      const s = new FakeSocket(url);
      sockets.push(s);
      return s;
    },
    setTimer: (fn, ms) => {
      const t: FakeTimer = { fn, ms, cleared: false };
      timers.push(t);
      return t;
    },
    clearTimer: (handle) => {
      (handle as FakeTimer).cleared = true;
    },
  };
  const base = { http: "http://srv:1", ws: "ws://srv:1" };
  const client = new TeleopClient(base, deps);
  return { client, sockets, fetches, timers };
}

const flush = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

function stateText(t: number): string {
  return JSON.stringify({
    type: "state",
    t,
    x: Array(27).fill(0),
    spread: [0, 0, 0],
    ee: [0, 0, 0],
    clamped: [false, false, false],
    hz: 50,
    warm: true,
  });
}

async function connectHappy(h: ReturnType<typeof makeHarness>): Promise<FakeSocket> {
  h.client.connect();
  expect(h.client.status).toBe("connecting");
  expect(h.fetches[h.fetches.length - 1].url).toBe("http://srv:1/session/new");
  h.fetches[h.fetches.length - 1].resolve({ id: "s1", ws_url: "/ws/s1" });
  await flush();
  const sock = h.sockets[h.sockets.length - 1];
  sock.onopen?.();
  expect(h.client.status).toBe("connected");
  return sock;
}

describe("TeleopClient", () => {
  it("creates a session then opens the socket it names", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    expect(sock.url).toBe("ws://srv:1/ws/s1");
  });

  it("keeps only the newest state frame", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    sock.onmessage?.({ data: stateText(0.02) });
    sock.onmessage?.({ data: stateText(0.04) });
    expect(h.client.latest?.t).toBe(0.04);
    expect(h.client.framesReceived).toBe(2);
  });

  it("surfaces error frames without touching the latest state", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    sock.onmessage?.({ data: stateText(0.02) });
    sock.onmessage?.({ data: JSON.stringify({ type: "error", msg: "bad steer" }) });
    expect(h.client.lastError).toBe("bad steer");
    expect(h.client.latest?.t).toBe(0.02);
  });

  it("survives malformed frames without throwing", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    sock.onmessage?.({ data: "{garbage" });
    expect(h.client.lastError).toContain("JSON");
    expect(h.client.status).toBe("connected");
  });

  it("sends steer only while connected", async () => {
    const h = makeHarness();
    h.client.sendSteer({ type: "steer", t: 0, px: 0, py: 0, dyaw: 0 });
    expect(h.sockets).toHaveLength(0);
    const sock = await connectHappy(h);
    h.client.sendSteer({ type: "steer", t: 0.02, px: 0.5, py: -0.5, dyaw: 0.01 });
    expect(sock.sent).toHaveLength(1);
    expect(JSON.parse(sock.sent[0]).px).toBe(0.5);
    h.client.sendRecalibrate();
    expect(JSON.parse(sock.sent[1])).toEqual({ type: "recalibrate" });
  });

  it("reconnects with a fresh session after a drop", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    sock.onclose?.();
    expect(h.client.status).toBe("disconnected");
    expect(h.timers).toHaveLength(1);
    expect(h.timers[0].ms).toBe(500);

    h.timers[0].fn(); // retry fires
    expect(h.client.status).toBe("connecting");
    expect(h.fetches).toHaveLength(2); // a new session id is requested
    h.fetches[1].resolve({ id: "s2", ws_url: "/ws/s2" });
    await flush();
    const sock2 = h.sockets[1];
    expect(sock2.url).toBe("ws://srv:1/ws/s2");
    sock2.onopen?.();
    expect(h.client.status).toBe("connected");
  });

  it("backs off when the server stays down, then resets on success", async () => {
    const h = makeHarness();
    h.client.connect();
    h.fetches[0].reject(new Error("connect ECONNREFUSED"));
    await flush();
    expect(h.client.status).toBe("disconnected");
    expect(h.client.lastError).toContain("ECONNREFUSED");
    expect(h.timers[0].ms).toBe(500);

    h.timers[0].fn();
    h.fetches[1].reject(new Error("still down"));
    await flush();
    expect(h.timers[1].ms).toBe(1000); // doubled

    h.timers[1].fn();
    h.fetches[2].resolve({ id: "s9", ws_url: "/ws/s9" });
    await flush();
    h.sockets[0].onopen?.();
    expect(h.client.status).toBe("connected");

    h.sockets[0].onclose?.();
    expect(h.timers[2].ms).toBe(500); // backoff reset by the good connection
  });

  it("close stops the reconnect loop", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    sock.onclose?.();
    expect(h.timers).toHaveLength(1);
    h.client.close();
    expect(h.timers[0].cleared).toBe(true);
    h.timers[0].fn(); // stale timer firing anyway must be a no-op
    expect(h.client.status).toBe("disconnected");
    expect(h.fetches).toHaveLength(1);
  });

  it("ignores events from a socket of a previous generation", async () => {
    const h = makeHarness();
    const sock = await connectHappy(h);
    h.client.close();
    h.client.connect();
    sock.onmessage?.({ data: stateText(9.99) }); // stale socket
    expect(h.client.latest).toBeNull();
  });
});
