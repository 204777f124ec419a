import { describe, expect, it } from "vitest";

import {
  ProtocolError,
  parseServerFrame,
  resolveServer,
  serializeRecalibrate,
  serializeSteer,
} from "../src/protocol.js";

function stateDoc(overrides: Record<string, unknown> = {}): string {
  return JSON.stringify({
    type: "state",
    t: 0.02,
    x: Array(27).fill(0.5),
    spread: [0.01, 0.02, 0.003],
    ee: [0, 0.15, 0.28],
    clamped: [false, false, true],
    hz: 50,
    warm: true,
    ...overrides,
  });
}

describe("parseServerFrame", () => {
  it("accepts a full state frame", () => {
    const frame = parseServerFrame(stateDoc());
    expect(frame.type).toBe("state");
    if (frame.type !== "state") return;
    expect(frame.x).toHaveLength(27);
    expect(frame.clamped).toEqual([false, false, true]);
    expect(frame.warm).toBe(true);
    expect(frame.hz).toBe(50);
  });

  it("accepts error frames", () => {
    const frame = parseServerFrame(JSON.stringify({ type: "error", msg: "nope" }));
    expect(frame).toEqual({ type: "error", msg: "nope" });
  });

  it("treats warm as optional", () => {
    const doc = JSON.parse(stateDoc());
    delete doc.warm;
    const frame = parseServerFrame(JSON.stringify(doc));
    expect(frame.type).toBe("state");
    if (frame.type === "state") expect(frame.warm).toBeUndefined();
  });

  it.each([
    ["not json", "{nope"],
    ["not an object", "[1,2]"],
    ["unknown type", JSON.stringify({ type: "pose" })],
    ["error without msg", JSON.stringify({ type: "error" })],
    ["short state", stateDoc({ x: Array(26).fill(0) })],
    ["non-finite entry", stateDoc({ ee: [0, null, 0] })],
    ["bad clamped", stateDoc({ clamped: [0, 0, 0] })],
    ["missing t", stateDoc({ t: "now" })],
  ])("rejects %s", (_name, text) => {
    expect(() => parseServerFrame(text)).toThrow(ProtocolError);
  });
});

describe("steer serialization", () => {
  it("round-trips through JSON", () => {
    const text = serializeSteer({ type: "steer", t: 1.25, px: -0.5, py: 1, dyaw: 0.03 });
    expect(JSON.parse(text)).toEqual({ type: "steer", t: 1.25, px: -0.5, py: 1, dyaw: 0.03 });
  });

  it("recalibrate is a bare typed message", () => {
    expect(JSON.parse(serializeRecalibrate())).toEqual({ type: "recalibrate" });
  });
});

describe("resolveServer", () => {
  const origin = "http://localhost:8000";

  it("defaults to the page origin", () => {
    expect(resolveServer("", origin)).toEqual({
      http: "http://localhost:8000",
      ws: "ws://localhost:8000",
    });
  });

  it("accepts host:port", () => {
    expect(resolveServer("?server=127.0.0.1:8472", origin)).toEqual({
      http: "http://127.0.0.1:8472",
      ws: "ws://127.0.0.1:8472",
    });
  });

  it("upgrades https to wss", () => {
    expect(resolveServer("?server=https://arm.example", origin).ws).toBe("wss://arm.example");
  });

  it("rejects other schemes", () => {
    expect(() => resolveServer("?server=ftp://x", origin)).toThrow(ProtocolError);
  });
});
