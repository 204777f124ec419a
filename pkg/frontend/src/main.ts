/**
 * Browser entry point: wires pointer and keyboard input to the steering
 * channel, the WebSocket client to the scene, and the scene to a canvas
 * on animation frames.  Pick the server with ?server=host:port (defaults
 * to the page's own origin).
 */

import { resolveServer } from "./protocol.js";
import { paintScene } from "./render.js";
import { SocketLike, TeleopClient } from "./session.js";
import { SteerState } from "./steer.js";
import { TraceBuffer } from "./trace.js";

function wrapSocket(url: string): SocketLike {
  const ws = new WebSocket(url);
  const wrapper: SocketLike = {
    send: (d) => ws.send(d),
    close: () => ws.close(),
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
  };
  ws.onopen = () => wrapper.onopen?.();
  ws.onmessage = (ev) => wrapper.onmessage?.({ data: ev.data });
  ws.onclose = () => wrapper.onclose?.();
  ws.onerror = () => wrapper.onerror?.();
  return wrapper;
}

const STEER_INTERVAL_MS = 20; // 50 Hz steering cadence

function statusLine(client: TeleopClient): string {
  const err = client.lastError ? `  |  ${client.lastError}` : "";
  return `${client.status}${err}`;
}

function start(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  const statusBar = document.getElementById("status") as HTMLElement;
  const banner = document.getElementById("banner") as HTMLElement;
  const recalBtn = document.getElementById("recalibrate") as HTMLButtonElement;
  if (!ctx) {
    statusBar.textContent = "canvas 2d context unavailable";
    return;
  }

  let base;
  try {
    base = resolveServer(location.search, location.origin);
  } catch (err) {
    statusBar.textContent = err instanceof Error ? err.message : String(err);
    return;
  }

  const steer = new SteerState();
  const trace = new TraceBuffer(10);
  let lastTraceT = -1;

  const client = new TeleopClient(
    base,
    {
      fetchJson: async (url) => {
        const resp = await fetch(url);
        if (!resp.ok) throw new Error(`${url}: HTTP ${resp.status}`);
        return resp.json();
      },
      makeSocket: wrapSocket,
      setTimer: (fn, ms) => window.setTimeout(fn, ms),
      clearTimer: (h) => window.clearTimeout(h as number),
    },
    () => {
      statusBar.textContent = statusLine(client);
      banner.style.display = client.status === "connected" ? "none" : "block";
      banner.textContent =
        client.status === "connecting"
          ? `connecting to ${base.http} ...`
          : `disconnected from ${base.http}, retrying`;
      const frame = client.latest;
      if (frame && frame.t !== lastTraceT) {
        trace.push(frame.t, frame.ee);
        lastTraceT = frame.t;
      }
    },
  );
  client.connect();

  // steering cadence: one event per interval, dyaw scaled by real dt
  let lastTick = performance.now();
  window.setInterval(() => {
    const now = performance.now();
    const dt = (now - lastTick) / 1000;
    lastTick = now;
    client.sendSteer(steer.tick(dt));
  }, STEER_INTERVAL_MS);

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    // left 64% of the canvas is the side view; map it to [-1, 1]
    const sideW = rect.width * 0.64;
    const px = ((ev.clientX - rect.left) / sideW) * 2 - 1;
    const py = 1 - ((ev.clientY - rect.top) / rect.height) * 2;
    steer.setPointer(px, py);
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "r" || ev.key === "R") {
      client.sendRecalibrate();
      trace.clear();
      return;
    }
    if (steer.keyDown(ev.key)) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => steer.keyUp(ev.key));
  recalBtn.addEventListener("click", () => {
    client.sendRecalibrate();
    trace.clear();
  });

  function fitCanvas(): void {
    canvas.width = canvas.clientWidth * devicePixelRatio;
    canvas.height = canvas.clientHeight * devicePixelRatio;
  }
  window.addEventListener("resize", fitCanvas);
  fitCanvas();

  // render loop: draws only the latest frame, at display rate
  let frames = 0;
  let fps = 0;
  let fpsWindowStart = performance.now();
  function draw(): void {
    frames++;
    const now = performance.now();
    if (now - fpsWindowStart >= 1000) {
      fps = (frames * 1000) / (now - fpsWindowStart);
      frames = 0;
      fpsWindowStart = now;
    }
    ctx!.save();
    ctx!.scale(devicePixelRatio, devicePixelRatio);
    paintScene(
      ctx!,
      {
        frame: client.latest,
        trace: trace.points,
        pointer: { px: steer.px, py: steer.py },
        status: client.status,
        fps,
      },
      canvas.clientWidth,
      canvas.clientHeight,
    );
    ctx!.restore();
    requestAnimationFrame(draw);
  }
  requestAnimationFrame(draw);
}

window.addEventListener("load", start);
