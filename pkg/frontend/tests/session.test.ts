/** Headless end-to-end: a scripted mock server drives the console core. */

import { describe, expect, it } from "vitest";

import type { LegendModel } from "../src/colormap.js";
import { encodeMeshBinary } from "../src/mesh.js";
import { ConsoleSession } from "../src/session.js";
import { IDENTITY, multiply, rotationAbout, translation } from "../src/rigid.js";
import { FakeTimeline } from "./faketime.js";

function sceneJson(vertexCount = 4): string {
  return JSON.stringify({
    type: "scene",
    mesh_url: "/assets/brain.bin",
    coil_url: "/assets/coil.bin",
    colormap: { range: null, stops: [[0, [0, 0, 255]], [0.5, [255, 255, 0]], [1, [255, 0, 0]]] },
    dims: [70, 90, 50],
    vertex_count: vertexCount,
    units: "V/m",
  });
}

function metaJson(runId: number, range: [number, number] = [0, 10]): string {
  return JSON.stringify({
    type: "field_meta",
    run_id: runId,
    dims: [70, 90, 50],
    range,
    compute_s: 0.08,
    vis_s: 0.02,
  });
}

function binaryFrame(runId: number, scalars: number[]): ArrayBuffer {
  const buf = new ArrayBuffer(4 + scalars.length * 4);
  new DataView(buf).setUint32(0, runId, true);
  new Float32Array(buf, 4).set(scalars);
  return buf;
}

function setup() {
  const time = new FakeTimeline();
  const sent: string[] = [];
  const overlays: { runId: number; legend: LegendModel; colors: Float32Array }[] = [];
  const warnings: string[] = [];
  const session = new ConsoleSession(
    { send: (d) => sent.push(d) },
    {
      onOverlay: (ov, colors, legend) =>
        overlays.push({ runId: ov.runId, legend, colors }),
      onWarning: (active, msg) => warnings.push(active ? msg : "cleared"),
    },
    { now: time.now, schedule: time.schedule },
  );
  return { time, sent, overlays, warnings, session };
}

describe("ConsoleSession against a scripted server", () => {
  it("pose stream respects the 30 ms throttle and delivers the end pose", () => {
    const { time, sent, session } = setup();
    session.handleMessage(sceneJson());
    for (let i = 0; i < 100; i++) {
      session.dragUpdate(translation(i, 0, 0));
      time.advanceBy(6); // 600 ms drag
    }
    const final = multiply(translation(50, 0, 20), rotationAbout([0, 0, 1], 0.5));
    session.dragEnd(final);
    time.advanceBy(100);
    expect(sent.length).toBeLessThanOrEqual(Math.floor(700 / 30) + 1);
    const parsed = sent.map((s) => JSON.parse(s));
    for (const msg of parsed) expect(msg.type).toBe("pose");
    expect(parsed[parsed.length - 1].matrix).toEqual(final);
  });

  it("rejects non-rigid matrix entry client-side, sending nothing", () => {
    const { sent, session } = setup();
    session.handleMessage(sceneJson());
    const refl = [...IDENTITY];
    refl[10] = -1;
    const res = session.enterMatrix(refl.join(" "));
    expect(res.ok).toBe(false);
    expect(res.error).toBeTruthy();
    expect(sent).toHaveLength(0);
    expect(session.coilPose).toEqual(IDENTITY); // coil did not move
  });

  it("accepts a valid matrix, snaps the coil, and sends exactly once", () => {
    const { sent, session } = setup();
    session.handleMessage(sceneJson());
    const m = multiply(translation(5, 6, 7), rotationAbout([1, 0, 0], 0.3));
    const res = session.enterMatrix(m.map((v) => v.toFixed(9)).join(", "));
    expect(res.ok).toBe(true);
    expect(sent).toHaveLength(1);
    const echo = JSON.parse(sent[0]);
    echo.matrix.forEach((v: number, i: number) => expect(v).toBeCloseTo(m[i], 8));
    session.coilPose.forEach((v, i) => expect(v).toBeCloseTo(m[i], 8));
  });

  it("drops out-of-order overlay frames and keeps the newest", () => {
    const { overlays, session } = setup();
    session.handleMessage(sceneJson(3));
    session.handleMessage(metaJson(3));
    session.handleMessage(binaryFrame(3, [1, 2, 3]));
    session.handleMessage(metaJson(2));
    session.handleMessage(binaryFrame(2, [9, 9, 9]));
    expect(overlays.map((o) => o.runId)).toEqual([3]);
    expect(session.overlay!.displayedRunId).toBe(3);
  });

  it("renders legend endpoints from the configured range", () => {
    const { overlays, session } = setup();
    session.handleMessage(sceneJson(2));
    session.handleMessage(metaJson(1, [0, 150]));
    session.handleMessage(binaryFrame(1, [10, 150]));
    expect(overlays).toHaveLength(1);
    expect(overlays[0].legend.minLabel).toBe("0.00");
    expect(overlays[0].legend.maxLabel).toBe("150");
    // max-range scalar renders as the last ramp color
    const c = overlays[0].colors;
    expect([c[3], c[4], c[5]]).toEqual([1, 0, 0]);
  });

  it("drops frames with the wrong scalar count", () => {
    const { overlays, session } = setup();
    session.handleMessage(sceneJson(3));
    session.handleMessage(metaJson(1));
    session.handleMessage(binaryFrame(1, [1, 2, 3, 4, 5]));
    expect(overlays).toHaveLength(0);
    expect(session.overlay!.dropped[0].kind).toBe("count_mismatch");
  });

  it("buffers gestures visual-only with a warning when disconnected", () => {
    const { sent, warnings, session } = setup();
    session.handleMessage(sceneJson());
    session.setConnected(false);
    session.dragUpdate(translation(4, 0, 0));
    session.dragEnd(translation(4, 0, 0));
    expect(sent).toHaveLength(0);
    expect(session.coilPose).toEqual(translation(4, 0, 0));
    expect(warnings[0]).toMatch(/disconnected/);
    session.setConnected(true);
    expect(warnings[1]).toBe("cleared");
  });

  it("updates the latency HUD with a rolling mean", () => {
    const { session } = setup();
    session.handleMessage(sceneJson(1));
    for (let i = 1; i <= 60; i++) {
      session.handleMessage(metaJson(i));
      session.handleMessage(binaryFrame(i, [1]));
    }
    expect(session.hud.runs).toBe(50); // window
    const view = session.hud.view();
    expect(view.lastCompute).toBe("80.0 ms");
    expect(view.meanCompute).toBe("80.0 ms");
  });
});

describe("mesh binary round trip", () => {
  it("decodes what it encodes", async () => {
    const { decodeMeshBinary } = await import("../src/mesh.js");
    const positions = new Float32Array([0, 0, 0, 1, 0, 0, 0, 1, 0]);
    const indices = new Uint32Array([0, 1, 2]);
    const buf = encodeMeshBinary({ positions, indices });
    const back = decodeMeshBinary(buf);
    expect(back).not.toBeNull();
    expect(Array.from(back!.positions)).toEqual(Array.from(positions));
    expect(Array.from(back!.indices)).toEqual(Array.from(indices));
  });

  it("rejects junk", async () => {
    const { decodeMeshBinary } = await import("../src/mesh.js");
    expect(decodeMeshBinary(new ArrayBuffer(3))).toBeNull();
    expect(decodeMeshBinary(new ArrayBuffer(64))).toBeNull();
  });
});
