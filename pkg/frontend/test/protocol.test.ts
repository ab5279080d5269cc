import { describe, expect, it } from "vitest";

import { encodeClient, parseServer, sanitizeClient } from "../src/protocol.js";

describe("client encoding", () => {
  it("round-trips an fsr message", () => {
    const frame = encodeClient({ type: "fsr", t: 1.0, pt: 0.2, pr: 0.9 });
    const obj = JSON.parse(frame);
    expect(obj).toEqual({ type: "fsr", t: 1.0, pt: 0.2, pr: 0.9 });
  });

  it("clamps out-of-range pressures and scale", () => {
    expect(sanitizeClient({ type: "fsr", t: 0, pt: 1.5, pr: -0.3 })).toEqual({
      type: "fsr",
      t: 0,
      pt: 1,
      pr: 0,
    });
    expect(sanitizeClient({ type: "scale_set", s: 99 })).toEqual({ type: "scale_set", s: 2.0 });
    expect(sanitizeClient({ type: "scale_set", s: 0.0 })).toEqual({ type: "scale_set", s: 0.1 });
  });

  it("normalizes pose quaternions and rejects degenerate ones", () => {
    const msg = sanitizeClient({ type: "pose_sample", t: 0, p: [0, 0, 0.2], q: [2, 0, 0, 0] });
    if (msg.type !== "pose_sample") throw new Error("wrong type");
    expect(msg.q[0]).toBeCloseTo(1.0, 12);
    expect(() => sanitizeClient({ type: "pose_sample", t: 0, p: [0, 0, 0], q: [0, 0, 0, 0] })).toThrow();
  });

  it("rejects non-finite numbers", () => {
    expect(() => encodeClient({ type: "fsr", t: NaN, pt: 0, pr: 0 })).toThrow();
    expect(() => encodeClient({ type: "scale_set", s: Infinity })).toThrow();
  });
});

describe("server parsing", () => {
  const telemetry = {
    type: "telemetry",
    t: 1.25,
    ee_pose: { p: [0.1, 0.2, 0.3], q: [1, 0, 0, 0] },
    goal_pose: { p: [0, 0, 0], q: [1, 0, 0, 0] },
    kt: 500,
    kr: 60,
    ext_force_norm: 4.2,
    phase: "reach",
    success: false,
    stale: false,
    peg_pose: { p: [0.35, -0.18, 0.075], q: [1, 0, 0, 0] },
    hole_pose: { p: [0.35, 0.18, 0.15], q: [1, 0, 0, 0] },
  };

  it("parses telemetry", () => {
    const msg = parseServer(JSON.stringify(telemetry));
    expect(msg).toEqual(telemetry);
  });

  it("tolerates missing task-object poses", () => {
    const { peg_pose: _p, hole_pose: _h, ...bare } = telemetry;
    const msg = parseServer(JSON.stringify(bare));
    if (msg.type !== "telemetry") throw new Error("wrong type");
    expect(msg.peg_pose).toBeNull();
    expect(msg.hole_pose).toBeNull();
  });

  it("parses bars, haptic, error", () => {
    expect(parseServer('{"type":"bars","kt_frac":0.5,"kr_frac":0.25}')).toEqual({
      type: "bars",
      kt_frac: 0.5,
      kr_frac: 0.25,
    });
    expect(parseServer('{"type":"haptic","amplitude":0.7}')).toEqual({ type: "haptic", amplitude: 0.7 });
    expect(parseServer('{"type":"error","code":"busy","detail":"x"}')).toEqual({
      type: "error",
      code: "busy",
      detail: "x",
    });
  });

  it("throws on malformed frames", () => {
    expect(() => parseServer("{")).toThrow();
    expect(() => parseServer('{"type":"nope"}')).toThrow();
    expect(() => parseServer('{"type":"bars","kt_frac":"high","kr_frac":0}')).toThrow();
    expect(() => parseServer("null")).toThrow();
  });
});
