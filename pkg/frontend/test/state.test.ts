import { describe, expect, it } from "vitest";

import type { ServerMessage, Telemetry } from "../src/protocol.js";
import {
  initialState,
  inputsEnabled,
  reduce,
  sceneGreyed,
  staleBadgeVisible,
  successBannerVisible,
  type ConsoleState,
} from "../src/state.js";

function telemetry(overrides: Partial<Telemetry> = {}): Telemetry {
  return {
    type: "telemetry",
    t: 0.5,
    ee_pose: { p: [0, 0, 0.3], q: [1, 0, 0, 0] },
    goal_pose: { p: [0, 0, 0.3], q: [1, 0, 0, 0] },
    kt: 500,
    kr: 50,
    ext_force_norm: 0,
    phase: "reach",
    success: false,
    stale: false,
    peg_pose: null,
    hole_pose: null,
    ...overrides,
  };
}

function feed(state: ConsoleState, msg: ServerMessage, at = 0): ConsoleState {
  return reduce(state, { kind: "server", msg, at });
}

describe("reducer", () => {
  it("bars display exactly the last bars message", () => {
    let s = initialState;
    s = feed(s, { type: "bars", kt_frac: 0.4, kr_frac: 0.1 });
    expect(s.bars).toEqual({ kt_frac: 0.4, kr_frac: 0.1 });
    s = feed(s, { type: "bars", kt_frac: 1.0, kr_frac: 0.9 });
    expect(s.bars).toEqual({ kt_frac: 1.0, kr_frac: 0.9 });
  });

  it("haptic amplitude zero means no pulse", () => {
    let s = feed(initialState, { type: "haptic", amplitude: 0 });
    expect(s.haptic).toBe(0);
    s = feed(s, { type: "haptic", amplitude: 0.6 });
    expect(s.haptic).toBe(0.6);
  });

  it("success locks the inputs and raises the banner", () => {
    let s = reduce(initialState, { kind: "connection", status: "open" });
    expect(inputsEnabled(s)).toBe(true);
    s = feed(s, telemetry({ success: true, phase: "done" }));
    expect(successBannerVisible(s)).toBe(true);
    expect(inputsEnabled(s)).toBe(false);
    // lock persists even if a later frame lacks the flag
    s = feed(s, telemetry({ success: false }));
    expect(successBannerVisible(s)).toBe(true);
  });

  it("disconnect disables inputs", () => {
    let s = reduce(initialState, { kind: "connection", status: "open" });
    s = reduce(s, { kind: "connection", status: "closed" });
    expect(inputsEnabled(s)).toBe(false);
  });

  it("server errors surface", () => {
    const s = feed(initialState, { type: "error", code: "stale", detail: "not engaging" });
    expect(s.lastError).toContain("stale");
  });
});

describe("staleness", () => {
  it("badge appears when telemetry stops for over a second", () => {
    let s = reduce(initialState, { kind: "connection", status: "open" });
    s = feed(s, telemetry(), 1000);
    s = reduce(s, { kind: "tick", at: 1500 });
    expect(staleBadgeVisible(s)).toBe(false);
    expect(sceneGreyed(s)).toBe(false);
    s = reduce(s, { kind: "tick", at: 2100 });
    expect(staleBadgeVisible(s)).toBe(true);
    expect(sceneGreyed(s)).toBe(true);
  });

  it("badge mirrors the tracker stale flag even with fresh telemetry", () => {
    let s = feed(initialState, telemetry({ stale: true }), 100);
    s = reduce(s, { kind: "tick", at: 120 });
    expect(staleBadgeVisible(s)).toBe(true);
    expect(sceneGreyed(s)).toBe(false); // telemetry itself still flows
  });

  it("fresh telemetry clears the age", () => {
    let s = feed(initialState, telemetry(), 0);
    s = reduce(s, { kind: "tick", at: 1200 });
    expect(staleBadgeVisible(s)).toBe(true);
    s = feed(s, telemetry(), 1300);
    expect(staleBadgeVisible(s)).toBe(false);
  });
});
