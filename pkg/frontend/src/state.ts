// Console state lives behind a single reducer so every UI transition is a
// pure function of (state, event) and the tests can replay any scenario
// deterministically.

import type { ServerMessage, Telemetry } from "./protocol.js";

export const STALE_TELEMETRY_MS = 1000;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface ConsoleState {
  connection: ConnectionStatus;
  telemetry: Telemetry | null;
  lastTelemetryAt: number | null; // local clock, ms
  telemetryAgeMs: number;
  bars: { kt_frac: number; kr_frac: number };
  haptic: number;
  lastError: string | null;
  scale: number;
  locked: boolean; // success reached: inputs freeze
}

export const initialState: ConsoleState = {
  connection: "connecting",
  telemetry: null,
  lastTelemetryAt: null,
  telemetryAgeMs: 0,
  bars: { kt_frac: 0, kr_frac: 0 },
  haptic: 0,
  lastError: null,
  scale: 1.0,
  locked: false,
};

export type ConsoleEvent =
  | { kind: "connection"; status: ConnectionStatus }
  | { kind: "server"; msg: ServerMessage; at: number }
  | { kind: "tick"; at: number }
  | { kind: "scale_input"; s: number };

export function reduce(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.kind) {
    case "connection":
      return { ...state, connection: event.status };
    case "tick": {
      const age = state.lastTelemetryAt === null ? Infinity : event.at - state.lastTelemetryAt;
      if (age === state.telemetryAgeMs) return state;
      return { ...state, telemetryAgeMs: age };
    }
    case "scale_input":
      return { ...state, scale: event.s };
    case "server":
      switch (event.msg.type) {
        case "telemetry":
          return {
            ...state,
            telemetry: event.msg,
            lastTelemetryAt: event.at,
            telemetryAgeMs: 0,
            locked: state.locked || event.msg.success,
          };
        case "bars":
          // displayed fractions always equal the last bars message
          return { ...state, bars: { kt_frac: event.msg.kt_frac, kr_frac: event.msg.kr_frac } };
        case "haptic":
          return { ...state, haptic: event.msg.amplitude };
        case "error":
          return { ...state, lastError: `${event.msg.code}: ${event.msg.detail}` };
      }
  }
}

// -- selectors ---------------------------------------------------------------

/** Badge shows when the tracker reports stale or telemetry itself dried up. */
export function staleBadgeVisible(state: ConsoleState): boolean {
  if (state.telemetryAgeMs > STALE_TELEMETRY_MS) return true;
  return state.telemetry !== null && state.telemetry.stale;
}

/** Scene greys out on stale telemetry, mirroring the tracker's stale flag. */
export function sceneGreyed(state: ConsoleState): boolean {
  return state.telemetry === null || state.telemetryAgeMs > STALE_TELEMETRY_MS;
}

export function inputsEnabled(state: ConsoleState): boolean {
  return state.connection === "open" && !state.locked;
}

export function successBannerVisible(state: ConsoleState): boolean {
  return state.locked;
}
