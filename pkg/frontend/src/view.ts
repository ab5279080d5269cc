// DOM bindings: pure render of ConsoleState onto the static page structure.
// All state transitions happen in the reducer; this file only reflects them.

import { drawScene } from "./scene.js";
import {
  inputsEnabled,
  sceneGreyed,
  staleBadgeVisible,
  successBannerVisible,
  type ConsoleState,
} from "./state.js";

export interface ViewRefs {
  barT: HTMLElement;
  barR: HTMLElement;
  barTLabel: HTMLElement;
  barRLabel: HTMLElement;
  staleBadge: HTMLElement;
  successBanner: HTMLElement;
  connBanner: HTMLElement;
  errorLine: HTMLElement;
  hapticDot: HTMLElement;
  phaseLabel: HTMLElement;
  scaleLabel: HTMLElement;
  inputs: HTMLElement[];
  workspaceCanvas: HTMLCanvasElement;
  toolCanvas: HTMLCanvasElement;
}

export function grabRefs(doc: Document): ViewRefs {
  const get = (id: string) => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };
  return {
    barT: get("bar-t"),
    barR: get("bar-r"),
    barTLabel: get("bar-t-label"),
    barRLabel: get("bar-r-label"),
    staleBadge: get("stale-badge"),
    successBanner: get("success-banner"),
    connBanner: get("conn-banner"),
    errorLine: get("error-line"),
    hapticDot: get("haptic-dot"),
    phaseLabel: get("phase-label"),
    scaleLabel: get("scale-label"),
    inputs: Array.from(doc.querySelectorAll<HTMLElement>("[data-input]")),
    workspaceCanvas: get("workspace-view") as HTMLCanvasElement,
    toolCanvas: get("tool-view") as HTMLCanvasElement,
  };
}

export function render(refs: ViewRefs, state: ConsoleState, nowMs: number): void {
  refs.barT.style.width = `${(state.bars.kt_frac * 100).toFixed(1)}%`;
  refs.barR.style.width = `${(state.bars.kr_frac * 100).toFixed(1)}%`;
  refs.barTLabel.textContent = state.telemetry ? `${state.telemetry.kt.toFixed(0)} N/m` : "-";
  refs.barRLabel.textContent = state.telemetry ? `${state.telemetry.kr.toFixed(1)} N*m/rad` : "-";

  refs.staleBadge.style.display = staleBadgeVisible(state) ? "inline-block" : "none";
  refs.successBanner.style.display = successBannerVisible(state) ? "block" : "none";
  refs.connBanner.style.display = state.connection === "open" ? "none" : "block";
  refs.connBanner.textContent = state.connection === "closed" ? "disconnected" : "connecting...";
  refs.errorLine.textContent = state.lastError ?? "";
  refs.phaseLabel.textContent = state.telemetry?.phase ?? "-";
  refs.scaleLabel.textContent = `x${state.scale.toFixed(2)}`;

  // vibrotactile stand-in: a dot pulsing at an intensity proportional to the cue
  const pulse = state.haptic * (0.55 + 0.45 * Math.sin(nowMs / 60));
  refs.hapticDot.style.opacity = `${(0.1 + 0.9 * Math.abs(pulse)).toFixed(3)}`;
  refs.hapticDot.style.transform = `scale(${(1 + 0.6 * Math.abs(pulse)).toFixed(3)})`;
  if (navigator.vibrate && state.haptic > 0.05) {
    navigator.vibrate(Math.round(state.haptic * 30));
  }

  const enabled = inputsEnabled(state);
  for (const el of refs.inputs) {
    el.toggleAttribute("disabled", !enabled);
    el.classList.toggle("disabled", !enabled);
  }

  const greyed = sceneGreyed(state);
  const ws = refs.workspaceCanvas.getContext("2d");
  if (ws) drawScene(ws, state.telemetry, "workspace", greyed);
  const tool = refs.toolCanvas.getContext("2d");
  if (tool) drawScene(tool, state.telemetry, "tool", greyed);
}
