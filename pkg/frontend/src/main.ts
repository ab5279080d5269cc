// Bootstrap: query parameters pick the gateway and mode, DOM events drive the
// core, a fixed-cadence timer advances ramps, rAF renders.

import { makeTransport, wireSocket } from "./client.js";
import { ConsoleCore } from "./core.js";
import { grabRefs, render } from "./view.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function bindHold(el: HTMLElement, press: () => void, release: () => void): void {
  el.addEventListener("pointerdown", (ev) => {
    ev.preventDefault();
    el.setPointerCapture(ev.pointerId);
    press();
  });
  const up = () => release();
  el.addEventListener("pointerup", up);
  el.addEventListener("pointercancel", up);
  el.addEventListener("pointerleave", up);
}

function main(): void {
  const host = param("host", window.location.hostname || "127.0.0.1");
  const port = param("port", "8765");
  const directPose = param("direct", "0") === "1";

  const ws = new WebSocket(`ws://${host}:${port}`);
  const core = new ConsoleCore(makeTransport(ws), { directPose });
  wireSocket(ws, core);

  const refs = grabRefs(document);
  const doc = document;

  bindHold(doc.getElementById("press-t")!, () => core.pressTranslational(), () => core.releaseTranslational());
  bindHold(doc.getElementById("press-r")!, () => core.pressRotational(), () => core.releaseRotational());

  doc.getElementById("btn-gripper")!.addEventListener("click", () => core.clickGripper());
  doc.getElementById("btn-teleop")!.addEventListener("click", () => core.clickTeleop());

  const scale = doc.getElementById("scale-slider") as HTMLInputElement;
  scale.addEventListener("change", () => core.commitScale(Number(scale.value)));

  const dragPad = doc.getElementById("drag-pad") as HTMLCanvasElement;
  const zSlider = doc.getElementById("z-slider") as HTMLInputElement;
  const yawSlider = doc.getElementById("yaw-slider") as HTMLInputElement;
  dragPad.style.display = directPose ? "block" : "none";
  if (directPose) {
    let dragging = false;
    const emit = (ev: PointerEvent) => {
      const rect = dragPad.getBoundingClientRect();
      const x = ((ev.clientX - rect.left) / rect.width - 0.5) * 0.6;
      const y = ((ev.clientY - rect.top) / rect.height - 0.5) * -0.6;
      core.sendPose(performance.now(), x, y, Number(zSlider.value), Number(yawSlider.value));
    };
    dragPad.addEventListener("pointerdown", (ev) => {
      dragging = true;
      dragPad.setPointerCapture(ev.pointerId);
      emit(ev);
    });
    dragPad.addEventListener("pointermove", (ev) => {
      if (dragging) emit(ev);
    });
    dragPad.addEventListener("pointerup", () => {
      dragging = false;
    });
  }

  window.setInterval(() => core.tick(performance.now()), 25);

  const frame = () => {
    render(refs, core.state, performance.now());
    window.requestAnimationFrame(frame);
  };
  window.requestAnimationFrame(frame);
}

main();
