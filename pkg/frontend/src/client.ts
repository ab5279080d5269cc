// WebSocket transport: queues sends until the socket opens, forwards frames
// and lifecycle events to the core.

import type { ConsoleCore, Transport } from "./core.js";

export function makeTransport(ws: WebSocket): Transport {
  const backlog: string[] = [];
  ws.addEventListener("open", () => {
    for (const text of backlog.splice(0)) ws.send(text);
  });
  return {
    send(text: string) {
      if (ws.readyState === WebSocket.OPEN) ws.send(text);
      else if (ws.readyState === WebSocket.CONNECTING) backlog.push(text);
      // closed sockets drop sends; the UI is already showing the banner
    },
  };
}

export function wireSocket(ws: WebSocket, core: ConsoleCore, clock: () => number = () => performance.now()): void {
  ws.addEventListener("open", () => core.onOpen());
  ws.addEventListener("close", () => core.onClose());
  ws.addEventListener("error", () => core.onClose());
  ws.addEventListener("message", (ev) => {
    if (typeof ev.data === "string") {
      try {
        core.onFrame(ev.data, clock());
      } catch {
        // a malformed server frame is ignored; the next one resyncs
      }
    }
  });
}
