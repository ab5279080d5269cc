// Headless console core: owns the reducer state, the pressure ramps, and the
// outgoing message discipline (pressure streams at a fixed cadence while
// held, buttons send exactly one toggle per click, the slider one scale_set
// per release). The DOM shell and the tests drive exactly the same object.

import { encodeClient, type ClientMessage, parseServer } from "./protocol.js";
import { PressureRamp, RAMP_MS_DEFAULT } from "./ramp.js";
import {
  initialState,
  inputsEnabled,
  reduce,
  type ConsoleEvent,
  type ConsoleState,
} from "./state.js";

export interface Transport {
  send(text: string): void;
}

export interface CoreOptions {
  fsrPeriodMs?: number; // pressure stream cadence while held
  rampMs?: number;
  directPose?: boolean;
}

export class ConsoleCore {
  state: ConsoleState = initialState;
  readonly sent: ClientMessage[] = []; // outgoing log, newest last

  private translational: PressureRamp;
  private rotational: PressureRamp;
  private fsrPeriodMs: number;
  private lastFsrAt: number | null = null;
  private needsFinalZero = false;
  private listeners: Array<(s: ConsoleState) => void> = [];
  readonly directPose: boolean;

  constructor(private transport: Transport, opts: CoreOptions = {}) {
    this.fsrPeriodMs = opts.fsrPeriodMs ?? 50;
    this.translational = new PressureRamp(opts.rampMs ?? RAMP_MS_DEFAULT);
    this.rotational = new PressureRamp(opts.rampMs ?? RAMP_MS_DEFAULT);
    this.directPose = opts.directPose ?? false;
  }

  subscribe(listener: (s: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private dispatch(event: ConsoleEvent): void {
    const next = reduce(this.state, event);
    if (next !== this.state) {
      this.state = next;
      for (const l of this.listeners) l(next);
    }
  }

  private send(msg: ClientMessage): void {
    this.transport.send(encodeClient(msg));
    this.sent.push(msg);
  }

  // -- socket plumbing -------------------------------------------------------

  onOpen(): void {
    this.dispatch({ kind: "connection", status: "open" });
  }

  onClose(): void {
    this.dispatch({ kind: "connection", status: "closed" });
  }

  onFrame(frame: string, at: number): void {
    this.dispatch({ kind: "server", msg: parseServer(frame), at });
  }

  // -- user gestures -----------------------------------------------------------

  pressTranslational(level = 1.0): void {
    if (inputsEnabled(this.state)) this.translational.press(level);
  }

  releaseTranslational(): void {
    this.translational.release();
  }

  pressRotational(level = 1.0): void {
    if (inputsEnabled(this.state)) this.rotational.press(level);
  }

  releaseRotational(): void {
    this.rotational.release();
  }

  /** One click, one message. */
  clickGripper(): void {
    if (inputsEnabled(this.state)) this.send({ type: "gripper_toggle" });
  }

  clickTeleop(): void {
    if (inputsEnabled(this.state)) this.send({ type: "teleop_toggle" });
  }

  /** Slider release: a single scale_set. */
  commitScale(s: number): void {
    if (!inputsEnabled(this.state)) return;
    this.dispatch({ kind: "scale_input", s });
    this.send({ type: "scale_set", s });
  }

  /** Direct-pose mode: the drag surface plus z/yaw controls command a pose. */
  sendPose(at: number, x: number, y: number, z: number, yawRad: number): void {
    if (!this.directPose || !inputsEnabled(this.state)) return;
    const half = yawRad / 2;
    this.send({
      type: "pose_sample",
      t: at / 1000,
      p: [x, y, z],
      q: [Math.cos(half), 0, 0, Math.sin(half)],
    });
  }

  // -- periodic work -------------------------------------------------------------

  /** Advance ramps and staleness; emit the pressure stream while held. */
  tick(at: number): void {
    this.dispatch({ kind: "tick", at });
    const pt = this.translational.sample(at);
    const pr = this.rotational.sample(at);
    const active = this.translational.active || this.rotational.active;
    if (active) this.needsFinalZero = true;
    const due = this.lastFsrAt === null || at - this.lastFsrAt >= this.fsrPeriodMs;
    if (!due) return;
    if (active) {
      this.send({ type: "fsr", t: at / 1000, pt, pr });
      this.lastFsrAt = at;
    } else if (this.needsFinalZero) {
      // one trailing zero so the gateway sees the release
      this.send({ type: "fsr", t: at / 1000, pt: 0, pr: 0 });
      this.needsFinalZero = false;
      this.lastFsrAt = at;
    }
  }
}
