// Wire protocol shared with the gateway: one JSON object per text frame,
// tagged by "type". Everything the console sends is validated and clamped
// here so no gesture can put an out-of-range message on the wire.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export type PoseDict = { p: number[]; q: number[] };

export type ClientMessage =
  | { type: "pose_sample"; t: number; p: Vec3; q: Quat }
  | { type: "fsr"; t: number; pt: number; pr: number }
  | { type: "gripper_toggle" }
  | { type: "teleop_toggle" }
  | { type: "scale_set"; s: number };

export type Telemetry = {
  type: "telemetry";
  t: number;
  ee_pose: PoseDict;
  goal_pose: PoseDict;
  kt: number;
  kr: number;
  ext_force_norm: number;
  phase: string;
  success: boolean;
  stale: boolean;
  peg_pose: PoseDict | null;
  hole_pose: PoseDict | null;
};

export type ServerMessage =
  | Telemetry
  | { type: "haptic"; amplitude: number }
  | { type: "bars"; kt_frac: number; kr_frac: number }
  | { type: "error"; code: string; detail: string };

export const SCALE_MIN = 0.1;
export const SCALE_MAX = 2.0;

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

function finite(v: number, name: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`${name} must be a finite number, got ${v}`);
  }
  return v;
}

/** Clamp and sanity-check an outgoing message; throws rather than sending junk. */
export function sanitizeClient(msg: ClientMessage): ClientMessage {
  switch (msg.type) {
    case "fsr":
      return {
        type: "fsr",
        t: finite(msg.t, "t"),
        pt: clamp(finite(msg.pt, "pt"), 0, 1),
        pr: clamp(finite(msg.pr, "pr"), 0, 1),
      };
    case "scale_set":
      return { type: "scale_set", s: clamp(finite(msg.s, "s"), SCALE_MIN, SCALE_MAX) };
    case "pose_sample": {
      const p = msg.p.map((v, i) => finite(v, `p[${i}]`)) as Vec3;
      const q = msg.q.map((v, i) => finite(v, `q[${i}]`)) as Quat;
      const n = Math.hypot(...q);
      if (n < 1e-9) throw new Error("quaternion has zero norm");
      return { type: "pose_sample", t: finite(msg.t, "t"), p, q: q.map((v) => v / n) as Quat };
    }
    case "gripper_toggle":
    case "teleop_toggle":
      return { type: msg.type };
    default:
      throw new Error(`unknown client message ${(msg as { type: string }).type}`);
  }
}

export function encodeClient(msg: ClientMessage): string {
  return JSON.stringify(sanitizeClient(msg));
}

function asPose(v: unknown, name: string): PoseDict {
  const d = v as PoseDict;
  if (!d || !Array.isArray(d.p) || d.p.length !== 3 || !Array.isArray(d.q) || d.q.length !== 4) {
    throw new Error(`${name} must hold p[3] and q[4]`);
  }
  return { p: d.p.map(Number), q: d.q.map(Number) };
}

function num(obj: Record<string, unknown>, key: string): number {
  const v = obj[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`field ${key} must be a finite number`);
  }
  return v;
}

/** Parse one server frame; throws on anything malformed. */
export function parseServer(frame: string): ServerMessage {
  let obj: Record<string, unknown>;
  try {
    obj = JSON.parse(frame);
  } catch (e) {
    throw new Error(`malformed frame: ${e}`);
  }
  if (typeof obj !== "object" || obj === null) throw new Error("frame is not an object");
  switch (obj.type) {
    case "telemetry":
      return {
        type: "telemetry",
        t: num(obj, "t"),
        ee_pose: asPose(obj.ee_pose, "ee_pose"),
        goal_pose: asPose(obj.goal_pose, "goal_pose"),
        kt: num(obj, "kt"),
        kr: num(obj, "kr"),
        ext_force_norm: num(obj, "ext_force_norm"),
        phase: String(obj.phase),
        success: Boolean(obj.success),
        stale: Boolean(obj.stale),
        peg_pose: obj.peg_pose == null ? null : asPose(obj.peg_pose, "peg_pose"),
        hole_pose: obj.hole_pose == null ? null : asPose(obj.hole_pose, "hole_pose"),
      };
    case "haptic":
      return { type: "haptic", amplitude: clamp(num(obj, "amplitude"), 0, 1) };
    case "bars":
      return {
        type: "bars",
        kt_frac: clamp(num(obj, "kt_frac"), 0, 1),
        kr_frac: clamp(num(obj, "kr_frac"), 0, 1),
      };
    case "error":
      return { type: "error", code: String(obj.code), detail: String(obj.detail ?? "") };
    default:
      throw new Error(`unknown server message type ${String(obj.type)}`);
  }
}
