// Schematic scene painter: boxes and frames, not photographs. Two fixed
// viewpoints mirror the two feedback cameras: a workspace side view and a
// tool-centric close-up that follows the end-effector.

import type { PoseDict, Telemetry } from "./protocol.js";

export type Viewpoint = "workspace" | "tool";

type Vec3 = [number, number, number];

function rotColumns(q: number[]): [Vec3, Vec3, Vec3] {
  const [w, x, y, z] = q;
  return [
    [1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)],
    [2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)],
    [2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)],
  ];
}

interface Frame2D {
  // world (y, z) -> canvas pixels
  toX(y: number): number;
  toY(z: number): number;
  scale: number;
}

function makeFrame(ctx: CanvasRenderingContext2D, view: Viewpoint, focus: PoseDict | null): Frame2D {
  const wpx = ctx.canvas.width;
  const hpx = ctx.canvas.height;
  if (view === "tool" && focus) {
    const scale = wpx / 0.5; // half-meter window around the tool
    const cy = focus.p[1];
    const cz = focus.p[2];
    return {
      toX: (y) => (y - cy) * scale + wpx / 2,
      toY: (z) => hpx / 2 - (z - cz) * scale,
      scale,
    };
  }
  const scale = wpx / 1.2; // world y in [-0.6, 0.6]
  return {
    toX: (y) => (y + 0.6) * scale,
    toY: (z) => hpx - 20 - z * scale,
    scale,
  };
}

function drawBox(
  ctx: CanvasRenderingContext2D,
  f: Frame2D,
  pose: PoseDict,
  widthM: number,
  lengthM: number,
  color: string,
  fill = false,
): void {
  const cols = rotColumns(pose.q);
  const axisY = cols[2][1];
  const axisZ = cols[2][2];
  const angle = Math.atan2(axisY, axisZ); // long-axis tilt in the (y, z) plane
  ctx.save();
  ctx.translate(f.toX(pose.p[1]), f.toY(pose.p[2]));
  ctx.rotate(angle);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  const w = widthM * f.scale;
  const l = lengthM * f.scale;
  if (fill) {
    ctx.fillStyle = color;
    ctx.globalAlpha = 0.25;
    ctx.fillRect(-w / 2, -l / 2, w, l);
    ctx.globalAlpha = 1.0;
  }
  ctx.strokeRect(-w / 2, -l / 2, w, l);
  ctx.restore();
}

function drawCross(ctx: CanvasRenderingContext2D, f: Frame2D, pose: PoseDict, color: string, r = 6): void {
  const x = f.toX(pose.p[1]);
  const y = f.toY(pose.p[2]);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x - r, y);
  ctx.lineTo(x + r, y);
  ctx.moveTo(x, y - r);
  ctx.lineTo(x, y + r);
  ctx.stroke();
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  telemetry: Telemetry | null,
  view: Viewpoint,
  greyed: boolean,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);
  if (!telemetry) {
    ctx.fillStyle = "#667";
    ctx.fillText("no telemetry", 12, 20);
    return;
  }
  const f = makeFrame(ctx, view, telemetry.ee_pose);

  // table plane
  ctx.strokeStyle = "#3a4352";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, f.toY(0));
  ctx.lineTo(width, f.toY(0));
  ctx.stroke();

  if (telemetry.hole_pose) {
    // pocket outline: mouth at the pose origin, walls straight down
    const hp = telemetry.hole_pose;
    const mouthX = f.toX(hp.p[1]);
    const mouthY = f.toY(hp.p[2]);
    const half = 0.028 * f.scale;
    const depth = 0.15 * f.scale;
    ctx.strokeStyle = "#d9a441";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(mouthX - 2.4 * half, mouthY);
    ctx.lineTo(mouthX - half, mouthY);
    ctx.lineTo(mouthX - half, mouthY + depth);
    ctx.lineTo(mouthX + half, mouthY + depth);
    ctx.lineTo(mouthX + half, mouthY);
    ctx.lineTo(mouthX + 2.4 * half, mouthY);
    ctx.stroke();
  }
  if (telemetry.peg_pose) {
    drawBox(ctx, f, telemetry.peg_pose, 0.05, 0.15, "#5fb3f0", true);
  }
  drawCross(ctx, f, telemetry.goal_pose, "#f2e26b", 8);
  drawCross(ctx, f, telemetry.ee_pose, "#7ef29b", 8);

  // force cue ring around the tool, radius follows the measured force
  const forceR = 10 + Math.min(1, telemetry.ext_force_norm / 30) * 18;
  ctx.strokeStyle = "#f25f5f";
  ctx.beginPath();
  ctx.arc(f.toX(telemetry.ee_pose.p[1]), f.toY(telemetry.ee_pose.p[2]), forceR, 0, 2 * Math.PI);
  ctx.stroke();

  if (greyed) {
    ctx.fillStyle = "rgba(16, 20, 26, 0.75)";
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#99a";
    ctx.fillText("STALE", width / 2 - 18, height / 2);
  }
}
