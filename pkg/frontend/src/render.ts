/**
 * Canvas 2D renderer: joint spheres plus bone segments, no mesh skinning.
 * Spheres are drawn as depth-scaled discs; a ground grid anchors the room.
 */

import { projectPoint, type OrbitCamera, type Projected } from "./camera.js";
import { BONES } from "./skeleton.js";
import type { SkeletonFigure } from "./scene.js";

const BACKGROUND = "#10141c";
const GRID_COLOR = "#26314a";
const GRID_Y = -0.95;
const JOINT_RADIUS_M = 0.04;
const STALE_ALPHA = 0.35;

function drawGrid(ctx: CanvasRenderingContext2D, cam: OrbitCamera, w: number, h: number): void {
  ctx.strokeStyle = GRID_COLOR;
  ctx.lineWidth = 1;
  for (let i = -4; i <= 4; i++) {
    strokeSegment(ctx, cam, w, h, [i, GRID_Y, 0], [i, GRID_Y, 8]);
    strokeSegment(ctx, cam, w, h, [-4, GRID_Y, i + 4], [4, GRID_Y, i + 4]);
  }
}

function strokeSegment(
  ctx: CanvasRenderingContext2D,
  cam: OrbitCamera,
  w: number,
  h: number,
  a: ReadonlyArray<number>,
  b: ReadonlyArray<number>,
): void {
  const pa = projectPoint(cam, a, w, h);
  const pb = projectPoint(cam, b, w, h);
  if (pa === null || pb === null) return;
  ctx.beginPath();
  ctx.moveTo(pa.x, pa.y);
  ctx.lineTo(pb.x, pb.y);
  ctx.stroke();
}

function meanDepth(points: Array<Projected | null>): number {
  let sum = 0;
  let n = 0;
  for (const p of points) {
    if (p !== null) {
      sum += p.depth;
      n += 1;
    }
  }
  return n > 0 ? sum / n : Infinity;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  figures: SkeletonFigure[],
  cam: OrbitCamera,
  width: number,
  height: number,
): void {
  ctx.save();
  ctx.fillStyle = BACKGROUND;
  ctx.fillRect(0, 0, width, height);
  drawGrid(ctx, cam, width, height);

  const focal = height / 2 / Math.tan(cam.fovY / 2);
  const projected = figures.map((fig) => ({
    fig,
    points: fig.joints.map((j) => projectPoint(cam, j, width, height)),
  }));
  // painter's order: far figures first
  projected.sort((a, b) => meanDepth(b.points) - meanDepth(a.points));

  for (const { fig, points } of projected) {
    ctx.globalAlpha = fig.translucent ? STALE_ALPHA : 1.0;
    ctx.strokeStyle = fig.color;
    ctx.fillStyle = fig.color;
    ctx.lineWidth = 2;
    for (const [child, parent] of BONES) {
      const pc = points[child];
      const pp = points[parent];
      if (pc === null || pp === null) continue;
      ctx.beginPath();
      ctx.moveTo(pc.x, pc.y);
      ctx.lineTo(pp.x, pp.y);
      ctx.stroke();
    }
    for (const p of points) {
      if (p === null) continue;
      const r = Math.min(12, Math.max(1.5, (focal * JOINT_RADIUS_M) / p.depth));
      ctx.beginPath();
      ctx.arc(p.x, p.y, r, 0, Math.PI * 2);
      ctx.fill();
    }
  }
  ctx.restore();
}
