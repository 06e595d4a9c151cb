import { Point } from "./schema.js";

export interface OverlayStyle {
  curveColor: string;
  editColor: string;
  fillAlpha: number;
  vertexRadius: number;
}

export const DEFAULT_STYLE: OverlayStyle = {
  curveColor: "#27e07d",
  editColor: "#ffb020",
  fillAlpha: 0.22,
  vertexRadius: 3,
};

/** Draw a closed (or in-progress) polygon onto a canvas at 1:1 pixel scale. */
export function drawCurve(
  ctx: CanvasRenderingContext2D,
  vertices: Point[],
  closed: boolean,
  editing: boolean,
  style: OverlayStyle = DEFAULT_STYLE,
  fill = true,
): void {
  if (vertices.length === 0) return;
  const color = editing ? style.editColor : style.curveColor;
  ctx.save();
  ctx.beginPath();
  ctx.moveTo(vertices[0][0] + 0.5, vertices[0][1] + 0.5);
  for (let i = 1; i < vertices.length; i++) {
    ctx.lineTo(vertices[i][0] + 0.5, vertices[i][1] + 0.5);
  }
  if (closed) ctx.closePath();
  if (closed && fill) {
    ctx.fillStyle = color;
    ctx.globalAlpha = style.fillAlpha;
    ctx.fill("evenodd");
    ctx.globalAlpha = 1.0;
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.stroke();
  ctx.fillStyle = color;
  for (const [x, y] of vertices) {
    ctx.beginPath();
    ctx.arc(x + 0.5, y + 0.5, style.vertexRadius, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.restore();
}

export function drawLandmarks(
  ctx: CanvasRenderingContext2D,
  landmarks: Point[],
  size = 10,
): void {
  ctx.save();
  ctx.strokeStyle = "#ff8833";
  ctx.lineWidth = 1;
  for (const [x, y] of landmarks) {
    ctx.strokeRect(x - size / 2 + 0.5, y - size / 2 + 0.5, size, size);
  }
  ctx.restore();
}

export function highlightEdges(
  ctx: CanvasRenderingContext2D,
  vertices: Point[],
  edges: [number, number],
): void {
  ctx.save();
  ctx.strokeStyle = "#ff3344";
  ctx.lineWidth = 2.5;
  for (const e of edges) {
    const a = vertices[e];
    const b = vertices[(e + 1) % vertices.length];
    ctx.beginPath();
    ctx.moveTo(a[0] + 0.5, a[1] + 0.5);
    ctx.lineTo(b[0] + 0.5, b[1] + 0.5);
    ctx.stroke();
  }
  ctx.restore();
}
