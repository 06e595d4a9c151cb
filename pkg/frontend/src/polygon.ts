import { CurveDocument, Point } from "./schema.js";

/** Exact integer orientation sign of (q-p) x (r-p). */
function orient(p: Point, q: Point, r: Point): number {
  const v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  return v > 0 ? 1 : v < 0 ? -1 : 0;
}

function onSegment(p: Point, q: Point, r: Point): boolean {
  return (
    Math.min(p[0], q[0]) <= r[0] && r[0] <= Math.max(p[0], q[0]) &&
    Math.min(p[1], q[1]) <= r[1] && r[1] <= Math.max(p[1], q[1])
  );
}

export function segmentsIntersect(p1: Point, q1: Point, p2: Point, q2: Point): boolean {
  const o1 = orient(p1, q1, p2);
  const o2 = orient(p1, q1, q2);
  const o3 = orient(p2, q2, p1);
  const o4 = orient(p2, q2, q1);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(p1, q1, p2)) return true;
  if (o2 === 0 && onSegment(p1, q1, q2)) return true;
  if (o3 === 0 && onSegment(p2, q2, p1)) return true;
  if (o4 === 0 && onSegment(p2, q2, q1)) return true;
  return false;
}

/** Indices [i, j] of the first crossing edge pair, or null if simple. */
export function findCrossing(vertices: Point[]): [number, number] | null {
  const n = vertices.length;
  for (let i = 0; i < n; i++) {
    const a1 = vertices[i];
    const b1 = vertices[(i + 1) % n];
    if (a1[0] === b1[0] && a1[1] === b1[1]) return [i, (i + 1) % n];
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      if (segmentsIntersect(a1, b1, vertices[j], vertices[(j + 1) % n])) {
        return [i, j];
      }
    }
  }
  // doubled-back adjacent edges (spikes)
  for (let i = 0; i < n; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % n];
    const c = vertices[(i + 2) % n];
    const collinear = orient(a, b, c) === 0;
    const back = (a[0] - b[0]) * (c[0] - b[0]) + (a[1] - b[1]) * (c[1] - b[1]) > 0;
    if (collinear && back) return [i, (i + 1) % n];
  }
  return null;
}

export function polygonIsSimple(vertices: Point[]): boolean {
  return vertices.length >= 3 && findCrossing(vertices) === null;
}

export type EditorEvent =
  | { kind: "added"; index: number }
  | { kind: "closed" }
  | { kind: "rejected"; reason: string; crossing?: [number, number] }
  | { kind: "moved"; index: number };

/**
 * Click-to-add polygon editor with integer-pixel snapping. Click the first
 * vertex (or call close()) to close; closing with fewer than 3 vertices or a
 * self-crossing outline is rejected with the offending edge pair.
 */
export class PolygonEditor {
  vertices: Point[] = [];
  closed = false;

  constructor(
    readonly width: number,
    readonly height: number,
    readonly closeRadius: number = 8,
  ) {}

  private clamp(x: number, y: number): Point {
    return [
      Math.min(Math.max(Math.round(x), 0), this.width - 1),
      Math.min(Math.max(Math.round(y), 0), this.height - 1),
    ];
  }

  addPoint(x: number, y: number): EditorEvent {
    if (this.closed) return { kind: "rejected", reason: "already closed" };
    const p = this.clamp(x, y);
    if (this.vertices.length >= 3) {
      const first = this.vertices[0];
      const d = Math.hypot(p[0] - first[0], p[1] - first[1]);
      if (d <= this.closeRadius) return this.close();
    }
    const last = this.vertices[this.vertices.length - 1];
    if (last && last[0] === p[0] && last[1] === p[1]) {
      return { kind: "rejected", reason: "duplicate vertex" };
    }
    this.vertices.push(p);
    return { kind: "added", index: this.vertices.length - 1 };
  }

  close(): EditorEvent {
    if (this.closed) return { kind: "rejected", reason: "already closed" };
    if (this.vertices.length < 3) {
      return { kind: "rejected", reason: "need at least 3 vertices" };
    }
    const crossing = findCrossing(this.vertices);
    if (crossing !== null) {
      return {
        kind: "rejected",
        reason: "self-crossing outline",
        crossing,
      };
    }
    this.closed = true;
    return { kind: "closed" };
  }

  dragVertex(index: number, x: number, y: number): EditorEvent {
    if (index < 0 || index >= this.vertices.length) {
      return { kind: "rejected", reason: "no such vertex" };
    }
    const old = this.vertices[index];
    this.vertices[index] = this.clamp(x, y);
    if (this.closed && findCrossing(this.vertices) !== null) {
      this.vertices[index] = old;
      return { kind: "rejected", reason: "move would self-cross" };
    }
    return { kind: "moved", index };
  }

  reset(): void {
    this.vertices = [];
    this.closed = false;
  }

  loadClosed(vertices: Point[]): void {
    this.vertices = vertices.map((v) => this.clamp(v[0], v[1]));
    this.closed = true;
  }

  toDocument(frameIndex: number): CurveDocument {
    if (!this.closed) throw new Error("polygon not closed");
    return {
      frame_index: frameIndex,
      vertices: this.vertices.map((v) => [v[0], v[1]] as Point),
    };
  }
}
