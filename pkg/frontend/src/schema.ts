export type Point = [number, number];

export interface CurveDocument {
  frame_index: number;
  vertices: Point[];
}

export interface Meta {
  frame_count: number;
  width: number;
  height: number;
}

export interface EnergyDoc {
  e_curve: number;
  e_land: number;
  e_joint: number;
  total: number;
}

export interface ResultDoc {
  frame_index: number;
  curve: CurveDocument;
  document: string;
  energy: EnergyDoc | null;
  iou: number | null;
  flags?: string[];
  landmarks?: Point[];
  is_keyframe?: boolean;
}

export interface Progress {
  running: boolean;
  done_upto: number;
  total: number | null;
  job_id: string | null;
  error: string | null;
}

export function isValidCurveDocument(doc: unknown): doc is CurveDocument {
  if (typeof doc !== "object" || doc === null) return false;
  const d = doc as Record<string, unknown>;
  if (!Number.isInteger(d.frame_index as number)) return false;
  if (!Array.isArray(d.vertices) || d.vertices.length < 3) return false;
  for (const v of d.vertices) {
    if (!Array.isArray(v) || v.length !== 2) return false;
    if (!Number.isInteger(v[0]) || !Number.isInteger(v[1])) return false;
  }
  return true;
}
