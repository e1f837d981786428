import type { Mat16 } from "./rigid.js";

/** Wire schema spoken with the field server over the WebSocket. */

export type ColormapStop = [number, [number, number, number]];

export interface SceneMsg {
  type: "scene";
  mesh_url: string;
  coil_url?: string;
  colormap: { range: [number, number] | null; stops: ColormapStop[] };
  dims: [number, number, number];
  vertex_count: number;
  units?: string;
}

export interface FieldMeta {
  type: "field_meta";
  run_id: number;
  dims: [number, number, number];
  range: [number, number];
  compute_s: number;
  vis_s: number;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = SceneMsg | FieldMeta | ErrorMsg | { type: string };

export function parseServerText(text: string): ServerMsg | null {
  try {
    const obj = JSON.parse(text);
    if (obj && typeof obj.type === "string") return obj as ServerMsg;
  } catch {
    /* fall through */
  }
  return null;
}

export interface OverlayFrame {
  runId: number;
  scalars: Float32Array;
}

/** Binary overlay frame: u32 LE run_id + float32 LE per-vertex scalars. */
export function decodeOverlayFrame(buf: ArrayBuffer): OverlayFrame | null {
  if (buf.byteLength < 4 || (buf.byteLength - 4) % 4 !== 0) return null;
  const view = new DataView(buf);
  const runId = view.getUint32(0, true);
  const scalars = new Float32Array(buf.slice(4));
  return { runId, scalars };
}

export function encodePoseMsg(matrix: Mat16): string {
  return JSON.stringify({ type: "pose", matrix });
}
