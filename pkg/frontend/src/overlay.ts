import type { FieldMeta, OverlayFrame } from "./protocol.js";

export interface AcceptedOverlay {
  runId: number;
  scalars: Float32Array;
  range: [number, number];
  meta: FieldMeta;
}

export type OverlayRejection =
  | { kind: "stale"; runId: number }
  | { kind: "count_mismatch"; got: number; want: number }
  | { kind: "no_meta"; runId: number };

/**
 * Pairs field_meta messages with their binary frames and enforces the
 * display rules: the shown overlay always corresponds to the highest
 * run_id received, stale or mismatched frames are dropped, never applied.
 */
export class OverlayTracker {
  displayedRunId = -Infinity;
  private metas = new Map<number, FieldMeta>();
  dropped: OverlayRejection[] = [];

  constructor(readonly vertexCount: number) {}

  offerMeta(meta: FieldMeta): void {
    if (meta.run_id <= this.displayedRunId) {
      this.dropped.push({ kind: "stale", runId: meta.run_id });
      return;
    }
    this.metas.set(meta.run_id, meta);
  }

  offerFrame(frame: OverlayFrame): AcceptedOverlay | null {
    if (frame.runId <= this.displayedRunId) {
      this.dropped.push({ kind: "stale", runId: frame.runId });
      return null;
    }
    const meta = this.metas.get(frame.runId);
    if (!meta) {
      this.dropped.push({ kind: "no_meta", runId: frame.runId });
      return null;
    }
    if (frame.scalars.length !== this.vertexCount) {
      this.dropped.push({
        kind: "count_mismatch",
        got: frame.scalars.length,
        want: this.vertexCount,
      });
      this.metas.delete(frame.runId);
      return null;
    }
    this.displayedRunId = frame.runId;
    // metas at or below the displayed id can never apply anymore
    for (const id of this.metas.keys()) {
      if (id <= frame.runId) this.metas.delete(id);
    }
    return { runId: frame.runId, scalars: frame.scalars, range: meta.range, meta };
  }
}
