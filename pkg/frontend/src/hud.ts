import type { FieldMeta } from "./protocol.js";

export interface HudView {
  lastCompute: string;
  lastVis: string;
  meanCompute: string;
  meanVis: string;
  runs: number;
}

const DASH = "--";

/** Last-run stage timings plus a rolling mean, mirroring the benchmark
 * statistic live. */
export class LatencyHud {
  private computeS: number[] = [];
  private visS: number[] = [];

  constructor(readonly window = 50) {}

  push(meta: FieldMeta): void {
    this.computeS.push(meta.compute_s);
    this.visS.push(meta.vis_s);
    if (this.computeS.length > this.window) {
      this.computeS.shift();
      this.visS.shift();
    }
  }

  get runs(): number {
    return this.computeS.length;
  }

  rollingMean(): { compute: number; vis: number } | null {
    if (!this.computeS.length) return null;
    const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
    return { compute: mean(this.computeS), vis: mean(this.visS) };
  }

  view(): HudView {
    const n = this.computeS.length;
    if (!n) {
      return { lastCompute: DASH, lastVis: DASH, meanCompute: DASH, meanVis: DASH, runs: 0 };
    }
    const fmt = (s: number) => `${(s * 1000).toFixed(1)} ms`;
    const mean = this.rollingMean()!;
    return {
      lastCompute: fmt(this.computeS[n - 1]),
      lastVis: fmt(this.visS[n - 1]),
      meanCompute: fmt(mean.compute),
      meanVis: fmt(mean.vis),
      runs: n,
    };
  }
}
