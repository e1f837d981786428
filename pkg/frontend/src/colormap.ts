import type { ColormapStop } from "./protocol.js";

/** Default two-segment blue -> yellow -> red ramp (matches the server). */
export const DEFAULT_STOPS: ColormapStop[] = [
  [0.0, [0, 0, 255]],
  [0.5, [255, 255, 0]],
  [1.0, [255, 0, 0]],
];

function lerpStops(stops: ColormapStop[], t: number): [number, number, number] {
  if (t <= stops[0][0]) return stops[0][1];
  for (let i = 1; i < stops.length; i++) {
    const [t1, c1] = stops[i];
    if (t <= t1) {
      const [t0, c0] = stops[i - 1];
      const f = (t - t0) / (t1 - t0);
      return [
        c0[0] + f * (c1[0] - c0[0]),
        c0[1] + f * (c1[1] - c0[1]),
        c0[2] + f * (c1[2] - c0[2]),
      ];
    }
  }
  return stops[stops.length - 1][1];
}

/**
 * Map scalars to normalized RGB triples for vertex colors: clamp to range,
 * normalize, interpolate the ramp. NaN takes the first ramp color.
 */
export function applyColormap(
  values: Float32Array,
  range: [number, number],
  stops: ColormapStop[] = DEFAULT_STOPS,
  out?: Float32Array,
): Float32Array {
  const [lo, hi] = range;
  const span = hi - lo || 1;
  const colors = out ?? new Float32Array(values.length * 3);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    const t = Number.isNaN(v) ? 0 : Math.min(1, Math.max(0, (v - lo) / span));
    const [r, g, b] = lerpStops(stops, t);
    colors[i * 3] = r / 255;
    colors[i * 3 + 1] = g / 255;
    colors[i * 3 + 2] = b / 255;
  }
  return colors;
}

export interface LegendModel {
  minLabel: string;
  maxLabel: string;
  units: string;
  gradientCss: string;
}

/** Legend endpoints always equal the configured range, never the data. */
export function legendModel(
  range: [number, number],
  stops: ColormapStop[] = DEFAULT_STOPS,
  units = "V/m",
): LegendModel {
  const css = stops
    .map(([t, [r, g, b]]) => `rgb(${r},${g},${b}) ${(t * 100).toFixed(0)}%`)
    .join(", ");
  return {
    minLabel: `${range[0].toPrecision(3)}`,
    maxLabel: `${range[1].toPrecision(3)}`,
    units,
    gradientCss: `linear-gradient(to top, ${css})`,
  };
}
