/** 4x4 homogeneous transforms stored as 16 numbers, row-major. */

export type Mat16 = number[];

export const IDENTITY: Mat16 = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1];

export interface RigidCheck {
  ok: boolean;
  reason?: string;
  residual: number;
}

/**
 * Client-side rigidity check, mirroring the server's ingestion tolerance:
 * the 3x3 block must be orthonormal within 1e-3 per entry with positive
 * determinant, and the bottom row must be (0,0,0,1).
 */
export function checkRigid(m: Mat16, tol = 1e-3): RigidCheck {
  if (m.length !== 16 || m.some((v) => !Number.isFinite(v))) {
    return { ok: false, reason: "needs 16 finite numbers", residual: Infinity };
  }
  const bottom = [m[12], m[13], m[14], m[15]];
  const want = [0, 0, 0, 1];
  for (let i = 0; i < 4; i++) {
    if (Math.abs(bottom[i] - want[i]) > 1e-9) {
      return { ok: false, reason: "bottom row must be 0 0 0 1", residual: Infinity };
    }
  }
  // residual = max |R^T R - I|
  let residual = 0;
  for (let a = 0; a < 3; a++) {
    for (let b = 0; b < 3; b++) {
      let dot = 0;
      for (let k = 0; k < 3; k++) dot += m[k * 4 + a] * m[k * 4 + b];
      residual = Math.max(residual, Math.abs(dot - (a === b ? 1 : 0)));
    }
  }
  if (residual > tol) {
    return { ok: false, reason: `not orthonormal (residual ${residual.toExponential(1)})`, residual };
  }
  const det =
    m[0] * (m[5] * m[10] - m[6] * m[9]) -
    m[1] * (m[4] * m[10] - m[6] * m[8]) +
    m[2] * (m[4] * m[9] - m[5] * m[8]);
  if (det <= 0) {
    return { ok: false, reason: "reflection (determinant <= 0)", residual };
  }
  return { ok: true, residual };
}

export function multiply(a: Mat16, b: Mat16): Mat16 {
  const out = new Array<number>(16).fill(0);
  for (let r = 0; r < 4; r++) {
    for (let c = 0; c < 4; c++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[r * 4 + k] * b[k * 4 + c];
      out[r * 4 + c] = s;
    }
  }
  return out;
}

export function translation(x: number, y: number, z: number): Mat16 {
  return [1, 0, 0, x, 0, 1, 0, y, 0, 0, 1, z, 0, 0, 0, 1];
}

/** Rotation about a unit axis (Rodrigues), as a full 4x4. */
export function rotationAbout(axis: [number, number, number], angle: number): Mat16 {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  const [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const cc = 1 - c;
  return [
    c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s, 0,
    y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s, 0,
    z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc, 0,
    0, 0, 0, 1,
  ];
}

export function parseMatrixText(text: string): Mat16 | null {
  const nums = text
    .trim()
    .split(/[\s,;]+/)
    .filter((t) => t.length)
    .map(Number);
  if (nums.length !== 16 || nums.some((v) => !Number.isFinite(v))) return null;
  return nums;
}

export function formatMatrix(m: Mat16): string {
  const rows: string[] = [];
  for (let r = 0; r < 4; r++) {
    rows.push(m.slice(r * 4, r * 4 + 4).map((v) => v.toFixed(6)).join(" "));
  }
  return rows.join("\n");
}
