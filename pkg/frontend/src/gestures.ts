import { multiply, rotationAbout, translation, type Mat16 } from "./rigid.js";

/**
 * Gesture-to-pose mapping. Plain drags translate the coil across the
 * scalp-tangent plane at its current position; modifier drags spin it
 * about its own axis. Orientation is otherwise left alone, which matches
 * how a clinician nudges a coil without re-seating it.
 */

type Vec3 = [number, number, number];

function norm(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

/** Orthonormal (u, v) basis of the plane orthogonal to ``normal``,
 * with u as close to ``rightHint`` as possible (camera right). */
export function tangentBasis(normal: Vec3, rightHint: Vec3): { u: Vec3; v: Vec3 } {
  const n = norm(normal);
  const dot = rightHint[0] * n[0] + rightHint[1] * n[1] + rightHint[2] * n[2];
  let u: Vec3 = [
    rightHint[0] - dot * n[0],
    rightHint[1] - dot * n[1],
    rightHint[2] - dot * n[2],
  ];
  if (Math.hypot(...u) < 1e-9) u = cross(n, [0, 0, 1]);
  u = norm(u);
  return { u, v: norm(cross(n, u)) };
}

/** Translate a pose by (dx, dy) steps across the tangent plane. */
export function dragTranslate(
  pose: Mat16,
  normal: Vec3,
  rightHint: Vec3,
  dx: number,
  dy: number,
  mmPerStep = 1.0,
): Mat16 {
  const { u, v } = tangentBasis(normal, rightHint);
  const move = translation(
    (dx * u[0] + dy * v[0]) * mmPerStep,
    (dx * u[1] + dy * v[1]) * mmPerStep,
    (dx * u[2] + dy * v[2]) * mmPerStep,
  );
  return multiply(move, pose); // world-frame translation
}

/** Spin the coil about its own axis (local z) by ``angle`` radians. */
export function dragRotate(pose: Mat16, angle: number): Mat16 {
  return multiply(pose, rotationAbout([0, 0, 1], angle));
}
