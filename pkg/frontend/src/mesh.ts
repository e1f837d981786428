/**
 * Compact mesh transport: the server serializes its deduplicated vertex
 * array and triangle indices directly, so per-vertex overlay scalars line
 * up with vertices by construction (re-deduplicating an STL client-side
 * could reorder them).
 *
 * Layout, little-endian:
 *   magic "NVMESH01" | u32 n_vertices | u32 n_triangles
 *   | float32 positions (n*3) | uint32 indices (m*3)
 */

export interface MeshData {
  positions: Float32Array;
  indices: Uint32Array;
}

export const MESH_MAGIC = "NVMESH01";

export function decodeMeshBinary(buf: ArrayBuffer): MeshData | null {
  if (buf.byteLength < 16) return null;
  const magic = new TextDecoder().decode(new Uint8Array(buf, 0, 8));
  if (magic !== MESH_MAGIC) return null;
  const view = new DataView(buf);
  const nVerts = view.getUint32(8, true);
  const nTris = view.getUint32(12, true);
  const want = 16 + nVerts * 12 + nTris * 12;
  if (buf.byteLength !== want) return null;
  const positions = new Float32Array(buf.slice(16, 16 + nVerts * 12));
  const indices = new Uint32Array(buf.slice(16 + nVerts * 12));
  for (let i = 0; i < indices.length; i++) {
    if (indices[i] >= nVerts) return null;
  }
  return { positions, indices };
}

export function encodeMeshBinary(mesh: MeshData): ArrayBuffer {
  const nVerts = mesh.positions.length / 3;
  const nTris = mesh.indices.length / 3;
  const buf = new ArrayBuffer(16 + mesh.positions.byteLength + mesh.indices.byteLength);
  new Uint8Array(buf, 0, 8).set(new TextEncoder().encode(MESH_MAGIC));
  const view = new DataView(buf);
  view.setUint32(8, nVerts, true);
  view.setUint32(12, nTris, true);
  new Float32Array(buf, 16, nVerts * 3).set(mesh.positions);
  new Uint32Array(buf, 16 + nVerts * 12, nTris * 3).set(mesh.indices);
  return buf;
}
