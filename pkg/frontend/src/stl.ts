// Minimal binary STL parser for the 3D preview (80-byte header, uint32 count,
// 50-byte little-endian facets).

export interface StlMesh {
  triangleCount: number;
  positions: Float32Array; // 9 floats per triangle
  normals: Float32Array; // per-vertex (facet normal repeated 3x)
}

export function parseBinaryStl(buffer: ArrayBuffer): StlMesh {
  if (buffer.byteLength < 84) {
    throw new Error("not a binary STL: too short");
  }
  const view = new DataView(buffer);
  const count = view.getUint32(80, true);
  if (buffer.byteLength !== 84 + 50 * count) {
    throw new Error(`binary STL size mismatch: ${buffer.byteLength} bytes for ${count} facets`);
  }
  const positions = new Float32Array(count * 9);
  const normals = new Float32Array(count * 9);
  let offset = 84;
  for (let t = 0; t < count; t++) {
    const nx = view.getFloat32(offset, true);
    const ny = view.getFloat32(offset + 4, true);
    const nz = view.getFloat32(offset + 8, true);
    offset += 12;
    for (let v = 0; v < 3; v++) {
      const base = t * 9 + v * 3;
      positions[base] = view.getFloat32(offset, true);
      positions[base + 1] = view.getFloat32(offset + 4, true);
      positions[base + 2] = view.getFloat32(offset + 8, true);
      normals[base] = nx;
      normals[base + 1] = ny;
      normals[base + 2] = nz;
      offset += 12;
    }
    offset += 2; // attribute byte count
  }
  return { triangleCount: count, positions, normals };
}

export function meshCenter(mesh: StlMesh): [number, number, number] {
  const c: [number, number, number] = [0, 0, 0];
  const n = mesh.positions.length / 3;
  for (let i = 0; i < mesh.positions.length; i += 3) {
    c[0] += mesh.positions[i];
    c[1] += mesh.positions[i + 1];
    c[2] += mesh.positions[i + 2];
  }
  return [c[0] / n, c[1] / n, c[2] / n];
}

export function meshRadius(mesh: StlMesh, center: [number, number, number]): number {
  let worst = 0;
  for (let i = 0; i < mesh.positions.length; i += 3) {
    const dx = mesh.positions[i] - center[0];
    const dy = mesh.positions[i + 1] - center[1];
    const dz = mesh.positions[i + 2] - center[2];
    worst = Math.max(worst, Math.hypot(dx, dy, dz));
  }
  return worst;
}
