import { describe, expect, it } from "vitest";

import { meshCenter, meshRadius, parseBinaryStl } from "../src/stl.js";

function craftStl(triangles: number[][][]): ArrayBuffer {
  const buffer = new ArrayBuffer(84 + 50 * triangles.length);
  const view = new DataView(buffer);
  view.setUint32(80, triangles.length, true);
  let offset = 84;
  for (const tri of triangles) {
    for (let c = 0; c < 3; c++) view.setFloat32(offset + 4 * c, 0, true); // normal
    offset += 12;
    for (const vertex of tri) {
      for (let c = 0; c < 3; c++) view.setFloat32(offset + 4 * c, vertex[c], true);
      offset += 12;
    }
    offset += 2;
  }
  return buffer;
}

describe("parseBinaryStl", () => {
  it("parses a crafted facet", () => {
    const mesh = parseBinaryStl(craftStl([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]]));
    expect(mesh.triangleCount).toBe(1);
    expect(Array.from(mesh.positions)).toEqual([0, 0, 0, 1, 0, 0, 0, 1, 0]);
  });

  it("rejects size mismatches", () => {
    const buffer = craftStl([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]]).slice(0, 100);
    expect(() => parseBinaryStl(buffer)).toThrow(/size mismatch|too short/);
  });

  it("computes centre and radius", () => {
    const mesh = parseBinaryStl(craftStl([
      [[-1, 0, 0], [1, 0, 0], [0, 2, 0]],
    ]));
    const center = meshCenter(mesh);
    expect(center[0]).toBeCloseTo(0, 6);
    expect(meshRadius(mesh, center)).toBeGreaterThan(1);
  });
});
