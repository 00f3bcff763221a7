// Slice-viewport coordinate mapping. The server renders slice pixel (x, y) as
// (first remaining axis, second remaining axis) with pixel (0, 0) at the
// minimum-index corner, so a click maps back to a continuous voxel index and
// from there to world millimetres via the session geometry.

export type Axis = "I" | "J" | "K";

export interface VolumeGeometry {
  dims: [number, number, number];
  spacing: [number, number, number];
  origin: [number, number, number];
  orientation: number[][]; // 3x3, columns are axis directions
}

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export const AXIS_NUMBER: Record<Axis, number> = { I: 0, J: 1, K: 2 };

export function remainingAxes(axis: Axis): [number, number] {
  const a = AXIS_NUMBER[axis];
  const rest = [0, 1, 2].filter((n) => n !== a);
  return [rest[0], rest[1]];
}

export function indexToWorld(geom: VolumeGeometry, ijk: [number, number, number]): Vec3 {
  const s = geom.spacing;
  const m = geom.orientation;
  const scaled = [ijk[0] * s[0], ijk[1] * s[1], ijk[2] * s[2]];
  return {
    x: geom.origin[0] + m[0][0] * scaled[0] + m[0][1] * scaled[1] + m[0][2] * scaled[2],
    y: geom.origin[1] + m[1][0] * scaled[0] + m[1][1] * scaled[1] + m[1][2] * scaled[2],
    z: geom.origin[2] + m[2][0] * scaled[0] + m[2][1] * scaled[1] + m[2][2] * scaled[2],
  };
}

export interface ViewportRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/**
 * Convert a click inside a slice viewport to a continuous voxel index.
 *
 * The displayed image has one pixel per voxel of the slice plane; CSS scaling
 * is undone with the bounding rect. Pixel centres sit at u = i + 0.5 in image
 * coordinates. Returns null for clicks outside the image.
 */
export function clickToIndex(
  geom: VolumeGeometry,
  axis: Axis,
  sliceIndex: number,
  clientX: number,
  clientY: number,
  rect: ViewportRect,
): [number, number, number] | null {
  const [a, b] = remainingAxes(axis);
  const widthPx = geom.dims[a];
  const heightPx = geom.dims[b];
  const u = ((clientX - rect.left) / rect.width) * widthPx;
  const v = ((clientY - rect.top) / rect.height) * heightPx;
  if (u < 0 || v < 0 || u > widthPx || v > heightPx) return null;
  const ijk: [number, number, number] = [0, 0, 0];
  ijk[AXIS_NUMBER[axis]] = sliceIndex;
  ijk[a] = Math.min(Math.max(u - 0.5, 0), widthPx - 1);
  ijk[b] = Math.min(Math.max(v - 0.5, 0), heightPx - 1);
  return ijk;
}

export function clickToWorld(
  geom: VolumeGeometry,
  axis: Axis,
  sliceIndex: number,
  clientX: number,
  clientY: number,
  rect: ViewportRect,
): Vec3 | null {
  const ijk = clickToIndex(geom, axis, sliceIndex, clientX, clientY, rect);
  return ijk === null ? null : indexToWorld(geom, ijk);
}

/** Viewport pixel (CSS coordinates) for a voxel index, for drawing markers. */
export function indexToViewport(
  geom: VolumeGeometry,
  axis: Axis,
  ijk: [number, number, number],
  rect: ViewportRect,
): { x: number; y: number } {
  const [a, b] = remainingAxes(axis);
  return {
    x: ((ijk[a] + 0.5) / geom.dims[a]) * rect.width,
    y: ((ijk[b] + 0.5) / geom.dims[b]) * rect.height,
  };
}
