import { Axis, AXIS_INDEX, PLANE_AXES } from "./types";

/**
 * Screen-to-plane mapping for the slice canvas.
 *
 * Plane coordinates are continuous voxel units within the current slice;
 * screen = pan + plane * zoom. Voxel indices come from flooring the plane
 * coordinate, so voxel (i, j) owns the half-open square [i, i+1) x [j, j+1).
 */
export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export const IDENTITY: ViewTransform = { zoom: 1, panX: 0, panY: 0 };

export function planeToScreen(t: ViewTransform, px: number, py: number) {
  return { x: t.panX + px * t.zoom, y: t.panY + py * t.zoom };
}

export function screenToPlane(t: ViewTransform, sx: number, sy: number) {
  return { x: (sx - t.panX) / t.zoom, y: (sy - t.panY) / t.zoom };
}

/** Zoom about a fixed screen point so the content under it stays put. */
export function zoomAt(t: ViewTransform, factor: number, sx: number, sy: number): ViewTransform {
  const zoom = t.zoom * factor;
  return {
    zoom,
    panX: sx - (sx - t.panX) * factor,
    panY: sy - (sy - t.panY) * factor,
  };
}

export function pan(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { zoom: t.zoom, panX: t.panX + dx, panY: t.panY + dy };
}

/**
 * Map a screen position on the canvas to a voxel coordinate, or null when
 * the position falls outside the slice. `sliceIndex` fills the axis
 * perpendicular to the displayed plane.
 */
export function screenToVoxel(
  t: ViewTransform,
  axis: Axis,
  sliceIndex: number,
  planeDims: [number, number],
  sx: number,
  sy: number
): [number, number, number] | null {
  const p = screenToPlane(t, sx, sy);
  const i = Math.floor(p.x);
  const j = Math.floor(p.y);
  if (i < 0 || j < 0 || i >= planeDims[0] || j >= planeDims[1]) return null;
  const voxel: [number, number, number] = [0, 0, 0];
  const [a, b] = PLANE_AXES[axis];
  voxel[a] = i;
  voxel[b] = j;
  voxel[AXIS_INDEX[axis]] = sliceIndex;
  return voxel;
}

/** Screen position of a voxel's center, for drawing click markers. */
export function voxelToScreen(
  t: ViewTransform,
  axis: Axis,
  voxel: [number, number, number]
) {
  const [a, b] = PLANE_AXES[axis];
  return planeToScreen(t, voxel[a]! + 0.5, voxel[b]! + 0.5);
}

/** Whether a voxel lies on the displayed slice. */
export function onSlice(axis: Axis, sliceIndex: number, voxel: [number, number, number]): boolean {
  return voxel[AXIS_INDEX[axis]] === sliceIndex;
}
