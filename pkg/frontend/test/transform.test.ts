import { describe, expect, it } from "vitest";

import {
  IDENTITY,
  ViewTransform,
  pan,
  planeToScreen,
  screenToPlane,
  screenToVoxel,
  voxelToScreen,
  zoomAt,
} from "../src/transform";
import { AXES } from "../src/types";

function randomTransform(rand: () => number): ViewTransform {
  return {
    zoom: 0.25 + rand() * 8,
    panX: (rand() - 0.5) * 200,
    panY: (rand() - 0.5) * 200,
  };
}

// deterministic LCG so failures reproduce
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

describe("plane/screen mapping", () => {
  it("identity maps canvas center to the plane center", () => {
    const p = screenToPlane(IDENTITY, 8, 8);
    expect(p).toEqual({ x: 8, y: 8 });
  });

  it("round-trips under zoom 2x with pan (10, 0)", () => {
    const t: ViewTransform = { zoom: 2, panX: 10, panY: 0 };
    const p = screenToPlane(t, 30, 12);
    expect(p).toEqual({ x: 10, y: 6 });
    expect(planeToScreen(t, p.x, p.y)).toEqual({ x: 30, y: 12 });
  });

  it("round-trips for random transforms and positions", () => {
    const rand = lcg(42);
    for (let k = 0; k < 500; k++) {
      const t = randomTransform(rand);
      const sx = rand() * 800;
      const sy = rand() * 800;
      const p = screenToPlane(t, sx, sy);
      const back = planeToScreen(t, p.x, p.y);
      expect(back.x).toBeCloseTo(sx, 9);
      expect(back.y).toBeCloseTo(sy, 9);
    }
  });

  it("zoomAt keeps the anchored screen point fixed", () => {
    const rand = lcg(7);
    for (let k = 0; k < 100; k++) {
      const t = randomTransform(rand);
      const sx = rand() * 800;
      const sy = rand() * 800;
      const before = screenToPlane(t, sx, sy);
      const after = screenToPlane(zoomAt(t, 1.5, sx, sy), sx, sy);
      expect(after.x).toBeCloseTo(before.x, 9);
      expect(after.y).toBeCloseTo(before.y, 9);
    }
  });

  it("pan shifts screen positions by the delta", () => {
    const t = pan({ zoom: 3, panX: 1, panY: 2 }, 5, -4);
    expect(planeToScreen(t, 0, 0)).toEqual({ x: 6, y: -2 });
  });
});

describe("screen/voxel mapping", () => {
  it("maps the canvas center to the middle voxel at identity", () => {
    const v = screenToVoxel(IDENTITY, "z", 5, [16, 16], 8, 8);
    expect(v).toEqual([8, 8, 5]);
  });

  it("fills the slice index on the displayed axis", () => {
    expect(screenToVoxel(IDENTITY, "x", 3, [16, 16], 2, 7)).toEqual([3, 2, 7]);
    expect(screenToVoxel(IDENTITY, "y", 4, [16, 16], 2, 7)).toEqual([2, 4, 7]);
  });

  it("rejects positions outside the slice", () => {
    expect(screenToVoxel(IDENTITY, "z", 0, [16, 16], -1, 5)).toBeNull();
    expect(screenToVoxel(IDENTITY, "z", 0, [16, 16], 16, 5)).toBeNull();
    const t: ViewTransform = { zoom: 2, panX: 10, panY: 0 };
    expect(screenToVoxel(t, "z", 0, [16, 16], 9, 5)).toBeNull(); // left of image
  });

  it("voxel -> screen -> voxel round-trips for random views and axes", () => {
    const rand = lcg(2024);
    for (let k = 0; k < 500; k++) {
      const t = randomTransform(rand);
      const axis = AXES[Math.floor(rand() * 3)]!;
      const voxel: [number, number, number] = [
        Math.floor(rand() * 16),
        Math.floor(rand() * 16),
        Math.floor(rand() * 16),
      ];
      const sliceIndex = voxel[{ x: 0, y: 1, z: 2 }[axis]]!;
      const p = voxelToScreen(t, axis, voxel);
      const back = screenToVoxel(t, axis, sliceIndex, [16, 16], p.x, p.y);
      expect(back).toEqual(voxel);
    }
  });
});
