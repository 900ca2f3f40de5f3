import { describe, expect, it } from "vitest";
import { computeBars } from "../src/render/bars.js";
import { cellsFromOccupied, indexToCell, projectCells } from "../src/render/voxels.js";
import { PosteriorMsg } from "../src/protocol.js";

function frame(smoothed: number[], probs?: number[]): PosteriorMsg {
  return { type: "posterior", seq: 0, smoothed, probs: probs ?? smoothed, paused: false };
}

describe("computeBars", () => {
  it("gives four equal bars for a uniform frame", () => {
    const bars = computeBars(frame([0.25, 0.25, 0.25, 0.25]));
    expect(bars.map((b) => b.label)).toEqual(["cube", "pyramid", "torus", "union"]);
    for (const b of bars) expect(b.smoothed).toBe(0.25);
    expect(bars.reduce((s, b) => s + b.smoothed, 0)).toBeCloseTo(1, 10);
  });

  it("gives a single full bar for a one-hot frame", () => {
    const bars = computeBars(frame([0, 0, 1, 0]));
    expect(bars[2].smoothed).toBe(1);
    expect(bars[0].smoothed + bars[1].smoothed + bars[3].smoothed).toBe(0);
  });

  it("carries raw probabilities separately from smoothed", () => {
    const bars = computeBars(frame([0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1]));
    expect(bars[0].raw).toBe(0.7);
    expect(bars[0].smoothed).toBe(0.25);
  });
});

describe("indexToCell", () => {
  it("matches x*n*n + y*n + z ordering", () => {
    const n = 4;
    for (let x = 0; x < n; x++)
      for (let y = 0; y < n; y++)
        for (let z = 0; z < n; z++) {
          expect(indexToCell(x * n * n + y * n + z, n)).toEqual({ x, y, z });
        }
  });

  it("rejects out-of-range and non-integer indices", () => {
    expect(indexToCell(64, 4)).toBeNull();
    expect(indexToCell(-1, 4)).toBeNull();
    expect(indexToCell(2.5, 4)).toBeNull();
  });
});

describe("cellsFromOccupied", () => {
  it("decodes a whole frame or rejects it atomically", () => {
    expect(cellsFromOccupied([0, 63], 4)).toHaveLength(2);
    expect(cellsFromOccupied([0, 64], 4)).toBeNull();
    expect(cellsFromOccupied([], 4)).toEqual([]);
  });
});

describe("projectCells", () => {
  it("returns one point per cell, sorted far to near", () => {
    const cells = cellsFromOccupied([0, 21, 42, 63], 4)!;
    const pts = projectCells(cells, 4, 0.7, 0.4);
    expect(pts).toHaveLength(4);
    for (let i = 1; i < pts.length; i++) expect(pts[i].depth).toBeGreaterThanOrEqual(pts[i - 1].depth);
  });

  it("keeps the grid center at the view center for any orbit angle", () => {
    const n = 5;
    const center = { x: 2, y: 2, z: 2 };
    for (const [yaw, pitch] of [[0, 0], [1.1, 0.3], [-2.5, 1.2]]) {
      const [p] = projectCells([center], n, yaw, pitch);
      expect(p.sx).toBeCloseTo(0, 12);
      expect(p.sy).toBeCloseTo(0, 12);
    }
  });

  it("preserves pairwise distances under orbiting (rigid rotation)", () => {
    const cells = cellsFromOccupied([0, 1, 2, 3, 4, 5], 6)!;
    const maxDist = (pts: { sx: number; sy: number }[]) => {
      let best = 0;
      for (const a of pts)
        for (const b of pts) best = Math.max(best, (a.sx - b.sx) ** 2 + (a.sy - b.sy) ** 2);
      return best;
    };
    // Top-down view (pitch = 90°): orbiting in yaw is an in-plane rotation.
    const base = projectCells(cells, 6, 0, Math.PI / 2);
    const rotated = projectCells(cells, 6, 1.3, Math.PI / 2);
    expect(maxDist(base)).toBeCloseTo(maxDist(rotated), 10);
  });
});
