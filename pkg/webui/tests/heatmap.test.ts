import { describe, expect, it } from "vitest";

import {
  BASE_COLOR,
  FULL_COLOR,
  binaryColors,
  blankColors,
  heatmapColors,
} from "../src/heatmap";

function expectColor(got: Float32Array, want: readonly [number, number, number]): void {
  for (let k = 0; k < 3; k++) expect(got[k]).toBeCloseTo(want[k], 6);
}

describe("heatmapColors", () => {
  it("maps 0 to white and 1 to blue, linearly between", () => {
    const colors = heatmapColors([0, 1, 0.5]);
    expectColor(colors.slice(0, 3), BASE_COLOR);
    expectColor(colors.slice(3, 6), FULL_COLOR);
    for (let k = 0; k < 3; k++) {
      expect(colors[6 + k]).toBeCloseTo((BASE_COLOR[k] + FULL_COLOR[k]) / 2, 6);
    }
  });

  it("clamps out-of-range and non-finite probabilities", () => {
    const colors = heatmapColors([-0.5, 1.5, NaN]);
    expectColor(colors.slice(0, 3), BASE_COLOR);
    expectColor(colors.slice(3, 6), FULL_COLOR);
    expectColor(colors.slice(6, 9), BASE_COLOR);
  });

  it("reuses a provided output buffer", () => {
    const buf = new Float32Array(6);
    const out = heatmapColors([0.2, 0.8], buf);
    expect(out).toBe(buf);
  });
});

describe("binaryColors", () => {
  it("splits at the threshold inclusively", () => {
    const colors = binaryColors([0.2, 0.5, 0.8], 0.5);
    expectColor(colors.slice(0, 3), BASE_COLOR);
    expectColor(colors.slice(3, 6), FULL_COLOR);
    expectColor(colors.slice(6, 9), FULL_COLOR);
  });
});

describe("blankColors", () => {
  it("is all base color", () => {
    const colors = blankColors(4);
    expect(colors.length).toBe(12);
    for (let i = 0; i < 4; i++) {
      expectColor(colors.slice(3 * i, 3 * i + 3), BASE_COLOR);
    }
  });
});
