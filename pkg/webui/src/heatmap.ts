/** Per-vertex colors from the service's probabilities.
 *
 * Heatmap mode blends white (p=0) to blue (p=1); binary mode paints
 * vertices at or above the threshold solid blue and the rest white, which
 * is the local binarization behind the threshold slider.
 */

export const BASE_COLOR: readonly [number, number, number] = [1.0, 1.0, 1.0];
export const FULL_COLOR: readonly [number, number, number] = [0.05, 0.25, 1.0];

function clamp01(p: number): number {
  if (!Number.isFinite(p)) return 0;
  return Math.min(1, Math.max(0, p));
}

/** Continuous white-to-blue colors, packed RGB per vertex. */
export function heatmapColors(
  probs: ArrayLike<number>,
  out?: Float32Array,
): Float32Array {
  const n = probs.length;
  const colors = out && out.length === 3 * n ? out : new Float32Array(3 * n);
  for (let i = 0; i < n; i++) {
    const p = clamp01(probs[i]);
    for (let k = 0; k < 3; k++) {
      colors[3 * i + k] = BASE_COLOR[k] + (FULL_COLOR[k] - BASE_COLOR[k]) * p;
    }
  }
  return colors;
}

/** Thresholded two-tone colors: selected vertices blue, rest white. */
export function binaryColors(
  probs: ArrayLike<number>,
  threshold: number,
  out?: Float32Array,
): Float32Array {
  const n = probs.length;
  const colors = out && out.length === 3 * n ? out : new Float32Array(3 * n);
  for (let i = 0; i < n; i++) {
    const selected = clamp01(probs[i]) >= threshold;
    const c = selected ? FULL_COLOR : BASE_COLOR;
    colors[3 * i] = c[0];
    colors[3 * i + 1] = c[1];
    colors[3 * i + 2] = c[2];
  }
  return colors;
}

/** Uniform base color for "no selection yet". */
export function blankColors(n: number): Float32Array {
  const colors = new Float32Array(3 * n);
  for (let i = 0; i < n; i++) {
    colors[3 * i] = BASE_COLOR[0];
    colors[3 * i + 1] = BASE_COLOR[1];
    colors[3 * i + 2] = BASE_COLOR[2];
  }
  return colors;
}
