/** Vertex picking: nearest projected vertex under the pointer, depth-tested.
 *
 * Geometry stays on the server; the client only matches the pointer against
 * vertices the viewer already projected to the screen.  A vertex is pickable
 * when it lies within a screen-space radius of the pointer and its own depth
 * is at (or in front of) the first surface the viewer sees through that
 * vertex's pixel, so back-surface vertices never win over a front surface.
 */

/** Packed projected vertices: [x0, y0, depth0, x1, y1, depth1, ...].
 * Off-screen or behind-camera vertices should carry NaN coordinates. */
export type ScreenVertices = Float32Array | number[];

/** First-surface depth through a pixel, or null for background. */
export type DepthProbe = (x: number, y: number) => number | null;

export interface PickOptions {
  /** Screen-space pick radius in pixels. */
  radius?: number;
  /** Depth slack (mesh units) so surface vertices pass their own depth test. */
  epsilon?: number;
}

/** Returns the picked vertex index, or -1 for a no-op (background,
 * nothing in radius, or everything in radius occluded). */
export function pickVertex(
  px: number,
  py: number,
  screen: ScreenVertices,
  depthAt: DepthProbe,
  options: PickOptions = {},
): number {
  const radius = options.radius ?? 12;
  const epsilon = options.epsilon ?? 0.02;
  const r2 = radius * radius;
  const n = Math.floor(screen.length / 3);

  const candidates: { index: number; d2: number }[] = [];
  for (let i = 0; i < n; i++) {
    const x = screen[3 * i];
    const y = screen[3 * i + 1];
    if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
    const dx = x - px;
    const dy = y - py;
    const d2 = dx * dx + dy * dy;
    if (d2 <= r2) candidates.push({ index: i, d2 });
  }
  candidates.sort((a, b) => a.d2 - b.d2 || a.index - b.index);

  for (const c of candidates) {
    const depth = screen[3 * c.index + 2];
    if (!Number.isFinite(depth)) continue;
    const surface = depthAt(screen[3 * c.index], screen[3 * c.index + 1]);
    if (surface === null) continue;
    if (depth <= surface + epsilon) return c.index;
  }
  return -1;
}
