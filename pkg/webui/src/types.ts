/** Shared types mirroring the segmentation service's wire format. */

export const POSITIVE = "positive";
export const NEGATIVE = "negative";
export type Sign = typeof POSITIVE | typeof NEGATIVE;

/** One placed click; `order` is creation order, display only. */
export interface UiClick {
  readonly vertex: number;
  readonly sign: Sign;
  readonly order: number;
}

/** POST /segment request body. */
export interface ClickBody {
  version: 1;
  clicks: { vertex: number; sign: Sign }[];
}

/** POST /segment response. */
export interface SegmentResponse {
  version: number;
  probabilities: number[];
  threshold_otsu: number;
  threshold_degenerate: boolean;
  model_id: string;
  elapsed_ms: number;
}

/** GET /mesh response. */
export interface MeshPayload {
  version: number;
  n: number;
  m: number;
  vertices: number[][];
  faces: number[][];
  model_id: string;
}

/** GET /model response (extra diagnostic fields pass through). */
export interface ModelInfo {
  model_id: string;
  n_vertices: number;
  [key: string]: unknown;
}
