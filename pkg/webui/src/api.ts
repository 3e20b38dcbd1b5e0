/** Typed client for the segmentation service's HTTP API. */

import { ClickBody, MeshPayload, ModelInfo, SegmentResponse } from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function unwrap<T>(resp: Response): Promise<T> {
  let payload: unknown = null;
  try {
    payload = await resp.json();
  } catch {
    payload = null;
  }
  if (!resp.ok) {
    const detail =
      payload !== null && typeof payload === "object" && "error" in payload
        ? String((payload as { error: unknown }).error)
        : resp.statusText || `HTTP ${resp.status}`;
    throw new ApiError(resp.status, detail);
  }
  return payload as T;
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string }> {
    return unwrap(await this.fetchFn(this.url("/health")));
  }

  async model(): Promise<ModelInfo> {
    return unwrap(await this.fetchFn(this.url("/model")));
  }

  async mesh(): Promise<MeshPayload> {
    return unwrap(await this.fetchFn(this.url("/mesh")));
  }

  async segment(body: ClickBody): Promise<SegmentResponse> {
    const resp = await this.fetchFn(this.url("/segment"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return unwrap(resp);
  }
}
