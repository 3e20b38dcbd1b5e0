/** Orchestrates clicks, debounced requests, and heatmap repaints.
 *
 * DOM-free: the viewer and panel plug in through hooks, so the whole
 * click -> request -> repaint pipeline runs headless in tests.  Requests
 * carry monotonic ids; only the latest issued request may paint, and a
 * response always corresponds exactly to the click list it was sent for.
 */

import { ApiClient, ApiError } from "./api";
import { binaryColors, blankColors, heatmapColors } from "./heatmap";
import { RequestGate } from "./requests";
import { ClickList } from "./state";
import { ClickBody, SegmentResponse, Sign, UiClick } from "./types";

export type ColorMode = "heatmap" | "binary";

export interface ControllerHooks {
  renderColors(colors: Float32Array): void;
  renderClicks(clicks: readonly UiClick[]): void;
  showError(message: string | null): void;
  showThreshold(value: number, degenerate: boolean, source: "otsu" | "user"): void;
}

export interface ControllerOptions {
  debounceMs?: number;
  vertexCount?: number;
}

export class SegmentationController {
  readonly state = new ClickList();
  private readonly gate = new RequestGate();
  private readonly debounceMs: number;
  private readonly vertexCount: number;
  private mode: ColorMode = "heatmap";
  private userThreshold: number | null = null;
  private lastResponse: SegmentResponse | null = null;
  private lastAcknowledged: ClickBody | null = null;
  private pendingTimer: ReturnType<typeof setTimeout> | null = null;
  private pendingFire: (() => void) | null = null;
  private inflight = new Set<Promise<void>>();

  constructor(
    private readonly api: ApiClient,
    private readonly hooks: ControllerHooks,
    options: ControllerOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
    this.vertexCount = options.vertexCount ?? 0;
  }

  /** Body of the newest response that reached the screen; null before any. */
  acknowledged(): ClickBody | null {
    return this.lastAcknowledged;
  }

  response(): SegmentResponse | null {
    return this.lastResponse;
  }

  onPick(vertex: number, sign: Sign): void {
    const result = this.state.apply(vertex, sign);
    if (!result.ok) {
      this.hooks.showError(result.reason ?? "click rejected");
      return;
    }
    this.hooks.showError(null);
    this.hooks.renderClicks(this.state.list());
    this.afterStateChange();
  }

  undo(): void {
    if (this.state.undo() === null) return;
    this.hooks.showError(null);
    this.hooks.renderClicks(this.state.list());
    this.afterStateChange();
  }

  clear(): void {
    this.state.clear();
    this.hooks.showError(null);
    this.hooks.renderClicks(this.state.list());
    this.afterStateChange();
  }

  setMode(mode: ColorMode): void {
    this.mode = mode;
    this.repaint();
  }

  /** Slider override; stays until resetThreshold(). */
  setThreshold(value: number): void {
    this.userThreshold = Math.min(1, Math.max(0, value));
    this.repaint();
  }

  /** Back to the server-supplied Otsu default. */
  resetThreshold(): void {
    this.userThreshold = null;
    this.repaint();
  }

  /** Flush the debounce window and await every in-flight request. */
  async settle(): Promise<void> {
    while (this.pendingFire !== null || this.inflight.size > 0) {
      if (this.pendingFire !== null) {
        const fire = this.pendingFire;
        this.cancelPending();
        fire();
      }
      await Promise.allSettled([...this.inflight]);
    }
  }

  private afterStateChange(): void {
    if (this.state.size() === 0) {
      // Nothing selected: drop any pending request and blank the heatmap.
      this.cancelPending();
      this.gate.issue(); // strand in-flight responses
      this.lastResponse = null;
      this.lastAcknowledged = null;
      this.hooks.renderColors(blankColors(this.vertexCount));
      return;
    }
    this.schedule();
  }

  private cancelPending(): void {
    if (this.pendingTimer !== null) clearTimeout(this.pendingTimer);
    this.pendingTimer = null;
    this.pendingFire = null;
  }

  private schedule(): void {
    this.cancelPending();
    const fire = () => {
      const run = this.send();
      this.inflight.add(run);
      void run.finally(() => this.inflight.delete(run));
    };
    this.pendingFire = fire;
    this.pendingTimer = setTimeout(() => {
      this.cancelPending();
      fire();
    }, this.debounceMs);
  }

  private async send(): Promise<void> {
    if (!this.state.canRequest()) {
      this.hooks.showError("add a positive click to segment");
      return;
    }
    const body = this.state.body();
    const id = this.gate.issue();
    try {
      const response = await this.api.segment(body);
      if (!this.gate.shouldRender(id)) return; // stale: a newer request exists
      this.lastResponse = response;
      this.lastAcknowledged = body;
      this.hooks.showError(null);
      this.repaint();
    } catch (err) {
      if (!this.gate.isCurrent(id)) return;
      const message =
        err instanceof ApiError
          ? `service rejected the request: ${err.message}`
          : `request failed: ${(err as Error).message ?? err}`;
      this.hooks.showError(message);
    }
  }

  private repaint(): void {
    if (this.lastResponse === null) return;
    const probs = this.lastResponse.probabilities;
    const threshold = this.userThreshold ?? this.lastResponse.threshold_otsu;
    const colors =
      this.mode === "binary"
        ? binaryColors(probs, threshold)
        : heatmapColors(probs);
    this.hooks.renderColors(colors);
    this.hooks.showThreshold(
      threshold,
      this.lastResponse.threshold_degenerate,
      this.userThreshold === null ? "otsu" : "user",
    );
  }
}
