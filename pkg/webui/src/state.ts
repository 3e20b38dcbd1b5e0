/** Click list state machine.
 *
 * Clicking an unclicked vertex adds a click with the requested sign,
 * clicking it again with the same sign removes it, and clicking with the
 * other sign flips it.  Any mutation that would leave clicks on the mesh
 * with no positive among them is rejected, because the service only
 * accepts click sets with at least one positive.  Undo and clear may empty
 * the list entirely (an empty list just means "no selection yet").
 */

import { ClickBody, POSITIVE, Sign, UiClick } from "./types";

export interface ApplyResult {
  ok: boolean;
  reason?: string;
}

export class ClickList {
  private clicks: UiClick[] = [];
  private counter = 0;

  list(): readonly UiClick[] {
    return this.clicks;
  }

  size(): number {
    return this.clicks.length;
  }

  positives(): number {
    return this.clicks.filter((c) => c.sign === POSITIVE).length;
  }

  get(vertex: number): UiClick | undefined {
    return this.clicks.find((c) => c.vertex === vertex);
  }

  /** At least one positive click: precondition for sending a request. */
  canRequest(): boolean {
    return this.positives() > 0;
  }

  /** Add / remove / flip a click at a vertex; rejects zero-positive states. */
  apply(vertex: number, sign: Sign): ApplyResult {
    if (!Number.isInteger(vertex) || vertex < 0) {
      return { ok: false, reason: `bad vertex index ${vertex}` };
    }
    const existing = this.get(vertex);
    let next: UiClick[];
    if (existing === undefined) {
      next = [...this.clicks, { vertex, sign, order: this.counter + 1 }];
    } else if (existing.sign === sign) {
      next = this.clicks.filter((c) => c.vertex !== vertex);
    } else {
      next = this.clicks.map((c) =>
        c.vertex === vertex ? { ...c, sign } : c,
      );
    }
    if (next.length > 0 && !next.some((c) => c.sign === POSITIVE)) {
      return { ok: false, reason: "a click set needs at least one positive click" };
    }
    this.clicks = next;
    if (existing === undefined) this.counter += 1;
    return { ok: true };
  }

  /** Remove the most recently created click; null when empty. */
  undo(): UiClick | null {
    if (this.clicks.length === 0) return null;
    let latest = this.clicks[0];
    for (const c of this.clicks) if (c.order > latest.order) latest = c;
    this.clicks = this.clicks.filter((c) => c !== latest);
    return latest;
  }

  clear(): void {
    this.clicks = [];
  }

  /** Request body in creation order; exactly what goes over the wire. */
  body(): ClickBody {
    const ordered = [...this.clicks].sort((a, b) => a.order - b.order);
    return {
      version: 1,
      clicks: ordered.map((c) => ({ vertex: c.vertex, sign: c.sign })),
    };
  }
}
