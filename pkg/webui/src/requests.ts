/** Monotonic request ids: the latest issued request wins, everything else
 * is stale and must not reach the screen.  Covers both out-of-order
 * completions and responses that arrive after the user changed the click
 * state again. */

export class RequestGate {
  private issued = 0;
  private rendered = 0;

  /** Reserve the next id at send time. */
  issue(): number {
    return ++this.issued;
  }

  /** True while no newer request has been issued. */
  isCurrent(id: number): boolean {
    return id === this.issued;
  }

  /** Decide once per response; records the render so duplicates lose too. */
  shouldRender(id: number): boolean {
    if (id !== this.issued || id <= this.rendered) return false;
    this.rendered = id;
    return true;
  }

  latest(): number {
    return this.issued;
  }
}
