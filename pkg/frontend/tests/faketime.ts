/** Deterministic clock + timer queue for driving throttle logic in tests. */
export class FakeTimeline {
  private t = 0;
  private queue: { at: number; fn: () => void }[] = [];

  now = (): number => this.t;

  schedule = (fn: () => void, ms: number): void => {
    this.queue.push({ at: this.t + Math.max(0, ms), fn });
  };

  /** Advance to an absolute time, firing timers in order. */
  advanceTo(target: number): void {
    for (;;) {
      this.queue.sort((a, b) => a.at - b.at);
      const next = this.queue[0];
      if (!next || next.at > target) break;
      this.queue.shift();
      this.t = next.at;
      next.fn();
    }
    this.t = target;
  }

  advanceBy(ms: number): void {
    this.advanceTo(this.t + ms);
  }
}
