import type { Mat16 } from "./rigid.js";

type Clock = () => number;
type Timer = (fn: () => void, ms: number) => unknown;

/**
 * Rate limiter for pose messages during a drag gesture.
 *
 * At most one message goes out per interval (default 30 ms); the newest
 * pose always wins a pending slot, and the terminal pose of a gesture is
 * always delivered (immediately if the window is open, otherwise as the
 * trailing send). This saturates the server's latest-wins mailbox without
 * flooding it.
 */
export class PoseThrottle {
  private lastSentAt = -Infinity;
  private pending: Mat16 | null = null;
  private timerArmed = false;

  constructor(
    private readonly send: (pose: Mat16) => void,
    readonly intervalMs = 30,
    private readonly now: Clock = () => performance.now(),
    private readonly schedule: Timer = (fn, ms) => setTimeout(fn, ms),
  ) {}

  /** Offer a pose mid-gesture. */
  update(pose: Mat16): void {
    const t = this.now();
    if (t - this.lastSentAt >= this.intervalMs && !this.timerArmed) {
      this.lastSentAt = t;
      this.send(pose);
      return;
    }
    this.pending = pose;
    if (!this.timerArmed) {
      this.timerArmed = true;
      const wait = Math.max(0, this.intervalMs - (t - this.lastSentAt));
      this.schedule(() => this.fire(), wait);
    }
  }

  /** Gesture ended: guarantee this exact pose is the last one delivered. */
  finish(pose: Mat16): void {
    this.pending = pose;
    if (!this.timerArmed) {
      // window may still be closed; honor the interval with a trailing send
      const t = this.now();
      if (t - this.lastSentAt >= this.intervalMs) {
        this.fire();
      } else {
        this.timerArmed = true;
        this.schedule(() => this.fire(), this.intervalMs - (t - this.lastSentAt));
      }
    }
  }

  private fire(): void {
    this.timerArmed = false;
    if (this.pending) {
      this.lastSentAt = this.now();
      const pose = this.pending;
      this.pending = null;
      this.send(pose);
    }
  }
}
