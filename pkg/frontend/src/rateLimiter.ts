/**
 * Token bucket guarding the outgoing command rate.
 *
 * Time is injected by the caller so behaviour is exact under test:
 * over any window of w seconds the bucket grants at most
 * capacity + rate * w tokens.
 */
export class TokenBucket {
  private tokens: number;
  private lastRefill: number;

  constructor(
    readonly ratePerSec: number,
    readonly capacity: number,
    nowMs = 0,
  ) {
    if (ratePerSec <= 0 || capacity < 1) {
      throw new Error("rate must be positive and capacity at least 1");
    }
    this.tokens = capacity;
    this.lastRefill = nowMs;
  }

  /** Take one token if available; refills by elapsed wall time first. */
  tryRemove(nowMs: number): boolean {
    this.refill(nowMs);
    if (this.tokens >= 1) {
      this.tokens -= 1;
      return true;
    }
    return false;
  }

  available(nowMs: number): number {
    this.refill(nowMs);
    return Math.floor(this.tokens);
  }

  private refill(nowMs: number): void {
    if (nowMs > this.lastRefill) {
      const gained = ((nowMs - this.lastRefill) / 1000) * this.ratePerSec;
      this.tokens = Math.min(this.capacity, this.tokens + gained);
      this.lastRefill = nowMs;
    }
  }
}
