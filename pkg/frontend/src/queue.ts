/** Request scheduling: one render in flight, newest request wins. */

type Job<T> = () => Promise<T>;

/**
 * Serializes async jobs so at most one runs at a time.  A new submission
 * replaces any queued (not yet started) job, and results of superseded
 * jobs are discarded: only the newest submission ever reaches `deliver`.
 */
export class RenderQueue<T> {
  private seq = 0;
  private running = false;
  private queued: { job: Job<T>; seq: number } | null = null;
  private idleWaiters: Array<() => void> = [];

  constructor(
    private readonly deliver: (value: T, seq: number) => void,
    private readonly fail: (error: unknown, seq: number) => void,
  ) {}

  submit(job: Job<T>): number {
    const seq = ++this.seq;
    this.queued = { job, seq };
    void this.pump();
    return seq;
  }

  get busy(): boolean {
    return this.running || this.queued !== null;
  }

  /** Resolves once no job is running or queued. */
  onIdle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.idleWaiters.push(resolve));
  }

  private async pump(): Promise<void> {
    if (this.running || this.queued === null) return;
    const { job, seq } = this.queued;
    this.queued = null;
    this.running = true;
    try {
      const value = await job();
      if (seq === this.seq) this.deliver(value, seq);
    } catch (error) {
      if (seq === this.seq) this.fail(error, seq);
    } finally {
      this.running = false;
      if (this.queued !== null) {
        void this.pump();
      } else {
        const waiters = this.idleWaiters;
        this.idleWaiters = [];
        for (const resolve of waiters) resolve();
      }
    }
  }
}

/**
 * Rate limiter: at most one call per interval, and the latest suppressed
 * call fires when the interval elapses (trailing edge), so the final
 * slider position is always rendered.
 */
export class Throttle {
  private last = Number.NEGATIVE_INFINITY;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private trailing: (() => void) | null = null;

  constructor(
    private readonly intervalMs: number,
    private readonly now: () => number = () => Date.now(),
  ) {}

  call(fn: () => void): void {
    const elapsed = this.now() - this.last;
    if (elapsed >= this.intervalMs && this.timer === null) {
      this.last = this.now();
      fn();
      return;
    }
    this.trailing = fn;
    if (this.timer === null) {
      this.timer = setTimeout(() => {
        this.timer = null;
        const pending = this.trailing;
        this.trailing = null;
        if (pending) {
          this.last = this.now();
          pending();
        }
      }, Math.max(0, this.intervalMs - elapsed));
    }
  }
}
