/** Headless UI logic: session lifecycle, refocusing, slider-driven renders.
 *
 * Keeps all behavior testable without a DOM: the page layer only binds
 * events to these methods and reacts to the hooks.
 */

import { RenderApi } from './api.js';
import { RenderQueue, Throttle } from './queue.js';
import {
  UiState,
  clampBlur,
  clampGamma,
  defaultState,
  stateFromHash,
  stateToHash,
} from './state.js';

export interface ControllerHooks {
  /** a fresh bokeh render arrived */
  showBokeh(image: Blob): void;
  /** the comparison toggle asked for the all-in-focus view */
  showAllInFocus(): void;
  stateChanged(state: UiState): void;
  error(message: string): void;
}

export interface ControllerOptions {
  /** minimum interval between slider-driven renders (<= 10 req/s) */
  throttleMs?: number;
  now?: () => number;
}

export class UiController {
  readonly state: UiState = defaultState();

  private readonly queue: RenderQueue<{ image: Blob; latencyMs: number }>;
  private readonly throttle: Throttle;
  private readonly now: () => number;
  private lastBokeh: Blob | null = null;

  constructor(
    private readonly api: RenderApi,
    private readonly hooks: ControllerHooks,
    options: ControllerOptions = {},
  ) {
    this.now = options.now ?? (() => Date.now());
    this.throttle = new Throttle(options.throttleMs ?? 100, this.now);
    this.queue = new RenderQueue(
      ({ image, latencyMs }) => {
        this.lastBokeh = image;
        this.state.latencyMs = latencyMs;
        if (!this.state.compare) this.hooks.showBokeh(image);
        this.hooks.stateChanged(this.state);
      },
      (error) => {
        // failed render keeps the previous frame
        this.hooks.error(error instanceof Error ? error.message : String(error));
      },
    );
  }

  /** Resolves when no render is queued or running. */
  settled(): Promise<void> {
    return this.queue.onIdle();
  }

  async createSession(image: Blob, disparity: Blob): Promise<void> {
    const info = await this.api.createSession(image, disparity, {
      gamma: this.state.gamma,
    });
    this.state.sessionId = info.id;
    this.state.width = info.width;
    this.state.height = info.height;
    this.state.focus = null;
    this.state.focusDisparity = null;
    this.state.latencyMs = null;
    this.lastBokeh = null;
    this.hooks.stateChanged(this.state);
  }

  /** Click at image coordinates: look up disparity there and re-render. */
  async refocus(x: number, y: number): Promise<void> {
    const id = this.requireSession();
    const d = await this.api.disparityAt(id, x, y);
    this.state.focus = { x, y };
    this.state.focusDisparity = d;
    this.hooks.stateChanged(this.state);
    this.requestRender();
    await this.settled();
  }

  setBlur(value: number): void {
    this.state.blur = clampBlur(value);
    this.hooks.stateChanged(this.state);
    if (this.state.focusDisparity !== null) {
      this.throttle.call(() => this.requestRender());
    }
  }

  setGamma(value: number): void {
    this.state.gamma = clampGamma(value);
    this.hooks.stateChanged(this.state);
    if (this.state.focusDisparity !== null) {
      this.throttle.call(() => this.requestRender());
    }
  }

  setCompare(on: boolean): void {
    this.state.compare = on;
    if (on) {
      this.hooks.showAllInFocus();
    } else if (this.lastBokeh) {
      this.hooks.showBokeh(this.lastBokeh);
    }
    this.hooks.stateChanged(this.state);
  }

  setOverlay(on: boolean): void {
    this.state.overlay = on;
    this.hooks.stateChanged(this.state);
  }

  hash(): string {
    return stateToHash(this.state);
  }

  /**
   * Restore a shared view.  Returns false (and leaves the controller in
   * the upload state) when the session no longer exists server-side.
   */
  async applyHash(hash: string): Promise<boolean> {
    const parsed = stateFromHash(hash);
    if (!parsed) return false;
    try {
      // probe the session; evicted/unknown sessions answer 410/404
      await this.api.disparityAt(parsed.sessionId, 0, 0);
    } catch {
      return false;
    }
    this.state.sessionId = parsed.sessionId;
    this.state.blur = parsed.blur;
    this.state.gamma = parsed.gamma;
    this.state.compare = parsed.compare;
    this.hooks.stateChanged(this.state);
    if (parsed.focus) {
      await this.refocus(parsed.focus.x, parsed.focus.y);
    }
    return true;
  }

  private requireSession(): string {
    if (!this.state.sessionId) throw new Error('no active session');
    return this.state.sessionId;
  }

  private requestRender(): void {
    const id = this.requireSession();
    const request = {
      A: this.state.blur,
      d_f: this.state.focusDisparity ?? 0.5,
      gamma: this.state.gamma,
    };
    this.queue.submit(async () => {
      const started = this.now();
      const image = await this.api.render(id, request);
      return { image, latencyMs: this.now() - started };
    });
  }
}
