/** UI state and its URL-hash encoding. */

export const BLUR_MIN = 0;
export const BLUR_MAX = 80;
export const GAMMA_MIN = 1;
export const GAMMA_MAX = 4;

export interface UiState {
  sessionId: string | null;
  width: number;
  height: number;
  /** focal point in image coordinates */
  focus: { x: number; y: number } | null;
  /** disparity rendered sharp, as looked up at the focal point */
  focusDisparity: number | null;
  blur: number;
  gamma: number;
  latencyMs: number | null;
  /** true = show the all-in-focus input instead of the bokeh render */
  compare: boolean;
  /** false-color disparity overlay */
  overlay: boolean;
}

export function defaultState(): UiState {
  return {
    sessionId: null,
    width: 0,
    height: 0,
    focus: null,
    focusDisparity: null,
    blur: 32,
    gamma: 2.2,
    latencyMs: null,
    compare: false,
    overlay: false,
  };
}

export function clampBlur(value: number): number {
  if (!Number.isFinite(value)) return BLUR_MIN;
  return Math.min(BLUR_MAX, Math.max(BLUR_MIN, value));
}

export function clampGamma(value: number): number {
  if (!Number.isFinite(value)) return 2.2;
  return Math.min(GAMMA_MAX, Math.max(GAMMA_MIN, value));
}

/**
 * The state is fully reconstructable from (session, focus, A, gamma), so
 * it round-trips through the URL hash and views are shareable.
 */
export function stateToHash(state: UiState): string {
  if (!state.sessionId) return '';
  const params = new URLSearchParams();
  params.set('s', state.sessionId);
  if (state.focus) {
    params.set('x', state.focus.x.toFixed(2));
    params.set('y', state.focus.y.toFixed(2));
  }
  params.set('a', String(state.blur));
  params.set('g', String(state.gamma));
  if (state.compare) params.set('cmp', '1');
  return '#' + params.toString();
}

export interface HashState {
  sessionId: string;
  focus: { x: number; y: number } | null;
  blur: number;
  gamma: number;
  compare: boolean;
}

export function stateFromHash(hash: string): HashState | null {
  const raw = hash.startsWith('#') ? hash.slice(1) : hash;
  if (!raw) return null;
  const params = new URLSearchParams(raw);
  const sessionId = params.get('s');
  if (!sessionId) return null;
  const x = Number(params.get('x'));
  const y = Number(params.get('y'));
  const focus =
    params.has('x') && params.has('y') && Number.isFinite(x) && Number.isFinite(y)
      ? { x, y }
      : null;
  return {
    sessionId,
    focus,
    blur: clampBlur(Number(params.get('a') ?? 32)),
    gamma: clampGamma(Number(params.get('g') ?? 2.2)),
    compare: params.get('cmp') === '1',
  };
}
