import { describe, expect, it } from 'vitest';

import { RenderApi, RenderRequest } from '../src/api.js';
import { ControllerHooks, UiController } from '../src/controller.js';

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

interface FakeApiOptions {
  disparity?: (x: number, y: number) => number;
  renderDelayMs?: number;
  failRenders?: boolean;
}

function fakeApi(options: FakeApiOptions = {}) {
  const renders: RenderRequest[] = [];
  const api = {
    async createSession() {
      return { id: 'sess', width: 100, height: 80 };
    },
    async render(_id: string, request: RenderRequest) {
      renders.push(request);
      if (options.renderDelayMs) await sleep(options.renderDelayMs);
      if (options.failRenders) throw new Error('boom');
      return new Blob([JSON.stringify(request)]);
    },
    async disparityAt(_id: string, x: number, y: number) {
      return options.disparity ? options.disparity(x, y) : 0.5;
    },
    async health() {
      return true;
    },
  } as unknown as RenderApi;
  return { api, renders };
}

function recordingHooks() {
  const shown: Array<'bokeh' | 'aif'> = [];
  const errors: string[] = [];
  let lastBlob: Blob | null = null;
  const hooks: ControllerHooks = {
    showBokeh(blob) {
      shown.push('bokeh');
      lastBlob = blob;
    },
    showAllInFocus() {
      shown.push('aif');
    },
    stateChanged() {},
    error(message) {
      errors.push(message);
    },
  };
  return { hooks, shown, errors, lastBlob: () => lastBlob };
}

async function fitted(options: FakeApiOptions = {}, throttleMs = 10) {
  const { api, renders } = fakeApi(options);
  const recorder = recordingHooks();
  const controller = new UiController(api, recorder.hooks, { throttleMs });
  await controller.createSession(new Blob(), new Blob());
  return { controller, renders, ...recorder };
}

describe('UiController', () => {
  it('refocus looks up disparity and renders with it', async () => {
    const { controller, renders } = await fitted({
      disparity: (x) => (x > 50 ? 0.8 : 0.2),
    });
    await controller.refocus(60, 10);
    expect(controller.state.focusDisparity).toBe(0.8);
    expect(renders).toHaveLength(1);
    expect(renders[0].d_f).toBe(0.8);
    expect(renders[0].A).toBe(controller.state.blur);

    await controller.refocus(10, 10);
    expect(controller.state.focusDisparity).toBe(0.2);
    expect(renders[1].d_f).toBe(0.2);
  });

  it('records render latency', async () => {
    const { controller } = await fitted({ renderDelayMs: 20 });
    await controller.refocus(5, 5);
    expect(controller.state.latencyMs).not.toBeNull();
    expect(controller.state.latencyMs!).toBeGreaterThanOrEqual(15);
  });

  it('slider changes only render once focus is set', async () => {
    const { controller, renders } = await fitted();
    controller.setBlur(10);
    await controller.settled();
    expect(renders).toHaveLength(0);
    await controller.refocus(1, 1);
    controller.setBlur(20);
    await sleep(30);
    await controller.settled();
    expect(renders.length).toBeGreaterThanOrEqual(2);
    expect(renders[renders.length - 1].A).toBe(20);
  });

  it('throttles slider storms to the configured rate', async () => {
    const { controller, renders } = await fitted({}, 50);
    await controller.refocus(1, 1); // 1 render
    for (let blur = 0; blur <= 40; blur++) {
      controller.setBlur(blur);
      await sleep(1);
    }
    await sleep(80);
    await controller.settled();
    // ~45 ms of events at 50 ms interval: leading + trailing only
    expect(renders.length - 1).toBeLessThanOrEqual(3);
    expect(renders[renders.length - 1].A).toBe(40); // final position rendered
  });

  it('failed renders keep the previous frame and surface a message', async () => {
    const good = await fitted();
    await good.controller.refocus(2, 2);
    expect(good.shown).toContain('bokeh');

    const bad = await fitted({ failRenders: true });
    await bad.controller.refocus(2, 2);
    expect(bad.errors).toHaveLength(1);
    expect(bad.shown.filter((s) => s === 'bokeh')).toHaveLength(0);
  });

  it('comparison toggle switches to the all-in-focus view and back', async () => {
    const { controller, shown } = await fitted();
    await controller.refocus(3, 3);
    controller.setCompare(true);
    expect(shown[shown.length - 1]).toBe('aif');
    controller.setCompare(false);
    expect(shown[shown.length - 1]).toBe('bokeh'); // cached last render
  });

  it('zero aperture renders through the server like any other value', async () => {
    const { controller, renders } = await fitted();
    controller.setBlur(0);
    await controller.refocus(4, 4);
    expect(renders[0].A).toBe(0);
  });

  it('hash restore probes the session and replays focus', async () => {
    const { api } = fakeApi({ disparity: () => 0.7 });
    const recorder = recordingHooks();
    const controller = new UiController(api, recorder.hooks, { throttleMs: 5 });
    const ok = await controller.applyHash('#s=sess&x=12&y=8&a=24&g=1.5');
    expect(ok).toBe(true);
    expect(controller.state.blur).toBe(24);
    expect(controller.state.gamma).toBe(1.5);
    expect(controller.state.focus).toEqual({ x: 12, y: 8 });
    expect(controller.state.focusDisparity).toBe(0.7);
  });

  it('hash restore fails cleanly for dead sessions', async () => {
    const api = {
      async disparityAt() {
        throw new Error('410');
      },
    } as unknown as RenderApi;
    const recorder = recordingHooks();
    const controller = new UiController(api, recorder.hooks);
    expect(await controller.applyHash('#s=gone&x=1&y=1')).toBe(false);
    expect(controller.state.sessionId).toBeNull();
  });
});
