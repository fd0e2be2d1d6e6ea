/**
 * UI round trip against the live render service (the service is spawned
 * from the sibling Python package).
 *
 * Covers the acceptance criterion: create a session on the demo asset,
 * click two focal points, verify the displayed focus disparity equals
 * GET /disparity at the click within 1e-4, and confirm the second render
 * on the same session is at least 5x faster than session creation plus
 * the first render (the scene representation is reused).
 */

import { spawn, ChildProcess } from 'node:child_process';
import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { RenderApi } from '../src/api.js';
import { ControllerHooks, UiController } from '../src/controller.js';

const here = dirname(fileURLToPath(import.meta.url));
const demoDir = join(here, '..', 'public', 'demo');
const repoRoot = join(here, '..', '..');

const PORT = 18731;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForHealth(api: RenderApi, timeoutMs = 60_000) {
  const started = Date.now();
  while (Date.now() - started < timeoutMs) {
    if (await api.health()) return;
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error('render service did not come up');
}

function demoBlobs() {
  const image = new Blob([readFileSync(join(demoDir, 'image.png'))], {
    type: 'image/png',
  });
  const disparity = new Blob([readFileSync(join(demoDir, 'disparity.png'))], {
    type: 'image/png',
  });
  return { image, disparity };
}

function silentHooks(): ControllerHooks & { bokehCount: () => number } {
  let count = 0;
  return {
    showBokeh() {
      count++;
    },
    showAllInFocus() {},
    stateChanged() {},
    error(message) {
      throw new Error(`render failed: ${message}`);
    },
    bokehCount: () => count,
  };
}

beforeAll(async () => {
  server = spawn(
    'python3',
    ['-m', 'refocus.cli', 'serve', '--host', '127.0.0.1', '--port', String(PORT)],
    { cwd: repoRoot, stdio: 'ignore' },
  );
  await waitForHealth(new RenderApi(BASE));
}, 90_000);

afterAll(() => {
  server?.kill('SIGTERM');
});

describe('UI round trip against the live service', () => {
  it('session + two focal clicks + fast re-render', async () => {
    const api = new RenderApi(BASE);
    const hooks = silentHooks();
    const controller = new UiController(api, hooks, { throttleMs: 0 });
    const { image, disparity } = demoBlobs();

    // session creation, timed (the expensive representation build)
    const createStart = performance.now();
    await controller.createSession(image, disparity);
    const createMs = performance.now() - createStart;
    const width = controller.state.width;
    const height = controller.state.height;
    expect(width).toBeGreaterThan(0);

    // probe a coarse grid for a near (high d) and a far (low d) point
    const sid = controller.state.sessionId as string;
    const probes: Array<{ x: number; y: number; d: number }> = [];
    for (let gy = 1; gy <= 4; gy++) {
      for (let gx = 1; gx <= 4; gx++) {
        const x = (width * gx) / 5;
        const y = (height * gy) / 5;
        probes.push({ x, y, d: await api.disparityAt(sid, x, y) });
      }
    }
    probes.sort((a, b) => a.d - b.d);
    const farPoint = probes[0];
    const nearPoint = probes[probes.length - 1];
    expect(nearPoint.d).toBeGreaterThan(farPoint.d);

    // first render on the fresh session
    const firstStart = performance.now();
    await controller.refocus(nearPoint.x, nearPoint.y);
    const coldMs = createMs + (performance.now() - firstStart);
    expect(hooks.bokehCount()).toBe(1);

    // displayed focus disparity equals the service's lookup at the click
    const direct1 = await api.disparityAt(sid, nearPoint.x, nearPoint.y);
    expect(Math.abs((controller.state.focusDisparity as number) - direct1)).toBeLessThan(
      1e-4,
    );

    // second focal point: representation is reused, so this is much faster
    const warmStart = performance.now();
    await controller.refocus(farPoint.x, farPoint.y);
    const warmMs = performance.now() - warmStart;
    expect(hooks.bokehCount()).toBe(2);

    const direct2 = await api.disparityAt(sid, farPoint.x, farPoint.y);
    expect(Math.abs((controller.state.focusDisparity as number) - direct2)).toBeLessThan(
      1e-4,
    );

    expect(warmMs).toBeLessThan(coldMs / 5);

    // sanity: latency readout tracked the render
    expect(controller.state.latencyMs).not.toBeNull();
  }, 120_000);

  it('renders are deterministic and zero aperture works end to end', async () => {
    const api = new RenderApi(BASE);
    const hooks = silentHooks();
    const controller = new UiController(api, hooks, { throttleMs: 0 });
    const { image, disparity } = demoBlobs();
    await controller.createSession(image, disparity);
    controller.setBlur(0);
    await controller.refocus(10, 10);
    expect(hooks.bokehCount()).toBe(1);

    const sid = controller.state.sessionId as string;
    const first = new Uint8Array(
      await (await api.render(sid, { A: 0, d_f: 0.5 })).arrayBuffer(),
    );
    const second = new Uint8Array(
      await (await api.render(sid, { A: 0, d_f: 0.5 })).arrayBuffer(),
    );
    expect(first.length).toBeGreaterThan(0);
    expect(Buffer.from(first).equals(Buffer.from(second))).toBe(true);
  }, 60_000);

  it('dead sessions are reported, matching the reload behavior', async () => {
    const api = new RenderApi(BASE);
    const controller = new UiController(api, silentHooks());
    expect(await controller.applyHash('#s=doesnotexist&x=1&y=1')).toBe(false);
  }, 30_000);
});
