/** Page wiring: binds the DOM to the headless controller. */

import { RenderApi } from './api.js';
import { UiController } from './controller.js';
import { falseColor } from './overlay.js';
import { Throttle } from './queue.js';
import { BLUR_MAX, BLUR_MIN, GAMMA_MAX, GAMMA_MIN, UiState } from './state.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const uploadPanel = el<HTMLDivElement>('upload-panel');
const viewerPanel = el<HTMLDivElement>('viewer-panel');
const imageInput = el<HTMLInputElement>('image-input');
const disparityInput = el<HTMLInputElement>('disparity-input');
const createButton = el<HTMLButtonElement>('create-session');
const demoButton = el<HTMLButtonElement>('load-demo');
const uploadError = el<HTMLParagraphElement>('upload-error');

const stage = el<HTMLDivElement>('stage');
const view = el<HTMLImageElement>('view');
const overlayCanvas = el<HTMLCanvasElement>('overlay');
const marker = el<HTMLDivElement>('marker');
const tooltip = el<HTMLDivElement>('tooltip');
const toast = el<HTMLDivElement>('toast');

const blurSlider = el<HTMLInputElement>('blur');
const gammaSlider = el<HTMLInputElement>('gamma');
const blurValue = el<HTMLSpanElement>('blur-value');
const gammaValue = el<HTMLSpanElement>('gamma-value');
const compareToggle = el<HTMLInputElement>('compare');
const overlayToggle = el<HTMLInputElement>('overlay-toggle');
const focusReadout = el<HTMLSpanElement>('focus-readout');
const latencyReadout = el<HTMLSpanElement>('latency-readout');

blurSlider.min = String(BLUR_MIN);
blurSlider.max = String(BLUR_MAX);
gammaSlider.min = String(GAMMA_MIN);
gammaSlider.max = String(GAMMA_MAX);

let aifUrl: string | null = null;
let bokehUrl: string | null = null;
let toastTimer: ReturnType<typeof setTimeout> | null = null;

function showToast(message: string) {
  toast.textContent = message;
  toast.classList.add('visible');
  if (toastTimer) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => toast.classList.remove('visible'), 4000);
}

function setView(url: string | null) {
  if (url) view.src = url;
}

const api = new RenderApi('');
const controller = new UiController(api, {
  showBokeh(image) {
    if (bokehUrl) URL.revokeObjectURL(bokehUrl);
    bokehUrl = URL.createObjectURL(image);
    setView(bokehUrl);
  },
  showAllInFocus() {
    setView(aifUrl);
  },
  stateChanged(state) {
    syncControls(state);
    const hash = controller.hash();
    if (hash && window.location.hash !== hash) {
      history.replaceState(null, '', hash || '#');
    }
  },
  error(message) {
    showToast(`render failed: ${message}`);
  },
});

function syncControls(state: UiState) {
  blurSlider.value = String(state.blur);
  gammaSlider.value = String(state.gamma);
  blurValue.textContent = state.blur.toFixed(0);
  gammaValue.textContent = state.gamma.toFixed(2);
  compareToggle.checked = state.compare;
  overlayToggle.checked = state.overlay;
  focusReadout.textContent =
    state.focusDisparity === null ? 'click the image' : state.focusDisparity.toFixed(4);
  latencyReadout.textContent =
    state.latencyMs === null ? '-' : `${Math.round(state.latencyMs)} ms`;
  overlayCanvas.style.display = state.overlay ? 'block' : 'none';
  if (state.focus) {
    positionMarker(state.focus.x, state.focus.y);
    marker.style.display = 'block';
  } else {
    marker.style.display = 'none';
  }
}

function positionMarker(x: number, y: number) {
  const rect = view.getBoundingClientRect();
  if (!controller.state.width || rect.width === 0) return;
  marker.style.left = `${(x / controller.state.width) * rect.width}px`;
  marker.style.top = `${(y / controller.state.height) * rect.height}px`;
}

function imageCoords(event: MouseEvent): { x: number; y: number } | null {
  const rect = view.getBoundingClientRect();
  if (rect.width === 0 || !controller.state.width) return null;
  const x = ((event.clientX - rect.left) / rect.width) * controller.state.width;
  const y = ((event.clientY - rect.top) / rect.height) * controller.state.height;
  if (x < 0 || y < 0 || x >= controller.state.width || y >= controller.state.height) {
    return null;
  }
  return { x, y };
}

async function drawOverlayFrom(blob: Blob) {
  const bitmap = await createImageBitmap(blob);
  overlayCanvas.width = bitmap.width;
  overlayCanvas.height = bitmap.height;
  const ctx = overlayCanvas.getContext('2d');
  if (!ctx) return;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  falseColor(data.data);
  ctx.putImageData(data, 0, 0);
}

async function startSession(image: Blob, disparity: Blob) {
  uploadError.textContent = '';
  createButton.disabled = true;
  try {
    await controller.createSession(image, disparity);
    if (aifUrl) URL.revokeObjectURL(aifUrl);
    aifUrl = URL.createObjectURL(image);
    setView(aifUrl);
    await drawOverlayFrom(disparity);
    uploadPanel.classList.add('hidden');
    viewerPanel.classList.remove('hidden');
  } catch (error) {
    uploadError.textContent =
      error instanceof Error ? error.message : String(error);
  } finally {
    createButton.disabled = false;
  }
}

createButton.addEventListener('click', () => {
  const image = imageInput.files?.[0];
  const disparity = disparityInput.files?.[0];
  if (!image || !disparity) {
    uploadError.textContent = 'choose both an image and a disparity map';
    return;
  }
  void startSession(image, disparity);
});

demoButton.addEventListener('click', async () => {
  try {
    const [image, disparity] = await Promise.all([
      fetch('demo/image.png').then((r) => r.blob()),
      fetch('demo/disparity.png').then((r) => r.blob()),
    ]);
    await startSession(image, disparity);
  } catch (error) {
    uploadError.textContent = `demo assets unavailable: ${String(error)}`;
  }
});

view.addEventListener('click', (event) => {
  const point = imageCoords(event);
  if (!point) return;
  controller.refocus(point.x, point.y).catch((error) => {
    showToast(error instanceof Error ? error.message : String(error));
  });
});

// disparity readout under the cursor, rate-limited
const hoverThrottle = new Throttle(150);
view.addEventListener('mousemove', (event) => {
  if (!controller.state.sessionId) return;
  const point = imageCoords(event);
  if (!point) {
    tooltip.style.display = 'none';
    return;
  }
  tooltip.style.left = `${event.clientX - stage.getBoundingClientRect().left + 14}px`;
  tooltip.style.top = `${event.clientY - stage.getBoundingClientRect().top + 14}px`;
  hoverThrottle.call(() => {
    api
      .disparityAt(controller.state.sessionId as string, point.x, point.y)
      .then((d) => {
        tooltip.textContent = `d = ${d.toFixed(3)}`;
        tooltip.style.display = 'block';
      })
      .catch(() => {
        tooltip.style.display = 'none';
      });
  });
});
view.addEventListener('mouseleave', () => {
  tooltip.style.display = 'none';
});

blurSlider.addEventListener('input', () => controller.setBlur(Number(blurSlider.value)));
gammaSlider.addEventListener('input', () =>
  controller.setGamma(Number(gammaSlider.value)),
);
compareToggle.addEventListener('change', () => controller.setCompare(compareToggle.checked));
overlayToggle.addEventListener('change', () => controller.setOverlay(overlayToggle.checked));

window.addEventListener('resize', () => {
  if (controller.state.focus) {
    positionMarker(controller.state.focus.x, controller.state.focus.y);
  }
});

// shared-view restore: sessions are in-memory server-side, so a reload of a
// dead session cleanly falls back to the upload panel
if (window.location.hash) {
  controller
    .applyHash(window.location.hash)
    .then((restored) => {
      if (restored) {
        uploadPanel.classList.add('hidden');
        viewerPanel.classList.remove('hidden');
        showToast('restored shared view (upload again for the overlay)');
      } else {
        history.replaceState(null, '', '#');
      }
    })
    .catch(() => history.replaceState(null, '', '#'));
}
