/** Typed client for the render service HTTP API. */

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
}

export interface RenderRequest {
  A: number;
  d_f?: number;
  focus?: { x: number; y: number };
  gamma?: number;
}

export interface SessionOptions {
  gamma?: number;
  planes?: number;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorOf(resp: Response): Promise<ApiError> {
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === 'string') message = body.error;
    else if (body && body.detail) message = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body: keep the status line */
  }
  return new ApiError(resp.status, message);
}

export class RenderApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  async createSession(
    image: Blob,
    disparity: Blob,
    options: SessionOptions = {},
  ): Promise<SessionInfo> {
    const form = new FormData();
    form.append('image', image, 'image.png');
    form.append('disparity', disparity, 'disparity.png');
    if (options.gamma !== undefined) form.append('gamma', String(options.gamma));
    if (options.planes !== undefined) form.append('planes', String(options.planes));
    const resp = await this.fetchFn(`${this.baseUrl}/session`, {
      method: 'POST',
      body: form,
    });
    if (!resp.ok) throw await errorOf(resp);
    return (await resp.json()) as SessionInfo;
  }

  async render(id: string, request: RenderRequest): Promise<Blob> {
    const resp = await this.fetchFn(`${this.baseUrl}/render`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ id, ...request }),
    });
    if (!resp.ok) throw await errorOf(resp);
    return await resp.blob();
  }

  async disparityAt(id: string, x: number, y: number): Promise<number> {
    const query = new URLSearchParams({ id, x: String(x), y: String(y) });
    const resp = await this.fetchFn(`${this.baseUrl}/disparity?${query}`);
    if (!resp.ok) throw await errorOf(resp);
    const body = (await resp.json()) as { d: number };
    return body.d;
  }
}
