/** Injectable transports: the session code never touches globals directly,
 * so tests (and node) can substitute fakes or the `ws` package. */

export interface HttpLike {
  getJson(url: string): Promise<unknown>;
  getBytes(url: string): Promise<Uint8Array>;
  postJson(url: string, body: unknown): Promise<{ status: number; body: unknown }>;
}

/** The subset of the WebSocket interface the session needs. */
export interface SocketLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((data: string) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** HttpLike over the global fetch (browser and node >= 18). */
export const fetchHttp: HttpLike = {
  async getJson(url: string): Promise<unknown> {
    const resp = await fetch(url);
    if (!resp.ok) throw new HttpError(resp.status, `GET ${url} -> ${resp.status}`);
    return resp.json();
  },
  async getBytes(url: string): Promise<Uint8Array> {
    const resp = await fetch(url);
    if (!resp.ok) throw new HttpError(resp.status, `GET ${url} -> ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  },
  async postJson(url: string, body: unknown) {
    const resp = await fetch(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    let parsed: unknown = null;
    try {
      parsed = await resp.json();
    } catch {
      parsed = null;
    }
    return { status: resp.status, body: parsed };
  },
};

/** SocketFactory over the browser WebSocket global. */
export function browserSocketFactory(url: string): SocketLike {
  const ws = new WebSocket(url);
  const like: SocketLike = {
    onopen: null,
    onclose: null,
    onerror: null,
    onmessage: null,
    close: () => ws.close(),
  };
  ws.onopen = () => like.onopen?.();
  ws.onclose = () => like.onclose?.();
  ws.onerror = () => like.onerror?.();
  ws.onmessage = (event) => like.onmessage?.(String(event.data));
  return like;
}
