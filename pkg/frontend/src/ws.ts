// Event stream client: frames arrive in order on one connection; a drop
// triggers automatic reconnect with backoff and the gap is flagged to the
// fold via onStatus("reconnected").

import { WsFrame } from "./types.js";

export type StreamStatus = "connecting" | "open" | "closed" | "reconnected";

export interface WebSocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

const defaultFactory: WebSocketFactory = (url) =>
  new (globalThis as { WebSocket: new (url: string) => WebSocketLike }).WebSocket(url);

export class EventStream {
  private ws: WebSocketLike | null = null;
  private stopped = false;
  private attempts = 0;
  private everOpened = false;

  constructor(
    private url: string,
    private onFrame: (frame: WsFrame) => void,
    private onStatus: (status: StreamStatus) => void,
    private factory: WebSocketFactory = defaultFactory,
    private maxBackoffMs: number = 5000,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
  }

  private connect(): void {
    if (this.stopped) return;
    this.onStatus("connecting");
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.onStatus(this.everOpened ? "reconnected" : "open");
      this.everOpened = true;
    };
    ws.onmessage = (ev) => {
      try {
        this.onFrame(JSON.parse(String(ev.data)) as WsFrame);
      } catch {
        // a malformed frame is dropped; ordering is asserted by seq in the fold
      }
    };
    ws.onerror = () => undefined;
    ws.onclose = () => {
      if (this.stopped) return;
      this.onStatus("closed");
      const backoff = Math.min(this.maxBackoffMs, 250 * 2 ** this.attempts);
      this.attempts += 1;
      setTimeout(() => this.connect(), backoff);
    };
  }
}
