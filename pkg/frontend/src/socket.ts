// Reconnecting gateway client. One websocket, many in-flight requests,
// correlated purely by requestId: every request registers a pending entry
// that is cleared by its terminal response (ok or error), by connection
// loss, or by close(). Reconnects with exponential backoff capped at 30 s.

import type { ErrorBody, RequestKind, ResponseFrame } from "./protocol.js";
import { PROTOCOL_VERSION } from "./protocol.js";

// Shape shared by the browser WebSocket and the `ws` package; handler
// params stay `any` so both event families fit without adapters.
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((event?: any) => void) | null;
  onclose: ((event?: any) => void) | null;
  onerror: ((event?: any) => void) | null;
  onmessage: ((event: any) => void) | null;
}

export type SocketFactory = (url: string) => WebSocketLike;

export type ConnectionStatus = "connecting" | "open" | "closed";

export class ProtocolError extends Error {
  readonly code: string;
  readonly offset?: number;
  readonly reason?: string;
  readonly body: ErrorBody;

  constructor(body: ErrorBody) {
    super(body.message);
    this.code = body.code;
    this.offset = body.offset;
    this.reason = body.reason;
    this.body = body;
  }
}

export class ConnectionLost extends Error {
  constructor() {
    super("connection to the gateway was lost");
  }
}

export interface GatewayClientOptions {
  baseDelayMs?: number;
  maxDelayMs?: number;
  reconnect?: boolean;
  onStatus?: (status: ConnectionStatus) => void;
  onUnmatched?: (frame: unknown) => void;
}

interface Pending {
  resolve: (payload: unknown) => void;
  reject: (err: Error) => void;
}

export function backoffDelay(attempt: number, baseMs = 500, maxMs = 30_000): number {
  return Math.min(maxMs, baseMs * 2 ** attempt);
}

export class GatewayClient {
  status: ConnectionStatus = "closed";

  private socket: WebSocketLike | null = null;
  private readonly pending = new Map<string, Pending>();
  private counter = 0;
  private attempts = 0;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory,
    private readonly options: GatewayClientOptions = {},
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.open();
  }

  private open(): void {
    this.setStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.setStatus("open");
    };
    socket.onmessage = (event) => this.handleMessage(String(event.data));
    socket.onerror = () => {
      // the close handler owns reconnect; nothing to do here
    };
    socket.onclose = () => {
      this.socket = null;
      this.failAllPending();
      this.setStatus("closed");
      if (!this.closedByUser && this.options.reconnect !== false) {
        const delay = backoffDelay(
          this.attempts++,
          this.options.baseDelayMs ?? 500,
          this.options.maxDelayMs ?? 30_000,
        );
        this.reconnectTimer = setTimeout(() => this.open(), delay);
      }
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.failAllPending();
    this.setStatus("closed");
  }

  get isOpen(): boolean {
    return this.status === "open";
  }

  pendingIds(): string[] {
    return [...this.pending.keys()];
  }

  request<T>(kind: RequestKind, payload: unknown = {}): Promise<T> {
    if (this.status !== "open" || this.socket === null) {
      return Promise.reject(new ConnectionLost());
    }
    const requestId = `r${++this.counter}`;
    const frame = JSON.stringify({ v: PROTOCOL_VERSION, requestId, kind, payload });
    return new Promise<T>((resolve, reject) => {
      this.pending.set(requestId, {
        resolve: resolve as (payload: unknown) => void,
        reject,
      });
      try {
        this.socket!.send(frame);
      } catch (err) {
        this.pending.delete(requestId);
        reject(new ConnectionLost());
      }
    });
  }

  private handleMessage(raw: string): void {
    let frame: ResponseFrame;
    try {
      frame = JSON.parse(raw) as ResponseFrame;
    } catch {
      this.options.onUnmatched?.(raw);
      return;
    }
    const entry = this.pending.get(frame.requestId);
    if (!entry) {
      this.options.onUnmatched?.(frame);
      return;
    }
    this.pending.delete(frame.requestId);
    if (frame.status === "ok") {
      entry.resolve(frame.payload);
    } else {
      entry.reject(new ProtocolError(frame.error));
    }
  }

  private failAllPending(): void {
    const entries = [...this.pending.values()];
    this.pending.clear();
    for (const entry of entries) {
      entry.reject(new ConnectionLost());
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.status !== status) {
      this.status = status;
      this.options.onStatus?.(status);
    }
  }
}
