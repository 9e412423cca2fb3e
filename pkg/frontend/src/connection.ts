/**
 * WebSocket lifecycle with automatic reconnect.
 *
 * The socket constructor and timers are injected so the browser build
 * uses the native WebSocket while tests use fakes (or the ws package
 * against a live server).  Reconnects back off exponentially and the
 * delay resets after any successful open.
 */

import { parseServerFrame, ProtocolError, type ServerFrame } from "./protocol.js";

/* Browser-shaped socket surface; the native WebSocket, the ws package,
   and test fakes all satisfy it. Handler params stay `any` because the
   three implementations disagree on their event types. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((event?: any) => void) | null;
  onmessage: ((event: any) => void) | null;
  onclose: ((event?: any) => void) | null;
  onerror: ((event?: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface Scheduler {
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

export interface ConnectionHandlers {
  onOpen?: () => void;
  onFrame?: (frame: ServerFrame) => void;
  /** protocol-level garbage that was dropped, for the log panel */
  onGarbage?: (reason: string) => void;
  /** socket lost; reconnect scheduled in the given delay */
  onDown?: (retryInMs: number) => void;
  onConnecting?: () => void;
}

export class Connection {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private retryHandle: unknown = null;
  private stopped = false;

  constructor(
    readonly url: string,
    private readonly factory: SocketFactory,
    private readonly handlers: ConnectionHandlers,
    private readonly scheduler: Scheduler = globalThis,
    readonly baseDelayMs = 500,
    readonly maxDelayMs = 8000,
  ) {}

  get open(): boolean {
    return this.socket !== null && this.attemptsReset;
  }

  private attemptsReset = false;

  start(): void {
    this.stopped = false;
    this.dial();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryHandle !== null) {
      this.scheduler.clearTimeout(this.retryHandle);
      this.retryHandle = null;
    }
    const sock = this.socket;
    this.socket = null;
    this.attemptsReset = false;
    if (sock) {
      sock.onclose = null;
      sock.onerror = null;
      sock.close();
    }
  }

  /** Send one already-encoded message; false when the link is down. */
  send(data: string): boolean {
    if (!this.open || this.socket === null) return false;
    this.socket.send(data);
    return true;
  }

  private dial(): void {
    if (this.stopped) return;
    this.handlers.onConnecting?.();
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      this.attempts = 0;
      this.attemptsReset = true;
      this.handlers.onOpen?.();
    };
    sock.onmessage = (event) => {
      let frame: ServerFrame;
      try {
        frame = parseServerFrame(String(event.data));
      } catch (exc) {
        if (exc instanceof ProtocolError) {
          this.handlers.onGarbage?.(exc.message);
          return;
        }
        throw exc;
      }
      this.handlers.onFrame?.(frame);
    };
    const lost = () => {
      if (this.socket !== sock) return; // stale callback after stop/redial
      this.socket = null;
      this.attemptsReset = false;
      this.scheduleRetry();
    };
    sock.onclose = lost;
    sock.onerror = lost;
  }

  private scheduleRetry(): void {
    if (this.stopped || this.retryHandle !== null) return;
    const delay = Math.min(this.baseDelayMs * 2 ** this.attempts, this.maxDelayMs);
    this.attempts += 1;
    this.handlers.onDown?.(delay);
    this.retryHandle = this.scheduler.setTimeout(() => {
      this.retryHandle = null;
      this.dial();
    }, delay);
  }
}
