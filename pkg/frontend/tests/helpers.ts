import type { Scheduler, SocketLike } from "../src/connection.js";
import type { StateFrame } from "../src/protocol.js";

/** Deterministic in-memory socket driven from the test body. */
export class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((event?: unknown) => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;
  onclose: ((event?: unknown) => void) | null = null;
  onerror: ((event?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  push(frame: unknown): void {
    const data = typeof frame === "string" ? frame : JSON.stringify(frame);
    this.onmessage?.({ data });
  }

  drop(): void {
    this.onclose?.();
  }
}

/** Factory that records every socket it hands out. */
export function fakeFactory(): { factory: (url: string) => FakeSocket; sockets: FakeSocket[] } {
  const sockets: FakeSocket[] = [];
  return {
    sockets,
    factory: () => {
      const sock = new FakeSocket();
      sockets.push(sock);
      return sock;
    },
  };
}

/** Timer queue advanced manually; exposes the scheduled delays. */
export class ManualScheduler implements Scheduler {
  private tasks = new Map<number, () => void>();
  delays: number[] = [];
  private nextId = 1;

  setTimeout(fn: () => void, ms: number): unknown {
    this.delays.push(ms);
    const id = this.nextId++;
    this.tasks.set(id, fn);
    return id;
  }

  clearTimeout(handle: unknown): void {
    this.tasks.delete(handle as number);
  }

  /** Run everything currently queued (new timers wait for the next call). */
  flush(): void {
    const due = [...this.tasks.entries()];
    this.tasks.clear();
    for (const [, fn] of due) fn();
  }

  get pending(): number {
    return this.tasks.size;
  }
}

export function makeFrame(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    type: "state",
    t: 0.0,
    step: 0,
    status: "running",
    position: [0, 0, 0.05],
    quaternion_wxyz: [1, 0, 0, 0],
    velocity: [0, 0, 0],
    angular_velocity: [0, 0, 0],
    coverage: 0.0,
    mmc_phase: "I",
    magnets: [
      {
        position: [0, 0.08, 0.05],
        quaternion_wxyz: [1, 0, 0, 0],
        moment: [0, 0, 8],
        arm_mounted: false,
      },
    ],
    arm_q: null,
    forces: {
      magnetic: [0, -1e-3, 0],
      contact: [0, 0, 0],
      friction: [0, 0, 0],
      peristalsis: [0, 0, 0],
      gravity: [0, 0, 0],
      external: [0, 0, 0],
    },
    ...overrides,
  };
}
