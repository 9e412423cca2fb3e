/**
 * Console core: one connection, one session view, one token bucket.
 *
 * The steer loop calls tick() at a fixed cadence; each tick turns the
 * currently held keys (or gamepad axes) into at most one magnet_delta,
 * subject to the rate limiter.  All server traffic lands in the view,
 * which the host renders after every change notification.
 */

import { Connection, type Scheduler, type SocketFactory } from "./connection.js";
import { axesToDelta, keysToDelta, type Delta, type Gains } from "./input.js";
import { encodeCommand, type Command } from "./protocol.js";
import { TokenBucket } from "./rateLimiter.js";
import { SessionView } from "./session.js";

export interface ConsoleOptions {
  url: string;
  factory: SocketFactory;
  scheduler?: Scheduler;
  now?: () => number;
  gains?: Gains;
  /** outgoing command budget, commands per second */
  ratePerSec?: number;
  burst?: number;
  magnet?: number;
  trajectoryCap?: number;
}

export class TeleopConsole {
  readonly view: SessionView;
  readonly gains: Gains;
  magnet: number;

  /** called after any view mutation; hosts redraw here */
  onChange: ((view: SessionView) => void) | null = null;

  private readonly connection: Connection;
  private readonly bucket: TokenBucket;
  private readonly now: () => number;
  private readonly pressed = new Set<string>();
  private gamepadAxes: readonly number[] | null = null;
  private sent = 0;

  constructor(options: ConsoleOptions) {
    this.now = options.now ?? (() => Date.now());
    this.gains = options.gains ?? { step: 0.002, rotStep: 0.02 };
    this.magnet = options.magnet ?? 0;
    this.view = new SessionView(options.trajectoryCap ?? 2000);
    this.bucket = new TokenBucket(
      options.ratePerSec ?? 20,
      options.burst ?? 5,
      this.now(),
    );
    this.connection = new Connection(
      options.url,
      options.factory,
      {
        onOpen: () => {
          this.view.onOpen();
          this.changed();
        },
        onConnecting: () => {
          this.view.onConnecting();
          this.changed();
        },
        onDown: (retryInMs) => {
          this.view.onClose(retryInMs);
          this.changed();
        },
        onFrame: (frame) => {
          if (frame.type === "state") {
            this.view.onFrame(frame);
          } else {
            this.view.onRejected(frame.reason, this.now(), frame.cmd);
          }
          this.changed();
        },
        onGarbage: (reason) => {
          this.view.onInfo(`dropped frame: ${reason}`, this.now());
          this.changed();
        },
      },
      options.scheduler ?? globalThis,
    );
  }

  get sentCount(): number {
    return this.sent;
  }

  connect(): void {
    this.connection.start();
  }

  close(): void {
    this.connection.stop();
    this.view.onClose(0);
    this.view.retryInMs = null;
    this.changed();
  }

  keyDown(key: string): void {
    this.pressed.add(key);
  }

  keyUp(key: string): void {
    this.pressed.delete(key);
  }

  releaseKeys(): void {
    this.pressed.clear();
  }

  setGamepadAxes(axes: readonly number[] | null): void {
    this.gamepadAxes = axes;
  }

  /** One steer cadence tick: at most one movement command goes out. */
  tick(): void {
    if (this.view.connection !== "connected") return;
    let delta: Delta | null = keysToDelta(this.pressed, this.gains);
    if (delta === null && this.gamepadAxes !== null) {
      delta = axesToDelta(this.gamepadAxes, this.gains);
    }
    if (delta === null) return;
    this.send({
      cmd: "magnet_delta",
      magnet: this.magnet,
      ...prune(delta),
    });
  }

  pause(): void {
    this.send({ cmd: "pause" });
  }

  resume(): void {
    this.send({ cmd: "resume" });
  }

  reset(): void {
    this.send({ cmd: "reset" });
  }

  setRate(hz: number): void {
    this.send({ cmd: "set_rate", hz });
  }

  /** Rate-limited send; every command that leaves is echoed to the log. */
  send(cmd: Command): boolean {
    if (this.view.connection !== "connected") return false;
    const at = this.now();
    if (!this.bucket.tryRemove(at)) {
      this.view.onInfo(`rate limit: ${cmd.cmd} dropped`, at);
      this.changed();
      return false;
    }
    if (!this.connection.send(encodeCommand(cmd))) return false;
    this.sent += 1;
    this.view.onSent(cmd, at);
    this.changed();
    return true;
  }

  private changed(): void {
    this.onChange?.(this.view);
  }
}

function prune(delta: Delta): Partial<Delta> {
  const out: Partial<Delta> = {};
  for (const key of Object.keys(delta) as (keyof Delta)[]) {
    if (delta[key] !== 0) out[key] = delta[key];
  }
  return out;
}
