/**
 * Session view: everything the screen shows, built purely from wire
 * traffic.  No physics happens here; closing and reopening the page
 * reconstructs an equivalent view from subsequent frames alone.
 */

import type { Command, StateFrame, Vec3 } from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface LogEntry {
  kind: "sent" | "rejected" | "info";
  text: string;
  atMs: number;
}

export interface CoveragePoint {
  t: number;
  c: number;
}

export class SessionView {
  connection: ConnectionState = "connecting";
  /** wall-clock ms until the next reconnect attempt, when disconnected */
  retryInMs: number | null = null;
  frame: StateFrame | null = null;
  trajectory: Vec3[] = [];
  coverage: CoveragePoint[] = [];
  commandLog: LogEntry[] = [];
  framesSeen = 0;

  constructor(
    readonly trajectoryCap = 2000,
    readonly coverageCap = 4000,
    readonly logCap = 200,
  ) {}

  onOpen(): void {
    this.connection = "connected";
    this.retryInMs = null;
  }

  onClose(retryInMs: number): void {
    this.connection = "disconnected";
    this.retryInMs = retryInMs;
  }

  onConnecting(): void {
    this.connection = "connecting";
  }

  /** Apply one state frame; a time jump backwards marks a reset. */
  onFrame(frame: StateFrame): void {
    if (this.frame !== null && frame.t < this.frame.t) {
      this.trajectory = [];
      this.coverage = [];
    }
    this.frame = frame;
    this.framesSeen += 1;
    push(this.trajectory, frame.position, this.trajectoryCap);
    push(this.coverage, { t: frame.t, c: frame.coverage }, this.coverageCap);
  }

  onSent(cmd: Command, atMs: number): void {
    push(this.commandLog, { kind: "sent", text: summarize(cmd), atMs }, this.logCap);
  }

  onRejected(reason: string, atMs: number, cmd?: string): void {
    const text = cmd === undefined ? reason : `${cmd}: ${reason}`;
    push(this.commandLog, { kind: "rejected", text, atMs }, this.logCap);
  }

  onInfo(text: string, atMs: number): void {
    push(this.commandLog, { kind: "info", text, atMs }, this.logCap);
  }
}

function push<T>(buf: T[], item: T, cap: number): void {
  buf.push(item);
  if (buf.length > cap) buf.splice(0, buf.length - cap);
}

function summarize(cmd: Command): string {
  if (cmd.cmd === "magnet_delta") {
    const parts: string[] = [];
    for (const key of ["dx", "dy", "dz", "droll", "dpitch", "dyaw"] as const) {
      const v = cmd[key];
      if (v !== undefined && v !== 0) parts.push(`${key}=${v.toPrecision(3)}`);
    }
    return `magnet_delta[${cmd.magnet}] ${parts.join(" ") || "(zero)"}`;
  }
  if (cmd.cmd === "set_magnet_pose") {
    return `set_magnet_pose[${cmd.magnet}] -> (${cmd.position.join(", ")})`;
  }
  if (cmd.cmd === "set_rate") return `set_rate ${cmd.hz} Hz`;
  return cmd.cmd;
}
