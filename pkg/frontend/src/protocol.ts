/**
 * Wire types for the teleoperation service.
 *
 * The console renders exactly what arrives on the socket; these
 * parsers validate shape and reject anything they cannot trust, so a
 * malformed broadcast can never poison the session view.
 */

export type Vec3 = [number, number, number];
export type QuatWxyz = [number, number, number, number];

export interface MagnetView {
  position: Vec3;
  quaternion_wxyz: QuatWxyz;
  moment: Vec3;
  arm_mounted: boolean;
}

export type ForceBreakdown = Record<string, Vec3>;

export interface StateFrame {
  type: "state";
  t: number;
  step: number;
  status: "running" | "paused";
  position: Vec3;
  quaternion_wxyz: QuatWxyz;
  velocity: Vec3;
  angular_velocity: Vec3;
  coverage: number;
  mmc_phase: string | null;
  magnets: MagnetView[];
  arm_q: number[] | null;
  forces: ForceBreakdown | null;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
  cmd?: string;
}

export type ServerFrame = StateFrame | ErrorFrame;

export class ProtocolError extends Error {}

function vec(value: unknown, n: number, what: string): number[] {
  if (!Array.isArray(value) || value.length !== n || !value.every(isFiniteNumber)) {
    throw new ProtocolError(`${what} must be ${n} finite numbers`);
  }
  return value as number[];
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function parseMagnet(value: unknown, index: number): MagnetView {
  const m = value as Record<string, unknown>;
  if (typeof m !== "object" || m === null) {
    throw new ProtocolError(`magnet ${index} is not an object`);
  }
  return {
    position: vec(m.position, 3, `magnet ${index} position`) as Vec3,
    quaternion_wxyz: vec(m.quaternion_wxyz, 4, `magnet ${index} quaternion`) as QuatWxyz,
    moment: vec(m.moment, 3, `magnet ${index} moment`) as Vec3,
    arm_mounted: m.arm_mounted === true,
  };
}

function parseForces(value: unknown): ForceBreakdown | null {
  if (value === null || value === undefined) return null;
  if (typeof value !== "object") throw new ProtocolError("forces must be an object");
  const out: ForceBreakdown = {};
  for (const [name, v] of Object.entries(value as Record<string, unknown>)) {
    out[name] = vec(v, 3, `force ${name}`) as Vec3;
  }
  return out;
}

export function parseServerFrame(raw: string): ServerFrame {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (exc) {
    throw new ProtocolError(`frame is not JSON: ${(exc as Error).message}`);
  }
  if (typeof data !== "object" || data === null) {
    throw new ProtocolError("frame is not an object");
  }
  const obj = data as Record<string, unknown>;

  if (obj.type === "error") {
    if (typeof obj.reason !== "string") {
      throw new ProtocolError("error frame without a reason");
    }
    const frame: ErrorFrame = { type: "error", reason: obj.reason };
    if (typeof obj.cmd === "string") frame.cmd = obj.cmd;
    return frame;
  }

  if (obj.type !== "state") {
    throw new ProtocolError(`unknown frame type ${JSON.stringify(obj.type)}`);
  }
  if (!isFiniteNumber(obj.t) || !isFiniteNumber(obj.step)) {
    throw new ProtocolError("state frame needs numeric t and step");
  }
  if (obj.status !== "running" && obj.status !== "paused") {
    throw new ProtocolError(`unexpected status ${JSON.stringify(obj.status)}`);
  }
  if (!isFiniteNumber(obj.coverage) || obj.coverage < 0 || obj.coverage > 1) {
    throw new ProtocolError("coverage must lie in [0, 1]");
  }
  const magnets = Array.isArray(obj.magnets)
    ? obj.magnets.map(parseMagnet)
    : [];
  return {
    type: "state",
    t: obj.t,
    step: obj.step,
    status: obj.status,
    position: vec(obj.position, 3, "position") as Vec3,
    quaternion_wxyz: vec(obj.quaternion_wxyz, 4, "quaternion") as QuatWxyz,
    velocity: vec(obj.velocity, 3, "velocity") as Vec3,
    angular_velocity: vec(obj.angular_velocity, 3, "angular velocity") as Vec3,
    coverage: obj.coverage,
    mmc_phase: typeof obj.mmc_phase === "string" ? obj.mmc_phase : null,
    magnets,
    arm_q: Array.isArray(obj.arm_q) && obj.arm_q.every(isFiniteNumber)
      ? (obj.arm_q as number[])
      : null,
    forces: parseForces(obj.forces),
  };
}

/** Magnet motion request; omitted axes default to zero on the server. */
export interface MagnetDelta {
  cmd: "magnet_delta";
  magnet: number;
  dx?: number;
  dy?: number;
  dz?: number;
  droll?: number;
  dpitch?: number;
  dyaw?: number;
}

export interface SetMagnetPose {
  cmd: "set_magnet_pose";
  magnet: number;
  position: Vec3;
  quaternion_wxyz?: QuatWxyz;
}

export interface SetRate {
  cmd: "set_rate";
  hz: number;
}

export interface Bare {
  cmd: "pause" | "resume" | "reset";
}

export type Command = MagnetDelta | SetMagnetPose | SetRate | Bare;

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
