/**
 * Operator input to magnet motion.
 *
 * Keyboard keys map to unit axes; gamepad sticks map linearly (an axis
 * at 50% asks for 50% of the per-tick step).  The caller scales the
 * result by its gains, so the same bindings serve any step size.
 */

export interface Delta {
  dx: number;
  dy: number;
  dz: number;
  droll: number;
  dpitch: number;
  dyaw: number;
}

export interface Gains {
  /** translation per steer tick, meters */
  step: number;
  /** rotation per steer tick, radians */
  rotStep: number;
}

export const ZERO_DELTA: Delta = { dx: 0, dy: 0, dz: 0, droll: 0, dpitch: 0, dyaw: 0 };

/** key -> unit-magnitude delta (translation axes in capsule frame conventions) */
export const DEFAULT_BINDINGS: Record<string, Partial<Delta>> = {
  ArrowUp: { dz: 1 },
  ArrowDown: { dz: -1 },
  ArrowLeft: { dx: -1 },
  ArrowRight: { dx: 1 },
  w: { dy: 1 },
  s: { dy: -1 },
  q: { dyaw: 1 },
  e: { dyaw: -1 },
  r: { dpitch: 1 },
  f: { dpitch: -1 },
  z: { droll: 1 },
  x: { droll: -1 },
};

export function isBound(key: string, bindings = DEFAULT_BINDINGS): boolean {
  return key in bindings;
}

/** Sum the active keys into one per-tick delta; null when idle. */
export function keysToDelta(
  pressed: ReadonlySet<string>,
  gains: Gains,
  bindings = DEFAULT_BINDINGS,
): Delta | null {
  const out: Delta = { ...ZERO_DELTA };
  let any = false;
  for (const key of pressed) {
    const axes = bindings[key];
    if (!axes) continue;
    any = true;
    out.dx += (axes.dx ?? 0) * gains.step;
    out.dy += (axes.dy ?? 0) * gains.step;
    out.dz += (axes.dz ?? 0) * gains.step;
    out.droll += (axes.droll ?? 0) * gains.rotStep;
    out.dpitch += (axes.dpitch ?? 0) * gains.rotStep;
    out.dyaw += (axes.dyaw ?? 0) * gains.rotStep;
  }
  return any && !isZero(out) ? out : null;
}

/**
 * Gamepad mapping: left stick drives x/z, right stick vertical drives
 * y, right stick horizontal yaws.  Axes inside the deadzone are idle.
 */
export function axesToDelta(
  axes: readonly number[],
  gains: Gains,
  deadzone = 0.15,
): Delta | null {
  const live = (i: number) => {
    const v = axes[i] ?? 0;
    return Math.abs(v) >= deadzone ? v : 0;
  };
  const out: Delta = {
    ...ZERO_DELTA,
    dx: live(0) * gains.step,
    dz: -live(1) * gains.step,
    dyaw: -live(2) * gains.rotStep,
    dy: -live(3) * gains.step,
  };
  return isZero(out) ? null : out;
}

function isZero(d: Delta): boolean {
  return (
    d.dx === 0 && d.dy === 0 && d.dz === 0 &&
    d.droll === 0 && d.dpitch === 0 && d.dyaw === 0
  );
}
