/**
 * Slider position <-> scale mapping.
 *
 * The slider is ratio-scaled: equal distances on the slider correspond to
 * equal ratios between scale values. Position 0 maps to the lower bound,
 * position steps-1 to 1. This MUST stay in lockstep with the server mapping;
 * the conformance fixture served at /api/v1/slider-grid pins every position.
 */

export const SCALE_LOWER_BOUND = 0.05;
export const DEFAULT_STEPS = 100;

export function positionToScale(
  position: number,
  steps: number = DEFAULT_STEPS,
  lower: number = SCALE_LOWER_BOUND,
): number {
  if (!Number.isInteger(position) || position < 0 || position > steps - 1) {
    throw new RangeError(`position ${position} outside [0, ${steps - 1}]`);
  }
  const exponent = (steps - 1 - position) / (steps - 1);
  return Math.pow(lower, exponent);
}

export function scaleToPosition(
  scale: number,
  steps: number = DEFAULT_STEPS,
  lower: number = SCALE_LOWER_BOUND,
): number {
  if (!(scale >= lower && scale <= 1)) {
    throw new RangeError(`scale ${scale} outside [${lower}, 1]`);
  }
  const exponent = Math.log(scale) / Math.log(lower);
  return Math.round((steps - 1) * (1 - exponent));
}

export function buildGrid(
  steps: number = DEFAULT_STEPS,
  lower: number = SCALE_LOWER_BOUND,
): number[] {
  const grid: number[] = [];
  for (let p = 0; p < steps; p++) {
    grid.push(positionToScale(p, steps, lower));
  }
  return grid;
}

/** Keyboard nudge: one grid step, clamped to the slider range. */
export function nudgePosition(
  position: number,
  delta: number,
  steps: number = DEFAULT_STEPS,
): number {
  return Math.min(steps - 1, Math.max(0, position + delta));
}
