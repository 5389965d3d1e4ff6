/** Viewer interaction state and its reducers.
 *
 * All reducers are pure: they take a state, return a new state, and are the
 * single place where inputs are validated. Every numeric field of the
 * returned state is always finite and inside its documented range, no matter
 * what event values arrive (including NaN and infinities from hostile or
 * broken input devices).
 */

import { dollyBounds, ELEVATION_LIMIT } from "./camera.js"
import { clamp } from "./math.js"

export type LoopMode = "pingpong" | "loop"

export interface ViewerState {
  /** interpolation time, always in [0, 1]. */
  t: number
  azimuth: number
  /** always in [-ELEVATION_LIMIT, ELEVATION_LIMIT]. */
  elevation: number
  /** always inside dollyBounds for the loaded scene. */
  dolly: number
  /** depth-aware blending strength, always in [0, BETA_MAX]. */
  beta: number
  playing: boolean
  loopMode: LoopMode
  /** playback direction for ping-pong, +1 or -1. */
  direction: 1 | -1
}

/** Per-scene limits the reducers clamp against. */
export interface SceneBounds {
  depthScale: number
  /** smallest point depth in the bundle. */
  nearestZ: number
}

export const BETA_MAX = 100
/** playback speed in t units per second; a full sweep takes 2 s. */
export const PLAY_RATE = 0.5
const DRAG_RADIANS_PER_PX = 0.005
/** dolly change per wheel delta unit, as a fraction of the scene depth. */
const WHEEL_DOLLY_FRACTION = 0.0008

export function initialState(beta: number): ViewerState {
  return {
    t: 0,
    azimuth: 0,
    elevation: 0,
    dolly: 0,
    beta: Number.isFinite(beta) ? clamp(beta, 0, BETA_MAX) : 0,
    playing: false,
    loopMode: "pingpong",
    direction: 1,
  }
}

/** Wrap an angle into (-pi, pi] so long drags cannot grow it unboundedly. */
function wrapAngle(a: number): number {
  let w = a % (2 * Math.PI)
  if (w <= -Math.PI) w += 2 * Math.PI
  if (w > Math.PI) w -= 2 * Math.PI
  return w
}

/** Mouse-drag orbit: horizontal pixels turn azimuth, vertical elevation. */
export function applyDrag(
  s: ViewerState,
  dxPx: number,
  dyPx: number,
): ViewerState {
  if (!Number.isFinite(dxPx) || !Number.isFinite(dyPx)) return s
  return {
    ...s,
    azimuth: wrapAngle(s.azimuth + dxPx * DRAG_RADIANS_PER_PX),
    elevation: clamp(
      s.elevation + dyPx * DRAG_RADIANS_PER_PX,
      -ELEVATION_LIMIT,
      ELEVATION_LIMIT,
    ),
  }
}

/** Wheel dolly: scrolling forward (negative deltaY) decreases dolly, moving
 * the camera in monotonically without ever crossing the nearest point. */
export function applyWheel(
  s: ViewerState,
  bounds: SceneBounds,
  deltaY: number,
): ViewerState {
  if (!Number.isFinite(deltaY)) return s
  const lim = dollyBounds(bounds.depthScale, bounds.nearestZ)
  const step = deltaY * WHEEL_DOLLY_FRACTION * bounds.depthScale
  return { ...s, dolly: clamp(s.dolly + step, lim.min, lim.max) }
}

/** Scrub the timeline; pauses playback so the slider position sticks. */
export function setT(s: ViewerState, t: number): ViewerState {
  if (!Number.isFinite(t)) return s
  return { ...s, t: clamp(t, 0, 1), playing: false }
}

export function setBeta(s: ViewerState, beta: number): ViewerState {
  if (!Number.isFinite(beta)) return s
  return { ...s, beta: clamp(beta, 0, BETA_MAX) }
}

export function togglePlay(s: ViewerState): ViewerState {
  return { ...s, playing: !s.playing }
}

export function setLoopMode(s: ViewerState, mode: LoopMode): ViewerState {
  return { ...s, loopMode: mode, direction: s.direction }
}

/** Advance playback by dtSeconds of wall time.
 *
 * Ping-pong traces a triangle wave: t sweeps 0 -> 1 -> 0 at PLAY_RATE,
 * reflecting at the ends. Loop wraps from 1 back to 0. Oversized steps
 * (tab was in the background) fold correctly instead of overshooting.
 */
export function tick(s: ViewerState, dtSeconds: number): ViewerState {
  if (!s.playing || !Number.isFinite(dtSeconds) || dtSeconds <= 0) return s
  const step = Math.min(dtSeconds, 10) * PLAY_RATE
  if (s.loopMode === "loop") {
    let t = (s.t + step) % 1
    if (t < 0) t = 0
    return { ...s, t, direction: 1 }
  }
  // Reflect off both ends as many times as the step requires.
  let t = s.t + s.direction * step
  let direction = s.direction
  while (t > 1 || t < 0) {
    if (t > 1) {
      t = 2 - t
      direction = -1
    } else {
      t = -t
      direction = 1
    }
  }
  return { ...s, t, direction }
}
