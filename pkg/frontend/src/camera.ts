/** Orbit camera around the point cloud.
 *
 * The camera orbits a target on the optical axis at the scene's median
 * depth. At the rest pose (azimuth = elevation = dolly = 0) the view
 * transform is exactly the identity, which reproduces the producing
 * renderer's endpoint frames.
 *
 * Camera convention matches the bundle: x right, y down, z forward.
 */

import { cross, Mat3, normalize, sub, Vec3 } from "./math.js"

export interface OrbitPose {
  azimuth: number
  elevation: number
  /** offset of the orbit radius from its rest value; negative moves the
   * camera toward the target, so wheel-forward zooming decreases dolly. */
  dolly: number
}

export interface ViewTransform {
  /** world-to-camera rotation, row-major. */
  r: Mat3
  /** camera center in world coordinates. */
  c: Vec3
}

/** Elevation limit; keeps the look-at frame away from the y-axis pole. */
export const ELEVATION_LIMIT = 1.4

/**
 * Bounds for the dolly offset so the camera can neither cross the nearest
 * scene point nor back out to a degenerate distance. `nearestZ` is the
 * smallest point depth in the bundle; the camera stays at least 10% of the
 * way in front of it.
 */
export function dollyBounds(
  depthScale: number,
  nearestZ: number,
): { min: number; max: number } {
  const radiusMin = Math.max(0.05 * depthScale, depthScale - 0.9 * nearestZ)
  const radiusMax = 2.5 * depthScale
  return { min: radiusMin - depthScale, max: radiusMax - depthScale }
}

/** View transform for an orbit pose around the target (0, 0, depthScale). */
export function orbitView(pose: OrbitPose, depthScale: number): ViewTransform {
  const radius = depthScale + pose.dolly
  // Direction from camera to target; (0, 0, 1) at the rest pose.
  const dir: Vec3 = [
    Math.sin(pose.azimuth) * Math.cos(pose.elevation),
    Math.sin(pose.elevation),
    Math.cos(pose.azimuth) * Math.cos(pose.elevation),
  ]
  const target: Vec3 = [0, 0, depthScale]
  const c: Vec3 = [
    target[0] - radius * dir[0],
    target[1] - radius * dir[1],
    target[2] - radius * dir[2],
  ]
  const forward = dir
  // y-down convention: "down" plays the role the up vector usually does.
  const right = normalize(cross([0, 1, 0], forward))
  const down = cross(forward, right)
  const r = new Float64Array([
    right[0], right[1], right[2],
    down[0], down[1], down[2],
    forward[0], forward[1], forward[2],
  ])
  return { r, c }
}

/** Camera-space coordinates of a world point under a view transform. */
export function toCamera(view: ViewTransform, p: Vec3): Vec3 {
  const d = sub(p, view.c)
  return [
    view.r[0] * d[0] + view.r[1] * d[1] + view.r[2] * d[2],
    view.r[3] * d[0] + view.r[4] * d[1] + view.r[5] * d[2],
    view.r[6] * d[0] + view.r[7] * d[1] + view.r[8] * d[2],
  ]
}
