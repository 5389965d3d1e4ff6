/** CPU reference renderer.
 *
 * Renders the same image the WebGL path produces, one pixel at a time, so
 * tests can compare the viewer against frames exported by the producing
 * renderer without a GPU. Both paths implement the same soft splat:
 *
 *   - each point becomes a screen-facing circular sprite whose pixel radius
 *     is radius / depth, clamped to [1, 16] for display legibility;
 *   - cloud 0 points are displaced by t * flow, cloud 1 points by
 *     (1 - t) * flow, so both clouds describe the same instant;
 *   - per pixel, a depth prepass finds the nearest covering sprite, then
 *     sprites within the relative depth band z <= zmin * (1 + BAND)
 *     accumulate color with weight (1 - d/r)^2 * exp(-ALPHA_Z*(z-zmin)/zmin),
 *     where d is the pixel's distance from the sprite center;
 *   - pixels covered by both clouds mix the weight-normalized colors with
 *     blendWeight on the weight-normalized depths; pixels covered by one
 *     cloud take that cloud's color. Holes stay background (no fill).
 */

import { blendWeight } from "./blend.js"
import { toCamera, ViewTransform } from "./camera.js"
import { LdimScene, PointCloud } from "./ldim.js"
import { clamp } from "./math.js"

export const BAND = 0.05
export const ALPHA_Z = 60
export const MIN_SPRITE_RADIUS_PX = 1
export const MAX_SPRITE_RADIUS_PX = 16

export interface CpuFrame {
  width: number
  height: number
  /** rgb per pixel in [0, 1], length 3 * width * height. */
  color: Float32Array
  /** 1 where any sprite covered the pixel. */
  coverage: Uint8Array
}

interface CloudBuffers {
  /** weight-normalized rgb, length 3 * width * height. */
  color: Float64Array
  /** weight-normalized depth. */
  depth: Float64Array
  /** total accumulated weight; 0 marks an uncovered pixel. */
  weight: Float64Array
}

interface ProjectedPoints {
  px: Float64Array
  py: Float64Array
  z: Float64Array
  rad: Float64Array
}

function projectCloud(
  cloud: PointCloud,
  flowScale: number,
  view: ViewTransform,
  k: Float64Array,
): ProjectedPoints {
  const n = cloud.count
  const px = new Float64Array(n)
  const py = new Float64Array(n)
  const z = new Float64Array(n)
  const rad = new Float64Array(n)
  for (let i = 0; i < n; i++) {
    const cam = toCamera(view, [
      cloud.positions[3 * i + 0] + flowScale * cloud.flows[3 * i + 0],
      cloud.positions[3 * i + 1] + flowScale * cloud.flows[3 * i + 1],
      cloud.positions[3 * i + 2] + flowScale * cloud.flows[3 * i + 2],
    ])
    z[i] = cam[2]
    const safe = cam[2] > 0 ? cam[2] : 1
    px[i] = (k[0] * cam[0]) / safe + k[2]
    py[i] = (k[4] * cam[1]) / safe + k[5]
    rad[i] = clamp(
      cloud.radii[i] / safe,
      MIN_SPRITE_RADIUS_PX,
      MAX_SPRITE_RADIUS_PX,
    )
  }
  return { px, py, z, rad }
}

function splatCloud(
  cloud: PointCloud,
  pts: ProjectedPoints,
  width: number,
  height: number,
): CloudBuffers {
  const zMin = new Float64Array(width * height).fill(Infinity)
  const colorAccum = new Float64Array(3 * width * height)
  const depthAccum = new Float64Array(width * height)
  const weight = new Float64Array(width * height)

  // Pass one: nearest covering depth per pixel.
  for (let i = 0; i < cloud.count; i++) {
    const zi = pts.z[i]
    if (!(zi > 0) || !Number.isFinite(pts.px[i]) || !Number.isFinite(pts.py[i])) {
      continue
    }
    const r = pts.rad[i]
    const x0 = Math.max(0, Math.ceil(pts.px[i] - r))
    const x1 = Math.min(width - 1, Math.floor(pts.px[i] + r))
    const y0 = Math.max(0, Math.ceil(pts.py[i] - r))
    const y1 = Math.min(height - 1, Math.floor(pts.py[i] + r))
    const r2 = r * r
    for (let y = y0; y <= y1; y++) {
      const dy = y - pts.py[i]
      for (let x = x0; x <= x1; x++) {
        const dx = x - pts.px[i]
        const idx = y * width + x
        if (dx * dx + dy * dy < r2 && zi < zMin[idx]) zMin[idx] = zi
      }
    }
  }

  // Pass two: kernel-weighted accumulation inside the relative depth band.
  for (let i = 0; i < cloud.count; i++) {
    const zi = pts.z[i]
    if (!(zi > 0) || !Number.isFinite(pts.px[i]) || !Number.isFinite(pts.py[i])) {
      continue
    }
    const r = pts.rad[i]
    const x0 = Math.max(0, Math.ceil(pts.px[i] - r))
    const x1 = Math.min(width - 1, Math.floor(pts.px[i] + r))
    const y0 = Math.max(0, Math.ceil(pts.py[i] - r))
    const y1 = Math.min(height - 1, Math.floor(pts.py[i] + r))
    for (let y = y0; y <= y1; y++) {
      const dy = y - pts.py[i]
      for (let x = x0; x <= x1; x++) {
        const dx = x - pts.px[i]
        const d = Math.sqrt(dx * dx + dy * dy)
        if (d >= r) continue
        const idx = y * width + x
        const zm = zMin[idx]
        if (zi > zm * (1 + BAND)) continue
        let w = 1 - d / r
        w = w * w * Math.exp((-ALPHA_Z * (zi - zm)) / zm)
        colorAccum[3 * idx + 0] += (w * cloud.colors[4 * i + 0]) / 255
        colorAccum[3 * idx + 1] += (w * cloud.colors[4 * i + 1]) / 255
        colorAccum[3 * idx + 2] += (w * cloud.colors[4 * i + 2]) / 255
        depthAccum[idx] += w * zi
        weight[idx] += w
      }
    }
  }

  for (let idx = 0; idx < width * height; idx++) {
    const w = weight[idx]
    if (w > 0) {
      colorAccum[3 * idx + 0] /= w
      colorAccum[3 * idx + 1] /= w
      colorAccum[3 * idx + 2] /= w
      depthAccum[idx] /= w
    }
  }
  return { color: colorAccum, depth: depthAccum, weight }
}

/** Render one frame on the CPU; same math as the GPU path, in f64. */
export function renderCpu(
  scene: LdimScene,
  view: ViewTransform,
  t: number,
  beta: number,
  width: number,
  height: number,
): CpuFrame {
  const b0 = splatCloud(
    scene.cloud0,
    projectCloud(scene.cloud0, t, view, scene.k),
    width,
    height,
  )
  const b1 = splatCloud(
    scene.cloud1,
    projectCloud(scene.cloud1, 1 - t, view, scene.k),
    width,
    height,
  )
  const color = new Float32Array(3 * width * height)
  const coverage = new Uint8Array(width * height)
  const scale = scene.depthScale > 0 ? scene.depthScale : 1
  for (let idx = 0; idx < width * height; idx++) {
    const in0 = b0.weight[idx] > 0
    const in1 = b1.weight[idx] > 0
    if (!in0 && !in1) continue
    coverage[idx] = 1
    let w: number
    if (in0 && in1) {
      w = blendWeight(t, beta, b0.depth[idx], b1.depth[idx], scale)
    } else {
      w = in0 ? 1 : 0
    }
    for (let ch = 0; ch < 3; ch++) {
      const c = w * b0.color[3 * idx + ch] + (1 - w) * b1.color[3 * idx + ch]
      color[3 * idx + ch] = clamp(c, 0, 1)
    }
  }
  return { width, height, color, coverage }
}

/** Smallest camera-space point depth over both clouds, for dolly bounds. */
export function nearestDepth(scene: LdimScene): number {
  let zMin = Infinity
  for (const cloud of [scene.cloud0, scene.cloud1]) {
    for (let i = 0; i < cloud.count; i++) {
      const z = cloud.positions[3 * i + 2]
      if (z < zMin) zMin = z
    }
  }
  return Number.isFinite(zMin) ? zMin : 1
}
