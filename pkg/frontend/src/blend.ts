/** Time/depth cross-fade weight shared by the GPU combine pass and the CPU
 * reference renderer. The arrangement mirrors the producing renderer
 * operation for operation so both sides agree to double precision. */

const FLOAT64_TINY = 2.2250738585072014e-308

/**
 * Weight of the time-0 render when cross-fading between the endpoints.
 *
 * W = (1-t) exp(-beta d0) / ((1-t) exp(-beta d0) + t exp(-beta d1)), with
 * depths divided by depthScale so beta acts on scene-relative depth. The
 * nearer (smaller-depth) surface takes over faster. Evaluated with a
 * min-shift so the exponentials never underflow together.
 *
 * Endpoints are exact: t <= 0 returns 1, t >= 1 returns 0. With beta = 0
 * the weight is the plain linear ramp 1 - t.
 */
export function blendWeight(
  t: number,
  beta: number,
  depth0: number,
  depth1: number,
  depthScale = 1,
): number {
  if (t <= 0) return 1
  if (t >= 1) return 0
  const d0 = depth0 / depthScale
  const d1 = depth1 / depthScale
  const m = Math.min(d0, d1)
  const s0 = (1 - t) * Math.exp(-beta * (d0 - m))
  const s1 = t * Math.exp(-beta * (d1 - m))
  return s0 / Math.max(s0 + s1, FLOAT64_TINY)
}
