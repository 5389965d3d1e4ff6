/** Minimal 3-vector / 3x3 matrix helpers (row-major, no dependencies). */

export type Vec3 = [number, number, number]
export type Mat3 = Float64Array // 9 entries, row-major

export function mat3Identity(): Mat3 {
  return new Float64Array([1, 0, 0, 0, 1, 0, 0, 0, 1])
}

export function mat3MulVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ]
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ]
}

export function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2])
  if (n === 0) throw new Error("cannot normalize a zero vector")
  return [v[0] / n, v[1] / n, v[2] / n]
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/** Pinhole projection with a row-major intrinsics matrix. */
export function projectPoint(
  k: ArrayLike<number>,
  x: number,
  y: number,
  z: number,
): [number, number] {
  return [(k[0] * x) / z + k[2], (k[4] * y) / z + k[5]]
}

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(Math.max(x, lo), hi)
}
