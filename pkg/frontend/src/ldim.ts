/** Reader for the LDIM v1 point-cloud bundle.
 *
 * Layout (little-endian):
 *   bytes 0..3    magic "LDIM"
 *   bytes 4..7    u32 version, must be 1
 *   bytes 8..43   9 x f32 intrinsics, row-major
 *   bytes 44..47  u32 point count, endpoint 0
 *   bytes 48..51  u32 point count, endpoint 1
 *   then count0 + count1 records of 32 bytes each:
 *     f32 x, y, z      camera-space position at the endpoint
 *     u8  r, g, b, a   color
 *     f32 ux, uy, uz   scene flow toward the other endpoint
 *     f32 radius       world radius; pixel radius at depth z is radius / z
 */

const MAGIC = 0x4c44494d // "LDIM" read as big-endian u32 over bytes 0..3
const HEADER_BYTES = 52
const RECORD_BYTES = 32

export interface PointCloud {
  count: number
  /** xyz per point, length 3 * count. */
  positions: Float32Array
  /** rgba per point, length 4 * count, 0..255. */
  colors: Uint8Array
  /** scene flow xyz per point, length 3 * count. */
  flows: Float32Array
  /** world radius per point, length count. */
  radii: Float32Array
  /** raw interleaved records, ready for a single GPU buffer upload. */
  records: ArrayBuffer
}

export interface LdimScene {
  /** 3x3 intrinsics, row-major. */
  k: Float64Array
  cloud0: PointCloud
  cloud1: PointCloud
  /** median camera-space depth over both clouds, 0 for an empty bundle. */
  depthScale: number
}

function parseCloud(buf: ArrayBuffer, offset: number, count: number): PointCloud {
  const view = new DataView(buf, offset, count * RECORD_BYTES)
  const positions = new Float32Array(3 * count)
  const colors = new Uint8Array(4 * count)
  const flows = new Float32Array(3 * count)
  const radii = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    const base = i * RECORD_BYTES
    positions[3 * i + 0] = view.getFloat32(base + 0, true)
    positions[3 * i + 1] = view.getFloat32(base + 4, true)
    positions[3 * i + 2] = view.getFloat32(base + 8, true)
    colors[4 * i + 0] = view.getUint8(base + 12)
    colors[4 * i + 1] = view.getUint8(base + 13)
    colors[4 * i + 2] = view.getUint8(base + 14)
    colors[4 * i + 3] = view.getUint8(base + 15)
    flows[3 * i + 0] = view.getFloat32(base + 16, true)
    flows[3 * i + 1] = view.getFloat32(base + 20, true)
    flows[3 * i + 2] = view.getFloat32(base + 24, true)
    radii[i] = view.getFloat32(base + 28, true)
  }
  return {
    count,
    positions,
    colors,
    flows,
    radii,
    records: buf.slice(offset, offset + count * RECORD_BYTES),
  }
}

function medianDepth(c0: PointCloud, c1: PointCloud): number {
  const n = c0.count + c1.count
  if (n === 0) return 0
  const z = new Float64Array(n)
  for (let i = 0; i < c0.count; i++) z[i] = c0.positions[3 * i + 2]
  for (let i = 0; i < c1.count; i++) z[c0.count + i] = c1.positions[3 * i + 2]
  z.sort()
  // Match numpy's median: mean of the two middle values for even lengths.
  const mid = n >> 1
  return n % 2 === 1 ? z[mid] : 0.5 * (z[mid - 1] + z[mid])
}

/** Parse an LDIM v1 bundle; throws with a user-facing message on bad input. */
export function parseLdim(buf: ArrayBuffer): LdimScene {
  if (buf.byteLength < HEADER_BYTES) {
    throw new Error(
      `not an LDIM bundle: ${buf.byteLength} bytes is shorter than the header`,
    )
  }
  const view = new DataView(buf)
  if (view.getUint32(0, false) !== MAGIC) {
    throw new Error("not an LDIM bundle: bad magic")
  }
  const version = view.getUint32(4, true)
  if (version !== 1) {
    throw new Error(`unsupported LDIM version ${version}; this viewer reads version 1`)
  }
  const k = new Float64Array(9)
  for (let i = 0; i < 9; i++) k[i] = view.getFloat32(8 + 4 * i, true)
  const count0 = view.getUint32(44, true)
  const count1 = view.getUint32(48, true)
  const expected = HEADER_BYTES + (count0 + count1) * RECORD_BYTES
  if (buf.byteLength !== expected) {
    throw new Error(
      `truncated or oversized LDIM bundle: header promises ${expected} bytes, ` +
        `file has ${buf.byteLength}`,
    )
  }
  const cloud0 = parseCloud(buf, HEADER_BYTES, count0)
  const cloud1 = parseCloud(buf, HEADER_BYTES + count0 * RECORD_BYTES, count1)
  return { k, cloud0, cloud1, depthScale: medianDepth(cloud0, cloud1) }
}
