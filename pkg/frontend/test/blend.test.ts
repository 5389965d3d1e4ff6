import { describe, expect, it } from "vitest"

import { blendWeight } from "../src/blend.js"

/** Deterministic 32-bit PRNG so property tests are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) | 0
    let t = Math.imul(a ^ (a >>> 15), 1 | a)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Independent scalar evaluation through the logistic form. */
function oracle(t: number, beta: number, d0: number, d1: number, s: number): number {
  if (t <= 0) return 1
  if (t >= 1) return 0
  let r = Math.log(t / (1 - t)) - (beta * (d1 - d0)) / s
  r = Math.min(Math.max(r, -700), 700)
  return 1 / (1 + Math.exp(r))
}

describe("blendWeight", () => {
  it("reproduces the worked value at (t=0.25, beta=1, d0=1, d1=2)", () => {
    const w = blendWeight(0.25, 1, 1, 2)
    expect(Math.abs(w - 0.890768227426964)).toBeLessThan(1e-12)
    expect(Math.abs(w - 0.89077)).toBeLessThan(1e-5)
  })

  it("is exact at the endpoints", () => {
    expect(blendWeight(0, 5, 1, 2)).toBe(1)
    expect(blendWeight(1, 5, 1, 2)).toBe(0)
    expect(blendWeight(-0.5, 5, 1, 2)).toBe(1)
    expect(blendWeight(1.5, 5, 1, 2)).toBe(0)
  })

  it("reduces to the linear ramp at beta = 0", () => {
    const rand = mulberry32(1)
    for (let i = 0; i < 200; i++) {
      const t = rand()
      expect(Math.abs(blendWeight(t, 0, rand() * 9 + 1, rand() * 9 + 1) - (1 - t)))
        .toBeLessThan(1e-12)
    }
  })

  it("matches an independent scalar oracle on random tuples", () => {
    const rand = mulberry32(2)
    let worst = 0
    for (let i = 0; i < 1000; i++) {
      const t = rand()
      const beta = rand() * 20
      const d0 = rand() * 10 + 0.1
      const d1 = rand() * 10 + 0.1
      const s = rand() * 5 + 0.5
      const w = blendWeight(t, beta, d0, d1, s)
      worst = Math.max(worst, Math.abs(w - oracle(t, beta, d0, d1, s)))
      expect(w).toBeGreaterThanOrEqual(0)
      expect(w).toBeLessThanOrEqual(1)
    }
    expect(worst).toBeLessThan(1e-6)
  })

  it("decreases monotonically in t for fixed depths", () => {
    let prev = Infinity
    for (let i = 0; i <= 100; i++) {
      const w = blendWeight(i / 100, 8, 2, 3, 2.5)
      expect(w).toBeLessThanOrEqual(prev + 1e-15)
      prev = w
    }
  })

  it("favors the nearer surface: d0 <= d1 iff w >= 1 - t", () => {
    const rand = mulberry32(3)
    for (let i = 0; i < 500; i++) {
      const t = 0.01 + rand() * 0.98
      const beta = rand() * 15 + 0.01
      const d0 = rand() * 10 + 0.1
      const d1 = rand() * 10 + 0.1
      const w = blendWeight(t, beta, d0, d1)
      if (d0 < d1) expect(w).toBeGreaterThan(1 - t - 1e-12)
      if (d0 > d1) expect(w).toBeLessThan(1 - t + 1e-12)
    }
  })

  it("saturates without NaN for extreme beta", () => {
    expect(blendWeight(0.5, 1e6, 1, 2, 1)).toBe(1)
    expect(blendWeight(0.5, 1e6, 2, 1, 1)).toBe(0)
    expect(Number.isFinite(blendWeight(0.999999, 1e4, 5, 5.0001, 0.01))).toBe(true)
  })
})
