/** Browser entry point: loads a bundle, wires input events to the state
 * reducers, and drives the render loop. */

import { nearestDepth } from "./cpuref.js"
import { LdimScene, parseLdim } from "./ldim.js"
import {
  applyDrag,
  applyWheel,
  initialState,
  SceneBounds,
  setBeta,
  setLoopMode,
  setT,
  tick,
  togglePlay,
  ViewerState,
} from "./state.js"
import { Viewer } from "./viewer.js"

function element<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id)
  if (!el) throw new Error(`missing element #${id}`)
  return el as T
}

const canvas = element<HTMLCanvasElement>("view")
const filePicker = element<HTMLInputElement>("file")
const tSlider = element<HTMLInputElement>("t-slider")
const betaSlider = element<HTMLInputElement>("beta-slider")
const playButton = element<HTMLButtonElement>("play")
const loopSelect = element<HTMLSelectElement>("loop-mode")
const statusLine = element<HTMLElement>("status")
const errorBanner = element<HTMLElement>("error")

let viewer: Viewer
let scene: LdimScene | null = null
let bounds: SceneBounds = { depthScale: 1, nearestZ: 1 }
let state: ViewerState = initialState(10)

function showError(message: string): void {
  errorBanner.textContent = message
  errorBanner.style.display = message ? "block" : "none"
}

function loadBundle(buf: ArrayBuffer, name: string): void {
  try {
    scene = parseLdim(buf)
    bounds = {
      depthScale: scene.depthScale > 0 ? scene.depthScale : 1,
      nearestZ: nearestDepth(scene),
    }
    state = { ...initialState(state.beta), beta: state.beta }
    viewer.setScene(scene)
    showError("")
    statusLine.textContent =
      `${name}: ${scene.cloud0.count} + ${scene.cloud1.count} points, ` +
      `median depth ${scene.depthScale.toFixed(3)}`
  } catch (err) {
    scene = null
    showError(err instanceof Error ? err.message : String(err))
  }
}

async function loadFromUrl(url: string): Promise<void> {
  try {
    const response = await fetch(url)
    if (!response.ok) throw new Error(`fetch failed: HTTP ${response.status}`)
    loadBundle(await response.arrayBuffer(), url)
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err))
  }
}

function syncControls(): void {
  tSlider.value = String(state.t)
  betaSlider.value = String(state.beta)
  playButton.textContent = state.playing ? "Pause" : "Play"
}

filePicker.addEventListener("change", async () => {
  const file = filePicker.files?.[0]
  if (file) loadBundle(await file.arrayBuffer(), file.name)
})

let dragging = false
let lastX = 0
let lastY = 0
canvas.addEventListener("pointerdown", (ev) => {
  dragging = true
  lastX = ev.clientX
  lastY = ev.clientY
  canvas.setPointerCapture(ev.pointerId)
})
canvas.addEventListener("pointermove", (ev) => {
  if (!dragging) return
  state = applyDrag(state, ev.clientX - lastX, ev.clientY - lastY)
  lastX = ev.clientX
  lastY = ev.clientY
})
canvas.addEventListener("pointerup", () => {
  dragging = false
})
canvas.addEventListener(
  "wheel",
  (ev) => {
    ev.preventDefault()
    state = applyWheel(state, bounds, ev.deltaY)
  },
  { passive: false },
)

tSlider.addEventListener("input", () => {
  state = setT(state, Number(tSlider.value))
  syncControls()
})
betaSlider.addEventListener("input", () => {
  state = setBeta(state, Number(betaSlider.value))
})
playButton.addEventListener("click", () => {
  state = togglePlay(state)
  syncControls()
})
loopSelect.addEventListener("change", () => {
  state = setLoopMode(state,
    loopSelect.value === "loop" ? "loop" : "pingpong")
})

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return
  switch (ev.key) {
    case " ":
      ev.preventDefault()
      state = togglePlay(state)
      break
    case "ArrowLeft":
      state = setT(state, state.t - 0.02)
      break
    case "ArrowRight":
      state = setT(state, state.t + 0.02)
      break
    case "0":
      state = setT(state, 0)
      break
    case "1":
      state = setT(state, 1)
      break
    case "r":
      state = { ...state, azimuth: 0, elevation: 0, dolly: 0 }
      break
    default:
      return
  }
  syncControls()
})

function resizeCanvas(): void {
  const dpr = window.devicePixelRatio || 1
  const w = Math.floor(canvas.clientWidth * dpr)
  const h = Math.floor(canvas.clientHeight * dpr)
  if (w !== canvas.width || h !== canvas.height) {
    canvas.width = w
    canvas.height = h
  }
}

let lastFrame = performance.now()
function frame(now: number): void {
  const dt = (now - lastFrame) / 1000
  lastFrame = now
  if (state.playing) {
    state = tick(state, dt)
    syncControls()
  }
  resizeCanvas()
  viewer.render(state)
  if (scene) {
    statusLine.textContent =
      `t = ${state.t.toFixed(3)}  beta = ${state.beta.toFixed(1)}  ` +
      `azimuth ${state.azimuth.toFixed(2)}  elevation ${state.elevation.toFixed(2)}  ` +
      `dolly ${state.dolly.toFixed(2)}`
  }
  requestAnimationFrame(frame)
}

try {
  viewer = new Viewer(canvas)
  const param = new URLSearchParams(window.location.search).get("bundle")
  if (param) void loadFromUrl(param)
  syncControls()
  requestAnimationFrame(frame)
} catch (err) {
  showError(err instanceof Error ? err.message : String(err))
}
