/** WebGL2 renderer for LDIM scenes.
 *
 * Mirrors the CPU reference pass for pass: per cloud, a depth-tested point
 * pass records the nearest sprite depth per pixel, then an additive pass
 * accumulates kernel-weighted color and depth inside the relative depth
 * band; a fullscreen combine applies the time/depth blend. Holes show the
 * background color (no fill).
 */

import { orbitView } from "./camera.js"
import { ALPHA_Z, BAND } from "./cpuref.js"
import { LdimScene, PointCloud } from "./ldim.js"
import { ViewerState } from "./state.js"

const VERT = `#version 300 es
precision highp float;
layout(location=0) in vec3 aPos;
layout(location=1) in vec4 aColor;
layout(location=2) in vec3 aFlow;
layout(location=3) in float aRadius;
uniform mat3 uR;
uniform vec3 uC;
uniform float uFlowScale;
uniform vec4 uK;        // fx, fy, cx, cy in target pixels
uniform vec2 uViewport;
uniform vec2 uZRange;   // near, far for the NDC depth ramp
out float vZ;
out float vRadius;
out float vSize;
out vec4 vColor;
void main() {
  vec3 cam = uR * ((aPos + uFlowScale * aFlow) - uC);
  vZ = cam.z;
  vColor = aColor;
  float safe = max(cam.z, 1e-6);
  vec2 px = vec2(uK.x * cam.x, uK.y * cam.y) / safe + uK.zw;
  vRadius = clamp(aRadius / safe, 1.0, 16.0);
  vSize = 2.0 * vRadius + 2.0;
  vec2 ndc = (px + 0.5) / uViewport * 2.0 - 1.0;
  float zn = (cam.z - uZRange.x) / (uZRange.y - uZRange.x) * 2.0 - 1.0;
  gl_Position = cam.z > 0.0
    ? vec4(ndc, clamp(zn, -1.0, 1.0), 1.0)
    : vec4(-2.0, -2.0, -2.0, 1.0);  // behind the camera: clipped away
  gl_PointSize = vSize;
}`

const FRAG_ZMIN = `#version 300 es
precision highp float;
in float vZ;
in float vRadius;
in float vSize;
in vec4 vColor;
out vec4 oZ;
void main() {
  vec2 off = (gl_PointCoord - 0.5) * vSize;
  if (dot(off, off) >= vRadius * vRadius) discard;
  oZ = vec4(vZ, 0.0, 0.0, 1.0);
}`

const FRAG_ACCUM = `#version 300 es
precision highp float;
uniform sampler2D uZMin;
uniform float uBand;
uniform float uAlphaZ;
in float vZ;
in float vRadius;
in float vSize;
in vec4 vColor;
layout(location=0) out vec4 oColorW;
layout(location=1) out vec4 oDepthW;
void main() {
  vec2 off = (gl_PointCoord - 0.5) * vSize;
  float d = length(off);
  if (d >= vRadius) discard;
  float zm = texelFetch(uZMin, ivec2(gl_FragCoord.xy), 0).r;
  if (vZ > zm * (1.0 + uBand)) discard;
  float w = 1.0 - d / vRadius;
  w = w * w * exp(-uAlphaZ * (vZ - zm) / zm);
  oColorW = vec4(vColor.rgb * w, w);
  oDepthW = vec4(vZ * w, 0.0, 0.0, 0.0);
}`

const VERT_QUAD = `#version 300 es
void main() {
  // Fullscreen triangle from gl_VertexID, no buffers needed.
  vec2 v = vec2((gl_VertexID << 1) & 2, gl_VertexID & 2);
  gl_Position = vec4(v * 2.0 - 1.0, 0.0, 1.0);
}`

const FRAG_COMBINE = `#version 300 es
precision highp float;
uniform sampler2D uColorW0;
uniform sampler2D uDepthW0;
uniform sampler2D uColorW1;
uniform sampler2D uDepthW1;
uniform float uT;
uniform float uBeta;
uniform float uDepthScale;
uniform float uHeight;
uniform vec3 uBackground;
out vec4 oColor;
void main() {
  // The offscreen passes use y-down pixel rows; flip for the canvas.
  ivec2 p = ivec2(int(gl_FragCoord.x), int(uHeight) - 1 - int(gl_FragCoord.y));
  vec4 a0 = texelFetch(uColorW0, p, 0);
  vec4 a1 = texelFetch(uColorW1, p, 0);
  bool in0 = a0.a > 0.0;
  bool in1 = a1.a > 0.0;
  if (!in0 && !in1) { oColor = vec4(uBackground, 1.0); return; }
  float w;
  if (!in1) { w = 1.0; }
  else if (!in0) { w = 0.0; }
  else if (uT <= 0.0) { w = 1.0; }
  else if (uT >= 1.0) { w = 0.0; }
  else {
    float d0 = texelFetch(uDepthW0, p, 0).r / a0.a / uDepthScale;
    float d1 = texelFetch(uDepthW1, p, 0).r / a1.a / uDepthScale;
    float m = min(d0, d1);
    float s0 = (1.0 - uT) * exp(-uBeta * (d0 - m));
    float s1 = uT * exp(-uBeta * (d1 - m));
    w = s0 / max(s0 + s1, 1e-30);
  }
  vec3 c0 = in0 ? a0.rgb / a0.a : vec3(0.0);
  vec3 c1 = in1 ? a1.rgb / a1.a : vec3(0.0);
  oColor = vec4(mix(c1, c0, w), 1.0);
}`

const RECORD_BYTES = 32

interface CloudResources {
  vao: WebGLVertexArrayObject
  buffer: WebGLBuffer
  count: number
  zMinTex: WebGLTexture
  zMinFbo: WebGLFramebuffer
  depthRbo: WebGLRenderbuffer
  colorWTex: WebGLTexture
  depthWTex: WebGLTexture
  accumFbo: WebGLFramebuffer
}

function compile(gl: WebGL2RenderingContext, kind: number, src: string): WebGLShader {
  const shader = gl.createShader(kind)
  if (!shader) throw new Error("shader allocation failed")
  gl.shaderSource(shader, src)
  gl.compileShader(shader)
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`)
  }
  return shader
}

function link(gl: WebGL2RenderingContext, vert: string, frag: string): WebGLProgram {
  const program = gl.createProgram()
  if (!program) throw new Error("program allocation failed")
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vert))
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, frag))
  gl.linkProgram(program)
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`)
  }
  return program
}

/** Renders a loaded scene into a canvas; one instance per canvas. */
export class Viewer {
  private readonly canvas: HTMLCanvasElement
  private gl!: WebGL2RenderingContext
  private zminProgram!: WebGLProgram
  private accumProgram!: WebGLProgram
  private combineProgram!: WebGLProgram
  private accumFormat!: number
  private clouds: CloudResources[] = []
  private scene: LdimScene | null = null
  private width = 0
  private height = 0
  contextLost = false

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas
    canvas.addEventListener("webglcontextlost", (ev) => {
      ev.preventDefault()
      this.contextLost = true
    })
    canvas.addEventListener("webglcontextrestored", () => {
      // Reload path: rebuild every GPU object from the retained scene.
      this.initContext()
      if (this.scene) this.uploadScene(this.scene)
      this.contextLost = false
    })
    this.initContext()
  }

  private initContext(): void {
    const gl = this.canvas.getContext("webgl2", {
      antialias: false,
      preserveDrawingBuffer: false,
    })
    if (!gl) throw new Error("WebGL2 is required but unavailable")
    if (!gl.getExtension("EXT_color_buffer_float")) {
      throw new Error("EXT_color_buffer_float is required but unavailable")
    }
    // 32-bit accumulation needs blendable float targets; fall back to 16-bit.
    const fullFloat = gl.getExtension("EXT_float_blend") !== null
    this.accumFormat = fullFloat ? gl.RGBA32F : gl.RGBA16F
    this.gl = gl
    this.zminProgram = link(gl, VERT, FRAG_ZMIN)
    this.accumProgram = link(gl, VERT, FRAG_ACCUM)
    this.combineProgram = link(gl, VERT_QUAD, FRAG_COMBINE)
    this.clouds = []
    this.width = 0
    this.height = 0
  }

  setScene(scene: LdimScene): void {
    this.scene = scene
    this.uploadScene(scene)
  }

  private uploadScene(scene: LdimScene): void {
    for (const c of this.clouds) this.releaseCloud(c)
    this.clouds = [scene.cloud0, scene.cloud1].map((c) => this.makeCloud(c))
    this.allocateTargets(this.canvas.width, this.canvas.height)
  }

  private makeCloud(cloud: PointCloud): CloudResources {
    const gl = this.gl
    const vao = gl.createVertexArray()
    const buffer = gl.createBuffer()
    if (!vao || !buffer) throw new Error("buffer allocation failed")
    gl.bindVertexArray(vao)
    gl.bindBuffer(gl.ARRAY_BUFFER, buffer)
    gl.bufferData(gl.ARRAY_BUFFER, cloud.records, gl.STATIC_DRAW)
    gl.enableVertexAttribArray(0)
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, RECORD_BYTES, 0)
    gl.enableVertexAttribArray(1)
    gl.vertexAttribPointer(1, 4, gl.UNSIGNED_BYTE, true, RECORD_BYTES, 12)
    gl.enableVertexAttribArray(2)
    gl.vertexAttribPointer(2, 3, gl.FLOAT, false, RECORD_BYTES, 16)
    gl.enableVertexAttribArray(3)
    gl.vertexAttribPointer(3, 1, gl.FLOAT, false, RECORD_BYTES, 28)
    gl.bindVertexArray(null)
    return {
      vao,
      buffer,
      count: cloud.count,
      zMinTex: gl.createTexture()!,
      zMinFbo: gl.createFramebuffer()!,
      depthRbo: gl.createRenderbuffer()!,
      colorWTex: gl.createTexture()!,
      depthWTex: gl.createTexture()!,
      accumFbo: gl.createFramebuffer()!,
    }
  }

  private releaseCloud(c: CloudResources): void {
    const gl = this.gl
    gl.deleteVertexArray(c.vao)
    gl.deleteBuffer(c.buffer)
    gl.deleteTexture(c.zMinTex)
    gl.deleteTexture(c.colorWTex)
    gl.deleteTexture(c.depthWTex)
    gl.deleteFramebuffer(c.zMinFbo)
    gl.deleteFramebuffer(c.accumFbo)
    gl.deleteRenderbuffer(c.depthRbo)
  }

  private allocateTargets(width: number, height: number): void {
    const gl = this.gl
    if (width <= 0 || height <= 0) {
      this.width = 0
      this.height = 0
      return
    }
    this.width = width
    this.height = height
    for (const c of this.clouds) {
      const nearest = (tex: WebGLTexture, internal: number) => {
        gl.bindTexture(gl.TEXTURE_2D, tex)
        gl.texStorage2D(gl.TEXTURE_2D, 1, internal, width, height)
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST)
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST)
      }
      // texStorage2D is immutable; recreate textures on resize.
      gl.deleteTexture(c.zMinTex)
      gl.deleteTexture(c.colorWTex)
      gl.deleteTexture(c.depthWTex)
      gl.deleteRenderbuffer(c.depthRbo)
      c.zMinTex = gl.createTexture()!
      c.colorWTex = gl.createTexture()!
      c.depthWTex = gl.createTexture()!
      c.depthRbo = gl.createRenderbuffer()!
      nearest(c.zMinTex, gl.R32F)
      nearest(c.colorWTex, this.accumFormat)
      nearest(c.depthWTex, this.accumFormat)
      gl.bindRenderbuffer(gl.RENDERBUFFER, c.depthRbo)
      gl.renderbufferStorage(gl.RENDERBUFFER, gl.DEPTH_COMPONENT24, width, height)

      gl.bindFramebuffer(gl.FRAMEBUFFER, c.zMinFbo)
      gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0,
        gl.TEXTURE_2D, c.zMinTex, 0)
      gl.framebufferRenderbuffer(gl.FRAMEBUFFER, gl.DEPTH_ATTACHMENT,
        gl.RENDERBUFFER, c.depthRbo)

      gl.bindFramebuffer(gl.FRAMEBUFFER, c.accumFbo)
      gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0,
        gl.TEXTURE_2D, c.colorWTex, 0)
      gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT1,
        gl.TEXTURE_2D, c.depthWTex, 0)
      gl.drawBuffers([gl.COLOR_ATTACHMENT0, gl.COLOR_ATTACHMENT1])
    }
    gl.bindFramebuffer(gl.FRAMEBUFFER, null)
  }

  /** Intrinsics remapped from bundle pixels to the current canvas size. */
  private targetIntrinsics(): [number, number, number, number] {
    const k = this.scene!.k
    const baseW = Math.round(2 * k[2] + 1)
    const baseH = Math.round(2 * k[5] + 1)
    const s = Math.min(this.width / baseW, this.height / baseH)
    const fx = k[0] * s
    const fy = k[4] * s
    const cx = (k[2] + 0.5) * s - 0.5 + (this.width - baseW * s) / 2
    const cy = (k[5] + 0.5) * s - 0.5 + (this.height - baseH * s) / 2
    return [fx, fy, cx, cy]
  }

  render(state: ViewerState): void {
    if (!this.scene || this.contextLost) return
    const gl = this.gl
    const w = this.canvas.width
    const h = this.canvas.height
    if (w === 0 || h === 0) return
    if (w !== this.width || h !== this.height) this.allocateTargets(w, h)

    const scene = this.scene
    const view = orbitView(
      { azimuth: state.azimuth, elevation: state.elevation, dolly: state.dolly },
      scene.depthScale || 1,
    )
    const kTarget = this.targetIntrinsics()
    const zFar = 8 * (scene.depthScale || 1)
    const flowScales = [state.t, 1 - state.t]
    gl.viewport(0, 0, w, h)
    gl.disable(gl.SCISSOR_TEST)

    for (let ci = 0; ci < this.clouds.length; ci++) {
      const c = this.clouds[ci]
      const setShared = (program: WebGLProgram) => {
        gl.useProgram(program)
        gl.uniformMatrix3fv(gl.getUniformLocation(program, "uR"), true,
          Float32Array.from(view.r))
        gl.uniform3f(gl.getUniformLocation(program, "uC"),
          view.c[0], view.c[1], view.c[2])
        gl.uniform1f(gl.getUniformLocation(program, "uFlowScale"), flowScales[ci])
        gl.uniform4f(gl.getUniformLocation(program, "uK"),
          kTarget[0], kTarget[1], kTarget[2], kTarget[3])
        gl.uniform2f(gl.getUniformLocation(program, "uViewport"), w, h)
        gl.uniform2f(gl.getUniformLocation(program, "uZRange"), 1e-3, zFar)
      }

      // Pass 1: nearest depth per pixel via the hardware depth test. Pixels
      // left at the sentinel are never read back: any accumulation fragment
      // covering a pixel also wrote its depth here in this pass.
      gl.bindFramebuffer(gl.FRAMEBUFFER, c.zMinFbo)
      gl.clearBufferfv(gl.COLOR, 0, [3.4e38, 0, 0, 0])
      gl.clearBufferfv(gl.DEPTH, 0, [1])
      gl.enable(gl.DEPTH_TEST)
      gl.depthFunc(gl.LESS)
      gl.disable(gl.BLEND)
      setShared(this.zminProgram)
      gl.bindVertexArray(c.vao)
      if (c.count > 0) gl.drawArrays(gl.POINTS, 0, c.count)

      // Pass 2: additive kernel-weighted accumulation inside the band.
      gl.bindFramebuffer(gl.FRAMEBUFFER, c.accumFbo)
      gl.drawBuffers([gl.COLOR_ATTACHMENT0, gl.COLOR_ATTACHMENT1])
      gl.clearBufferfv(gl.COLOR, 0, [0, 0, 0, 0])
      gl.clearBufferfv(gl.COLOR, 1, [0, 0, 0, 0])
      gl.disable(gl.DEPTH_TEST)
      gl.enable(gl.BLEND)
      gl.blendFunc(gl.ONE, gl.ONE)
      setShared(this.accumProgram)
      gl.activeTexture(gl.TEXTURE0)
      gl.bindTexture(gl.TEXTURE_2D, c.zMinTex)
      gl.uniform1i(gl.getUniformLocation(this.accumProgram, "uZMin"), 0)
      gl.uniform1f(gl.getUniformLocation(this.accumProgram, "uBand"), BAND)
      gl.uniform1f(gl.getUniformLocation(this.accumProgram, "uAlphaZ"), ALPHA_Z)
      if (c.count > 0) gl.drawArrays(gl.POINTS, 0, c.count)
      gl.bindVertexArray(null)
    }

    // Combine both clouds into the canvas.
    gl.bindFramebuffer(gl.FRAMEBUFFER, null)
    gl.disable(gl.BLEND)
    gl.disable(gl.DEPTH_TEST)
    gl.useProgram(this.combineProgram)
    const bind = (name: string, unit: number, tex: WebGLTexture) => {
      gl.activeTexture(gl.TEXTURE0 + unit)
      gl.bindTexture(gl.TEXTURE_2D, tex)
      gl.uniform1i(gl.getUniformLocation(this.combineProgram, name), unit)
    }
    bind("uColorW0", 0, this.clouds[0].colorWTex)
    bind("uDepthW0", 1, this.clouds[0].depthWTex)
    bind("uColorW1", 2, this.clouds[1].colorWTex)
    bind("uDepthW1", 3, this.clouds[1].depthWTex)
    gl.uniform1f(gl.getUniformLocation(this.combineProgram, "uT"), state.t)
    gl.uniform1f(gl.getUniformLocation(this.combineProgram, "uBeta"), state.beta)
    gl.uniform1f(gl.getUniformLocation(this.combineProgram, "uDepthScale"),
      scene.depthScale || 1)
    gl.uniform1f(gl.getUniformLocation(this.combineProgram, "uHeight"), h)
    gl.uniform3f(gl.getUniformLocation(this.combineProgram, "uBackground"),
      0.08, 0.08, 0.1)
    gl.drawArrays(gl.TRIANGLES, 0, 3)
  }
}
