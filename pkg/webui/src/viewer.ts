/** three.js viewer: renders the mesh, projects vertices for picking, and
 * answers depth probes by ray casting against the rendered surface. */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { MeshPayload, POSITIVE, UiClick } from "./types";

const POSITIVE_MARK = new THREE.Color(0.1, 0.75, 0.2);
const NEGATIVE_MARK = new THREE.Color(0.9, 0.15, 0.1);

export class MeshViewer {
  readonly vertexCount: number;
  readonly boundingRadius: number;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly controls: OrbitControls;
  private readonly raycaster = new THREE.Raycaster();
  private readonly surface: THREE.Mesh;
  private readonly colorAttr: THREE.BufferAttribute;
  private readonly markers: THREE.Points;
  private readonly markerGeometry = new THREE.BufferGeometry();
  private running = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    mesh: MeshPayload,
  ) {
    this.vertexCount = mesh.n;
    const positions = new Float32Array(mesh.n * 3);
    mesh.vertices.forEach((v, i) => positions.set(v, 3 * i));
    const indices = new Uint32Array(mesh.m * 3);
    mesh.faces.forEach((f, i) => indices.set(f, 3 * i));

    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(new THREE.BufferAttribute(indices, 1));
    geometry.computeVertexNormals();
    geometry.computeBoundingSphere();
    this.boundingRadius = geometry.boundingSphere?.radius ?? 1;

    const colors = new Float32Array(mesh.n * 3).fill(1);
    this.colorAttr = new THREE.BufferAttribute(colors, 3);
    geometry.setAttribute("color", this.colorAttr);

    this.surface = new THREE.Mesh(
      geometry,
      new THREE.MeshLambertMaterial({ vertexColors: true }),
    );
    this.scene.add(this.surface);
    this.scene.background = new THREE.Color(0x20242b);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));

    this.camera = new THREE.PerspectiveCamera(50, 1, 0.01, 100);
    this.camera.position.set(0, 0.4, 3.0 * this.boundingRadius);
    const headlight = new THREE.DirectionalLight(0xffffff, 1.6);
    this.camera.add(headlight);
    this.scene.add(this.camera);

    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;

    this.markerGeometry.setAttribute(
      "position",
      new THREE.BufferAttribute(new Float32Array(0), 3),
    );
    this.markerGeometry.setAttribute(
      "color",
      new THREE.BufferAttribute(new Float32Array(0), 3),
    );
    this.markers = new THREE.Points(
      this.markerGeometry,
      new THREE.PointsMaterial({
        size: 12,
        sizeAttenuation: false,
        vertexColors: true,
        depthTest: false,
      }),
    );
    this.markers.renderOrder = 1;
    this.scene.add(this.markers);
    this.resize();
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    const tick = () => {
      if (!this.running) return;
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  stop(): void {
    this.running = false;
  }

  resize(): void {
    const w = this.canvas.clientWidth || 1;
    const h = this.canvas.clientHeight || 1;
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(w, h, false);
  }

  setColors(colors: Float32Array): void {
    (this.colorAttr.array as Float32Array).set(colors);
    this.colorAttr.needsUpdate = true;
  }

  markClicks(clicks: readonly UiClick[]): void {
    const pos = new Float32Array(clicks.length * 3);
    const col = new Float32Array(clicks.length * 3);
    const verts = this.surface.geometry.getAttribute("position");
    clicks.forEach((c, i) => {
      pos[3 * i] = verts.getX(c.vertex);
      pos[3 * i + 1] = verts.getY(c.vertex);
      pos[3 * i + 2] = verts.getZ(c.vertex);
      const tint = c.sign === POSITIVE ? POSITIVE_MARK : NEGATIVE_MARK;
      col[3 * i] = tint.r;
      col[3 * i + 1] = tint.g;
      col[3 * i + 2] = tint.b;
    });
    this.markerGeometry.setAttribute("position", new THREE.BufferAttribute(pos, 3));
    this.markerGeometry.setAttribute("color", new THREE.BufferAttribute(col, 3));
    this.markerGeometry.computeBoundingSphere();
  }

  /** Packed [x, y, depth] per vertex in canvas CSS pixels; NaN when the
   * vertex projects outside the frustum. Depth is world distance from the
   * camera, matching surfaceDepthAt. */
  screenVertices(): Float32Array {
    this.camera.updateMatrixWorld();
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    const verts = this.surface.geometry.getAttribute("position");
    const out = new Float32Array(this.vertexCount * 3);
    const v = new THREE.Vector3();
    for (let i = 0; i < this.vertexCount; i++) {
      v.set(verts.getX(i), verts.getY(i), verts.getZ(i));
      const depth = v.distanceTo(this.camera.position);
      v.project(this.camera);
      if (v.z < -1 || v.z > 1 || !Number.isFinite(v.x) || !Number.isFinite(v.y)) {
        out[3 * i] = NaN;
        out[3 * i + 1] = NaN;
        out[3 * i + 2] = NaN;
        continue;
      }
      out[3 * i] = ((v.x + 1) / 2) * w;
      out[3 * i + 1] = ((1 - v.y) / 2) * h;
      out[3 * i + 2] = depth;
    }
    return out;
  }

  /** Distance from the camera to the first surface hit through a canvas
   * pixel, or null over background. */
  surfaceDepthAt(x: number, y: number): number | null {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    const ndc = new THREE.Vector2((x / w) * 2 - 1, 1 - (y / h) * 2);
    this.raycaster.setFromCamera(ndc, this.camera);
    const hits = this.raycaster.intersectObject(this.surface, false);
    return hits.length > 0 ? hits[0].distance : null;
  }

  /** Depth slack scaled to the mesh so picking tolerates interpolation. */
  pickEpsilon(): number {
    return 0.02 * this.boundingRadius;
  }
}
