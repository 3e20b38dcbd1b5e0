/** Live round trip against the real segmentation service at desk scale:
 * a click must reach the screen as heatmap colors in under one second. */

import { ChildProcess, spawn } from "node:child_process";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api";
import { SegmentationController, ControllerHooks } from "../src/controller";
import { pickVertex } from "../src/picking";
import { MeshPayload, NEGATIVE, POSITIVE } from "../src/types";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const SCRIPT = path.join(HERE, "..", "scripts", "dev_server.py");
const W = 800;
const H = 600;

let proc: ChildProcess | null = null;
let api: ApiClient;
let mesh: MeshPayload;

/** Orthographic projection plus a crude nearest-vertex depth buffer; the
 * browser viewer does this with the camera and a raycaster. */
function project(m: MeshPayload): { screen: Float32Array; depthAt: (x: number, y: number) => number | null } {
  const screen = new Float32Array(m.n * 3);
  for (let i = 0; i < m.n; i++) {
    const [x, y, z] = m.vertices[i];
    screen[3 * i] = ((x + 1.4) / 2.8) * W;
    screen[3 * i + 1] = ((1.4 - y) / 2.8) * H;
    screen[3 * i + 2] = 2.5 - z; // viewed from +z
  }
  const depthAt = (px: number, py: number): number | null => {
    let best: number | null = null;
    for (let i = 0; i < m.n; i++) {
      const dx = screen[3 * i] - px;
      const dy = screen[3 * i + 1] - py;
      if (dx * dx + dy * dy > 36) continue;
      const d = screen[3 * i + 2];
      if (best === null || d < best) best = d;
    }
    return best;
  };
  return { screen, depthAt };
}

function recorder() {
  const rec = {
    colors: [] as Float32Array[],
    errors: [] as (string | null)[],
    hooks: null as unknown as ControllerHooks,
  };
  rec.hooks = {
    renderColors: (c) => rec.colors.push(Float32Array.from(c)),
    renderClicks: () => {},
    showError: (m) => rec.errors.push(m),
    showThreshold: () => {},
  };
  return rec;
}

beforeAll(async () => {
  proc = spawn("python3", [SCRIPT], { stdio: ["ignore", "pipe", "pipe"] });
  let stderr = "";
  proc.stderr?.on("data", (d: Buffer) => (stderr += String(d)));
  const port = await new Promise<number>((resolve, reject) => {
    let out = "";
    const timer = setTimeout(
      () => reject(new Error(`service start timeout; stderr: ${stderr}`)),
      45000,
    );
    proc!.stdout?.on("data", (d: Buffer) => {
      out += String(d);
      const line = out.split("\n")[0];
      if (out.includes("\n")) {
        clearTimeout(timer);
        resolve(parseInt(line, 10));
      }
    });
    proc!.on("exit", (code: number | null) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code}); stderr: ${stderr}`));
    });
  });
  api = new ApiClient(`http://127.0.0.1:${port}`);
  mesh = await api.mesh();
}, 60000);

afterAll(() => {
  proc?.kill("SIGINT");
});

describe("live service round trip", () => {
  it("desk-scale mesh loads with the advertised shape", async () => {
    expect(mesh.n).toBeGreaterThan(2000); // desk scale
    expect(mesh.vertices).toHaveLength(mesh.n);
    expect(mesh.faces).toHaveLength(mesh.m);
    const info = await api.model();
    expect(info.model_id).toBe(mesh.model_id);
    expect(info.n_vertices).toBe(mesh.n);
  });

  it("click to rendered heatmap in under one second", async () => {
    const { screen, depthAt } = project(mesh);
    const rec = recorder();
    const controller = new SegmentationController(api, rec.hooks, {
      debounceMs: 10,
      vertexCount: mesh.n,
    });

    // aim the pointer at a known front vertex's pixel
    const target = 7;
    const px = screen[3 * target];
    const py = screen[3 * target + 1];

    const t0 = performance.now();
    const vertex = pickVertex(px, py, screen, depthAt, {
      radius: 14,
      epsilon: 0.05,
    });
    expect(vertex).toBeGreaterThanOrEqual(0);
    controller.onPick(vertex, POSITIVE);
    await controller.settle();
    const elapsed = performance.now() - t0;

    expect(rec.colors).toHaveLength(1);
    expect(rec.colors[0].length).toBe(3 * mesh.n);
    expect(controller.acknowledged()).toEqual({
      version: 1,
      clicks: [{ vertex, sign: POSITIVE }],
    });
    const resp = controller.response()!;
    expect(resp.probabilities).toHaveLength(mesh.n);
    expect(resp.threshold_otsu).toBeGreaterThanOrEqual(0);
    expect(resp.threshold_otsu).toBeLessThanOrEqual(1);
    // eslint-disable-next-line no-console
    console.log(`round trip: ${elapsed.toFixed(1)} ms (server ${resp.elapsed_ms.toFixed(1)} ms)`);
    expect(elapsed).toBeLessThan(1000);
  }, 15000);

  it("refining with a negative click round trips too", async () => {
    const rec = recorder();
    const controller = new SegmentationController(api, rec.hooks, {
      debounceMs: 5,
      vertexCount: mesh.n,
    });
    controller.onPick(7, POSITIVE);
    controller.onPick(1200, NEGATIVE);
    await controller.settle();
    expect(controller.acknowledged()?.clicks).toEqual([
      { vertex: 7, sign: POSITIVE },
      { vertex: 1200, sign: NEGATIVE },
    ]);
    expect(rec.colors).toHaveLength(1); // debounce collapsed both clicks
  });

  it("client refuses to send zero-positive click sets", async () => {
    const rec = recorder();
    const controller = new SegmentationController(api, rec.hooks, {
      debounceMs: 5,
      vertexCount: mesh.n,
    });
    controller.onPick(42, NEGATIVE);
    await controller.settle();
    expect(rec.colors).toHaveLength(0);
    expect(rec.errors.at(-1)).toMatch(/positive/);
  });

  it("service 400s surface as ApiError with the server message", async () => {
    await expect(
      api.segment({ version: 1, clicks: [{ vertex: -5, sign: POSITIVE }] }),
    ).rejects.toSatisfy((err: unknown) => {
      return err instanceof ApiError && err.status === 400 && err.message.length > 0;
    });
  });
});
