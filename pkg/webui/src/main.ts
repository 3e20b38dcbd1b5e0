/** Browser entry point: load the mesh, wire the viewer, panel, and
 * controller together. The service's probabilities are authoritative;
 * everything here is presentation plus vertex picking. */

import { ApiClient } from "./api";
import { SegmentationController } from "./controller";
import { pickVertex } from "./picking";
import { NEGATIVE, POSITIVE, UiClick } from "./types";
import { MeshViewer } from "./viewer";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const api = new ApiClient(base);

  const canvas = el<HTMLCanvasElement>("viewport");
  const status = el<HTMLElement>("status");
  const clickList = el<HTMLUListElement>("click-list");
  const slider = el<HTMLInputElement>("threshold");
  const sliderLabel = el<HTMLElement>("threshold-value");
  const binarize = el<HTMLInputElement>("binarize");

  status.textContent = "loading mesh...";
  const mesh = await api.mesh();
  const viewer = new MeshViewer(canvas, mesh);
  viewer.start();
  window.addEventListener("resize", () => viewer.resize());
  status.textContent = `${mesh.n} vertices, model ${mesh.model_id.slice(0, 12)}`;

  let sliderHeld = false;
  const controller = new SegmentationController(
    api,
    {
      renderColors: (colors) => viewer.setColors(colors),
      renderClicks: (clicks) => {
        viewer.markClicks(clicks);
        renderClickPanel(clicks);
      },
      showError: (message) => {
        status.classList.toggle("error", message !== null);
        if (message !== null) status.textContent = message;
        else {
          const r = controller.response();
          status.textContent = r
            ? `segmented in ${r.elapsed_ms.toFixed(1)} ms`
            : "click the mesh to segment (shift-click = negative)";
        }
      },
      showThreshold: (value, degenerate, source) => {
        if (source === "otsu" && !sliderHeld) slider.value = value.toFixed(3);
        sliderLabel.textContent =
          `${value.toFixed(3)}${source === "otsu" ? " (otsu)" : ""}` +
          (degenerate ? " [degenerate]" : "");
      },
    },
    { vertexCount: mesh.n },
  );

  function renderClickPanel(clicks: readonly UiClick[]): void {
    clickList.replaceChildren(
      ...[...clicks]
        .sort((a, b) => a.order - b.order)
        .map((c) => {
          const li = document.createElement("li");
          li.textContent = `#${c.order} vertex ${c.vertex}`;
          li.className = c.sign;
          return li;
        }),
    );
  }

  // Click = positive, shift-click or right-click = negative. A drag (orbit)
  // is not a click: require the pointer to stay put.
  let downAt: { x: number; y: number } | null = null;
  canvas.addEventListener("pointerdown", (ev) => {
    downAt = { x: ev.clientX, y: ev.clientY };
  });
  canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  canvas.addEventListener("pointerup", (ev) => {
    if (!downAt) return;
    const moved = Math.hypot(ev.clientX - downAt.x, ev.clientY - downAt.y);
    downAt = null;
    if (moved > 4) return;
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    const vertex = pickVertex(
      x, y, viewer.screenVertices(),
      (vx, vy) => viewer.surfaceDepthAt(vx, vy),
      { radius: 14, epsilon: viewer.pickEpsilon() },
    );
    if (vertex < 0) return; // background or occluded: no-op
    const sign = ev.shiftKey || ev.button === 2 ? NEGATIVE : POSITIVE;
    controller.onPick(vertex, sign);
  });

  el<HTMLButtonElement>("undo").addEventListener("click", () => controller.undo());
  el<HTMLButtonElement>("clear").addEventListener("click", () => controller.clear());
  el<HTMLButtonElement>("threshold-reset").addEventListener("click", () => {
    controller.resetThreshold();
  });
  slider.addEventListener("pointerdown", () => (sliderHeld = true));
  slider.addEventListener("pointerup", () => (sliderHeld = false));
  slider.addEventListener("input", () => {
    controller.setThreshold(parseFloat(slider.value));
  });
  binarize.addEventListener("change", () => {
    controller.setMode(binarize.checked ? "binary" : "heatmap");
  });
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) {
    status.classList.add("error");
    status.textContent = `failed to start: ${err?.message ?? err}`;
  }
});
