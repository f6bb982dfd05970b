/** Browser entry point: wires the DOM to a live session. */

import { CentroidDrag, FilterViewport, RangeControls } from "./controls.js";
import { layeredLayout } from "./graphView.js";
import { dataToPixel, renderGraph, renderView } from "./render.js";
import { LiveSession } from "./session.js";
import { browserSocketFactory, fetchHttp } from "./transport.js";
import type { GraphJson } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? window.location.origin;
const xAxis = params.get("x") ?? "x";
const yAxis = params.get("y") ?? "y";

const session = new LiveSession(server, {
  http: fetchHttp,
  socketFactory: browserSocketFactory,
});
const ranges = new RangeControls(session);
const filter = new FilterViewport(session);
const drag = new CentroidDrag(session);

const view = el<HTMLCanvasElement>("view");
const graphCanvas = el<HTMLCanvasElement>("graph");
const status = el<HTMLSpanElement>("status");
const history = el<HTMLDivElement>("history");
const colormap = el<HTMLSelectElement>("colormap");
const filterToggle = el<HTMLInputElement>("filter-toggle");

const sliderIds: [string, string, string][] = [
  [xAxis, "x-lo", "x-hi"],
  [yAxis, "y-lo", "y-hi"],
];

function sliderBounds(axis: string, loId: string, hiId: string) {
  const env = session.state.envelope[axis];
  if (!env) return null;
  const span = env.hi - env.lo || 1;
  const lo = env.lo + (Number(el<HTMLInputElement>(loId).value) / 1000) * span;
  const hi = env.lo + (Number(el<HTMLInputElement>(hiId).value) / 1000) * span;
  return { lo: Math.min(lo, hi), hi: Math.max(lo, hi) };
}

for (const [axis, loId, hiId] of sliderIds) {
  for (const id of [loId, hiId]) {
    el<HTMLInputElement>(id).addEventListener("input", () => {
      const bounds = sliderBounds(axis, loId, hiId);
      if (bounds) ranges.drag(axis, bounds);
    });
    el<HTMLInputElement>(id).addEventListener("change", () => ranges.release(axis));
  }
}

filterToggle.addEventListener("change", () => {
  if (filterToggle.checked) {
    const viewport: Record<string, { lo: number; hi: number }> = {};
    for (const [axis] of sliderIds) {
      const b = session.state.sliders[axis] ?? session.state.envelope[axis];
      if (b) viewport[axis] = b;
    }
    filter.apply(viewport);
  } else {
    filter.clear();
  }
});

// centroid dragging on the main canvas
let activeCentroid: number | null = null;
view.addEventListener("pointerdown", (event) => {
  const rect = view.getBoundingClientRect();
  const px = ((event.clientX - rect.left) / rect.width) * view.width;
  const py = ((event.clientY - rect.top) / rect.height) * view.height;
  for (const c of session.state.centroids) {
    const p = dataToPixel(session.state, xAxis, yAxis, view.width, view.height, c.x, c.y);
    if (p && Math.hypot(p.px - px, p.py - py) < 10) {
      activeCentroid = c.index;
      drag.begin(c.index);
      view.setPointerCapture(event.pointerId);
      return;
    }
  }
});
view.addEventListener("pointermove", (event) => {
  if (activeCentroid === null) return;
  const rect = view.getBoundingClientRect();
  const fx = (event.clientX - rect.left) / rect.width;
  const fy = (event.clientY - rect.top) / rect.height;
  const ex = session.state.envelope[xAxis];
  const ey = session.state.envelope[yAxis];
  if (!ex || !ey) return;
  drag.move(ex.lo + fx * (ex.hi - ex.lo), ey.lo + (1 - fy) * (ey.hi - ey.lo));
});
view.addEventListener("pointerup", () => {
  if (activeCentroid !== null) void drag.drop();
  activeCentroid = null;
});
window.addEventListener("keydown", (event) => {
  if (event.key === "Escape") {
    drag.cancel();
    activeCentroid = null;
  }
});

function pngUrl(bytes: Uint8Array): string {
  return URL.createObjectURL(new Blob([bytes.buffer as ArrayBuffer], { type: "image/png" }));
}

session.state.onChange(() => {
  status.textContent = session.state.status;
  status.className = session.state.status;
  void renderView(view, session.state, xAxis, yAxis);
  history.replaceChildren(
    ...session.state.frameHistory.slice(-10).map((frame) => {
      const img = document.createElement("img");
      img.src = pngUrl(frame.png);
      img.title = `run ${frame.stamp}`;
      img.width = 64;
      img.height = 64;
      if (colormap.value === "gray") img.style.filter = "grayscale(1)";
      return img;
    }),
  );
  view.style.filter = colormap.value === "gray" ? "grayscale(1)" : "";
});
colormap.addEventListener("change", () => {
  view.style.filter = colormap.value === "gray" ? "grayscale(1)" : "";
});

async function refreshGraph(): Promise<void> {
  const graph = (await fetchHttp.getJson(`${server}/graph`)) as GraphJson;
  renderGraph(graphCanvas, layeredLayout(graph, graphCanvas.width));
}

void session.connect();
void refreshGraph();
setInterval(() => void refreshGraph(), 5000);
