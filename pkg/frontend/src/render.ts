import type { Layout } from "./graphView.js";
import type { ViewState } from "./viewState.js";

/** Map data coordinates to canvas pixels given the current axis envelope. */
export function dataToPixel(
  state: ViewState,
  xAxis: string,
  yAxis: string,
  width: number,
  height: number,
  x: number,
  y: number,
): { px: number; py: number } | null {
  const ex = state.envelope[xAxis];
  const ey = state.envelope[yAxis];
  if (!ex || !ey || ex.hi <= ex.lo || ey.hi <= ey.lo) return null;
  return {
    px: ((x - ex.lo) / (ex.hi - ex.lo)) * width,
    // canvas y grows downward; data y grows upward
    py: height - ((y - ey.lo) / (ey.hi - ey.lo)) * height,
  };
}

/** Draw the current frame, sample points and centroid handles. */
export async function renderView(
  canvas: HTMLCanvasElement,
  state: ViewState,
  xAxis: string,
  yAxis: string,
): Promise<void> {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (state.frame) {
    const blob = new Blob([state.frame.png.buffer as ArrayBuffer], { type: "image/png" });
    const bitmap = await createImageBitmap(blob);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
  }
  ctx.fillStyle = "rgba(255,255,255,0.85)";
  for (const point of state.samplePoints) {
    const p = dataToPixel(state, xAxis, yAxis, canvas.width, canvas.height, point.x, point.y);
    if (p) ctx.fillRect(p.px - 1, p.py - 1, 2, 2);
  }
  ctx.strokeStyle = "#ff5533";
  ctx.lineWidth = 2;
  for (const c of state.centroids) {
    const p = dataToPixel(state, xAxis, yAxis, canvas.width, canvas.height, c.x, c.y);
    if (!p) continue;
    ctx.beginPath();
    ctx.arc(p.px, p.py, 7, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

/** Draw the dependency graph with a static layered layout. */
export function renderGraph(canvas: HTMLCanvasElement, layout: Layout): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pos = new Map(layout.nodes.map((n) => [n.id, n]));
  ctx.strokeStyle = "#888";
  for (const edge of layout.edges) {
    const a = pos.get(edge.from);
    const b = pos.get(edge.to);
    if (!a || !b) continue;
    ctx.beginPath();
    ctx.moveTo(a.x, a.y + 12);
    ctx.lineTo(b.x, b.y - 12);
    ctx.stroke();
  }
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  for (const node of layout.nodes) {
    ctx.fillStyle = node.isInput ? "#2b6" : node.isVisualization ? "#46e" : "#ccc";
    ctx.fillRect(node.x - 55, node.y - 12, 110, 24);
    ctx.fillStyle = "#111";
    ctx.fillText(node.id, node.x, node.y + 4, 104);
  }
}
