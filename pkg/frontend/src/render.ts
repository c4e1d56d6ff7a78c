import { ViewTransform, planeToScreen, voxelToScreen, onSlice } from "./transform";
import { ViewerState } from "./state";

const TUMOR_COLOR = "#ff5252";
const BACKGROUND_COLOR = "#40c4ff";
const OVERLAY_COLOR: [number, number, number] = [255, 82, 82];
const OVERLAY_ALPHA = 0.35;

function windowLevel(v: number, width: number, center: number): number {
  const lo = center - width / 2;
  const t = (v - lo) / width;
  return Math.max(0, Math.min(255, Math.round(t * 255)));
}

/** Rasterize the slice (plus mask overlay) into an offscreen-sized ImageData. */
export function sliceToImageData(
  image: Float32Array,
  prediction: Float32Array | null,
  planeDims: [number, number],
  windowWidth: number,
  windowCenter: number
): ImageData {
  const [w, h] = planeDims;
  const out = new ImageData(w, h);
  for (let j = 0; j < h; j++) {
    for (let i = 0; i < w; i++) {
      const src = i + w * j; // column-major f32 plane, x-fastest
      const dst = 4 * (i + w * j);
      let g = windowLevel(image[src] ?? 0, windowWidth, windowCenter);
      let r = g;
      let b = g;
      if (prediction && (prediction[src] ?? 0) > 0.5) {
        r = Math.round(g * (1 - OVERLAY_ALPHA) + OVERLAY_COLOR[0] * OVERLAY_ALPHA);
        g = Math.round(g * (1 - OVERLAY_ALPHA) + OVERLAY_COLOR[1] * OVERLAY_ALPHA);
        b = Math.round(b * (1 - OVERLAY_ALPHA) + OVERLAY_COLOR[2] * OVERLAY_ALPHA);
      }
      out.data[dst] = r;
      out.data[dst + 1] = g;
      out.data[dst + 2] = b;
      out.data[dst + 3] = 255;
    }
  }
  return out;
}

export function drawScene(canvas: HTMLCanvasElement, state: ViewerState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !state.slice) return;
  const { slice, view, axis, sliceIndex } = state;

  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const img = sliceToImageData(
    slice.image,
    slice.prediction,
    slice.planeDims,
    state.windowWidth,
    state.windowCenter
  );
  // draw at native resolution, then let the transform scale it
  const off = document.createElement("canvas");
  off.width = slice.planeDims[0];
  off.height = slice.planeDims[1];
  off.getContext("2d")!.putImageData(img, 0, 0);
  ctx.save();
  ctx.imageSmoothingEnabled = view.zoom < 4;
  ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
  ctx.drawImage(off, 0, 0);
  ctx.restore();

  drawWorstPatch(ctx, view, slice.worstPatch);
  for (const c of slice.clicks) {
    if (!onSlice(axis, sliceIndex, c.pos)) continue;
    const p = voxelToScreen(view, axis, c.pos);
    ctx.strokeStyle = c.cls === "tumor" ? TUMOR_COLOR : BACKGROUND_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(p.x, p.y, Math.max(3, view.zoom / 2), 0, 2 * Math.PI);
    ctx.stroke();
  }
}

function drawWorstPatch(
  ctx: CanvasRenderingContext2D,
  view: ViewTransform,
  patch: { origin: [number, number]; size: [number, number] } | null
): void {
  if (!patch) return;
  const tl = planeToScreen(view, patch.origin[0], patch.origin[1]);
  ctx.strokeStyle = "#ffd740";
  ctx.setLineDash([6, 4]);
  ctx.lineWidth = 1.5;
  ctx.strokeRect(tl.x, tl.y, patch.size[0] * view.zoom, patch.size[1] * view.zoom);
  ctx.setLineDash([]);
}

/** Minimal Dice@k sparkline in a small canvas. */
export function drawDiceChart(canvas: HTMLCanvasElement, history: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (history.length === 0) return;
  const pad = 6;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.strokeStyle = "#69f0ae";
  ctx.lineWidth = 2;
  ctx.beginPath();
  history.forEach((d, k) => {
    const x = pad + (history.length === 1 ? 0 : (k / (history.length - 1)) * w);
    const y = pad + (1 - d) * h;
    if (k === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
