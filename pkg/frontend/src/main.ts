import { ApiClient } from "./api";
import { drawDiceChart, drawScene } from "./render";
import { AnnotatorController } from "./state";
import { AXES, Axis } from "./types";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new ApiClient("");
const ctl = new AnnotatorController(api);

const canvas = el<HTMLCanvasElement>("viewer");
const chart = el<HTMLCanvasElement>("dice-chart");
const axisSelect = el<HTMLSelectElement>("axis");
const sliceSlider = el<HTMLInputElement>("slice");
const sliceLabel = el<HTMLSpanElement>("slice-label");
const iterLabel = el<HTMLSpanElement>("iteration");
const pendingLabel = el<HTMLSpanElement>("pending");
const errorBox = el<HTMLDivElement>("error");
const refineBtn = el<HTMLButtonElement>("refine");
const undoBtn = el<HTMLButtonElement>("undo");
const openBtn = el<HTMLButtonElement>("open");
const pathInput = el<HTMLInputElement>("volume-path");
const labelInput = el<HTMLInputElement>("label-path");

ctl.onChange = (s) => {
  drawScene(canvas, s);
  iterLabel.textContent = s.iteration < 0 ? "-" : String(s.iteration);
  pendingLabel.textContent = String(s.pendingClicks);
  sliceLabel.textContent = `${s.sliceIndex}`;
  sliceSlider.max = String(Math.max(0, s.dims[{ x: 0, y: 1, z: 2 }[s.axis]]! - 1));
  sliceSlider.value = String(s.sliceIndex);
  refineBtn.disabled = s.busy || !s.sessionId;
  undoBtn.disabled = s.busy || !s.sessionId || s.pendingClicks === 0;
  errorBox.textContent = s.error ?? "";
  errorBox.style.display = s.error ? "block" : "none";
  const studyMode = s.hasLabel; // Dice chart only when ground truth is attached
  chart.style.display = studyMode ? "block" : "none";
  if (studyMode) drawDiceChart(chart, s.diceHistory);
};

openBtn.addEventListener("click", () => {
  const body: { path: string; label_path?: string } = { path: pathInput.value };
  if (labelInput.value) body.label_path = labelInput.value;
  void ctl.createSession(body);
});

axisSelect.addEventListener("change", () => {
  const axis = axisSelect.value as Axis;
  if ((AXES as readonly string[]).includes(axis)) void ctl.setAxis(axis);
});

sliceSlider.addEventListener("input", () => {
  void ctl.setSliceIndex(Number(sliceSlider.value));
});

refineBtn.addEventListener("click", () => void ctl.refine());
undoBtn.addEventListener("click", () => void ctl.undoClick());

canvas.addEventListener("contextmenu", (e) => e.preventDefault());
canvas.addEventListener("pointerdown", (e) => {
  const rect = canvas.getBoundingClientRect();
  const sx = e.clientX - rect.left;
  const sy = e.clientY - rect.top;
  if (e.shiftKey) return; // shift-drag pans, handled below
  // left button places a tumor click, right button a background click
  const cls = e.button === 2 || e.ctrlKey ? "background" : "tumor";
  void ctl.placeClick(sx, sy, cls);
});

let panFrom: { x: number; y: number } | null = null;
canvas.addEventListener("pointerdown", (e) => {
  if (e.shiftKey) panFrom = { x: e.clientX, y: e.clientY };
});
window.addEventListener("pointermove", (e) => {
  if (!panFrom) return;
  ctl.pan(e.clientX - panFrom.x, e.clientY - panFrom.y);
  panFrom = { x: e.clientX, y: e.clientY };
});
window.addEventListener("pointerup", () => {
  panFrom = null;
});

canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  const rect = canvas.getBoundingClientRect();
  const factor = e.deltaY < 0 ? 1.25 : 0.8;
  ctl.zoomAt(factor, e.clientX - rect.left, e.clientY - rect.top);
});

window.addEventListener("keydown", (e) => {
  if (e.key === "ArrowUp") void ctl.setSliceIndex(ctl.state.sliceIndex + 1);
  if (e.key === "ArrowDown") void ctl.setSliceIndex(ctl.state.sliceIndex - 1);
});
