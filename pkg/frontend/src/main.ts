// DOM wiring: loads the bundle named in the ?bundle= query parameter
// (default "bundle/"), then binds the controls to the pure state modules.

import { loadBundle, type ViewBundle } from "./bundle";
import { defaultCamera, rotate, zoomBy, type Camera } from "./camera";
import {
  focusCell,
  initialState,
  scrubTo,
  setThreshold,
  stepForward,
  togglePlay,
  type ViewState,
} from "./playback";
import { drawScene } from "./render";
import {
  exportSheet,
  loadSheet,
  recordVerdict,
  saveSheet,
  sheetKey,
  successRate,
  type Verdict,
  type VerificationSheet,
} from "./sheet";

const FRAME_MS = 80;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const statusLine = el<HTMLElement>("status");

  const params = new URLSearchParams(window.location.search);
  const base = params.get("bundle") ?? "bundle";
  let bundle: ViewBundle;
  try {
    bundle = await loadBundle(async (name) => {
      const res = await fetch(`${base}/${name}`);
      if (!res.ok) throw new Error(`HTTP ${res.status}`);
      return res.text();
    });
  } catch (err) {
    statusLine.textContent = String(err);
    return;
  }

  const T = bundle.meta.dims.t;
  const K = bundle.meta.cells;
  let state: ViewState = initialState();
  let cam: Camera = defaultCamera(bundle.meta, canvas);
  const storeKey = sheetKey(base);
  let sheet: VerificationSheet = loadSheet(window.localStorage, storeKey, K);

  const frameSlider = el<HTMLInputElement>("frame");
  frameSlider.max = String(T - 1);
  const thresholdSlider = el<HTMLInputElement>("threshold");
  thresholdSlider.max = String(bundle.meta.dtype_max);
  thresholdSlider.value = String(bundle.meta.floor);
  state = setThreshold(state, bundle.meta.floor);
  const focusSelect = el<HTMLSelectElement>("focus");
  focusSelect.add(new Option("all cells", ""));
  for (let k = 0; k < K; k++) focusSelect.add(new Option(`cell ${k}`, String(k)));

  function repaint(): void {
    frameSlider.value = String(state.frame);
    const rate = successRate(sheet);
    const marked =
      state.focus === null ? "" : ` | verdict: ${sheet.verdicts[state.focus]}`;
    statusLine.textContent =
      `frame ${state.frame}/${T - 1} | threshold ${state.threshold}` +
      ` | rate ${rate === null ? "NA" : rate.toFixed(4)}${marked}`;
    drawScene(ctx!, bundle, state, cam, canvas);
  }

  el<HTMLButtonElement>("play").addEventListener("click", () => {
    state = togglePlay(state);
  });
  frameSlider.addEventListener("input", () => {
    state = scrubTo(state, Number(frameSlider.value), T);
    repaint();
  });
  thresholdSlider.addEventListener("input", () => {
    state = setThreshold(state, Number(thresholdSlider.value));
    repaint();
  });
  focusSelect.addEventListener("change", () => {
    const value = focusSelect.value;
    state = focusCell(state, value === "" ? null : Number(value), K);
    repaint();
  });

  for (const verdict of [
    "success",
    "failure",
    "excluded_false_detection",
    "excluded_out_of_view",
    "unmarked",
  ] as Verdict[]) {
    el<HTMLButtonElement>(`mark-${verdict}`).addEventListener("click", () => {
      if (state.focus === null) return;
      sheet = recordVerdict(sheet, state.focus, verdict);
      saveSheet(window.localStorage, storeKey, sheet);
      repaint();
    });
  }

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const blob = new Blob([exportSheet(sheet)], { type: "text/plain" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "verdicts.txt";
    link.click();
    URL.revokeObjectURL(link.href);
  });

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    cam = rotate(cam, (e.clientX - lastX) * 0.01, (e.clientY - lastY) * 0.01);
    lastX = e.clientX;
    lastY = e.clientY;
    repaint();
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    cam = zoomBy(cam, e.deltaY < 0 ? 1.1 : 1 / 1.1);
    repaint();
  });

  let lastTick = 0;
  function tick(now: number): void {
    if (state.playing && now - lastTick >= FRAME_MS) {
      state = stepForward(state, T);
      lastTick = now;
      repaint();
    }
    window.requestAnimationFrame(tick);
  }
  repaint();
  window.requestAnimationFrame(tick);
}

start();
