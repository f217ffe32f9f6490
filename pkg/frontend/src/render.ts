// Canvas drawing. Pure function of (bundle, state, camera, viewport): the
// scene is re-painted from scratch every call, so navigation can never leak
// into the data. Kept free of event handling; main.ts owns interaction.

import type { ViewBundle } from "./bundle";
import { displayPoint, project, type Camera, type Viewport } from "./camera";
import { trackerMarkers, visibleVoxelIndices, type ViewState } from "./playback";

const MARKER_COLORS = [
  "#ff5252", "#40c4ff", "#ffd740", "#69f0ae", "#ff6e40",
  "#b388ff", "#64ffda", "#ffab40", "#8c9eff", "#f06292",
];

export function markerColor(cell: number): string {
  return MARKER_COLORS[cell % MARKER_COLORS.length];
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  bundle: ViewBundle,
  state: ViewState,
  cam: Camera,
  view: Viewport,
): number {
  const { meta } = bundle;
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, view.width, view.height);

  const frame = bundle.frames[state.frame];
  const focusAt =
    state.focus === null ? null : bundle.tracks[state.frame][state.focus];
  const indices = visibleVoxelIndices(frame, state, meta.z_scale, focusAt);

  // painter order: far voxels first so near ones cover them
  const projected = indices.map((i) => {
    const p = displayPoint(frame.x[i], frame.y[i], frame.z[i], meta.z_scale);
    const [sx, sy, depth] = project(p, cam, view);
    return { i, sx, sy, depth };
  });
  projected.sort((a, b) => a.depth - b.depth);
  const size = Math.max(1, Math.round(cam.zoom * meta.stride));
  for (const { i, sx, sy } of projected) {
    const a = Math.min(1, frame.v[i] / meta.dtype_max + 0.15);
    ctx.fillStyle = `rgba(150, 210, 255, ${a.toFixed(3)})`;
    ctx.fillRect(sx - size / 2, sy - size / 2, size, size);
  }

  // tree edges under the markers, only in the full view
  if (bundle.tree !== null && state.focus === null) {
    ctx.strokeStyle = "rgba(255, 255, 255, 0.25)";
    ctx.lineWidth = 1;
    const row = bundle.tracks[state.frame];
    for (const [a, b] of bundle.tree.edges) {
      const pa = project(
        displayPoint(row[a].x, row[a].y, row[a].z, meta.z_scale), cam, view,
      );
      const pb = project(
        displayPoint(row[b].x, row[b].y, row[b].z, meta.z_scale), cam, view,
      );
      ctx.beginPath();
      ctx.moveTo(pa[0], pa[1]);
      ctx.lineTo(pb[0], pb[1]);
      ctx.stroke();
    }
  }

  for (const { cell, point } of trackerMarkers(bundle, state)) {
    const [sx, sy] = project(
      displayPoint(point.x, point.y, point.z, meta.z_scale), cam, view,
    );
    ctx.beginPath();
    ctx.arc(sx, sy, state.focus === cell ? 7 : 4, 0, 2 * Math.PI);
    ctx.strokeStyle = markerColor(cell);
    ctx.lineWidth = point.status === "out_of_view" ? 1 : 2;
    if (point.status === "out_of_view") ctx.setLineDash([2, 3]);
    ctx.stroke();
    ctx.setLineDash([]);
    if (state.focus === cell) {
      ctx.fillStyle = markerColor(cell);
      ctx.font = "12px sans-serif";
      ctx.fillText(`cell ${cell}`, sx + 10, sy - 10);
    }
  }
  return projected.length;
}
