// Playback and filtering state. Reducers return fresh state objects so the
// UI can treat every change as a plain re-render; nothing here touches the
// DOM and navigation never mutates the bundle or any verdict.

import type { TrackPoint, ViewBundle, VoxelFrame } from "./bundle";
import { displayPoint } from "./camera";

export interface ViewState {
  frame: number;
  playing: boolean;
  focus: number | null;
  threshold: number;
}

export function initialState(): ViewState {
  return { frame: 0, playing: false, focus: null, threshold: 0 };
}

export function scrubTo(state: ViewState, frame: number, frameCount: number): ViewState {
  const clamped = Math.min(frameCount - 1, Math.max(0, Math.floor(frame)));
  return { ...state, frame: clamped };
}

/** Advance one frame, wrapping at the end so playback loops. */
export function stepForward(state: ViewState, frameCount: number): ViewState {
  return { ...state, frame: (state.frame + 1) % frameCount };
}

export function togglePlay(state: ViewState): ViewState {
  return { ...state, playing: !state.playing };
}

export function setThreshold(state: ViewState, threshold: number): ViewState {
  return { ...state, threshold: Math.max(0, threshold) };
}

export function focusCell(state: ViewState, k: number | null, cells: number): ViewState {
  if (k !== null && (!Number.isInteger(k) || k < 0 || k >= cells)) {
    throw new RangeError(`cell ${k} outside 0..${cells - 1}`);
  }
  return { ...state, focus: k };
}

export const FOCUS_RADIUS = 12; // display units around the focused tracker

/**
 * Indices of the voxels to draw: intensity at or above the threshold and,
 * in focus mode, within FOCUS_RADIUS of the focused cell's tracker.
 */
export function visibleVoxelIndices(
  frame: VoxelFrame,
  state: ViewState,
  zScale: number,
  focusAt: TrackPoint | null,
): number[] {
  const out: number[] = [];
  let center: [number, number, number] | null = null;
  if (state.focus !== null && focusAt !== null) {
    center = displayPoint(focusAt.x, focusAt.y, focusAt.z, zScale);
  }
  const r2 = FOCUS_RADIUS * FOCUS_RADIUS;
  for (let i = 0; i < frame.count; i++) {
    if (frame.v[i] < state.threshold) continue;
    if (center !== null) {
      const [px, py, pz] = displayPoint(frame.x[i], frame.y[i], frame.z[i], zScale);
      const dx = px - center[0];
      const dy = py - center[1];
      const dz = pz - center[2];
      if (dx * dx + dy * dy + dz * dz > r2) continue;
    }
    out.push(i);
  }
  return out;
}

export interface Marker {
  cell: number;
  point: TrackPoint;
}

/** Tracker markers for one frame: all cells, or only the focused one. */
export function trackerMarkers(bundle: ViewBundle, state: ViewState): Marker[] {
  const row = bundle.tracks[state.frame];
  if (state.focus !== null) {
    return [{ cell: state.focus, point: row[state.focus] }];
  }
  return row.map((point, cell) => ({ cell, point }));
}
