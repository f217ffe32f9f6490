// Orbit camera over the volume. Scene coordinates are display units: x and
// y in voxels, z premultiplied by the anisotropy factor. Projection is
// orthographic; depth comes back for painter-style sorting.

import type { BundleMeta } from "./bundle";

export interface Camera {
  yaw: number; // radians about the display y axis
  pitch: number; // radians about the display x axis
  zoom: number; // screen pixels per scene unit
  cx: number;
  cy: number;
  cz: number;
}

export interface Viewport {
  width: number;
  height: number;
}

export function displayPoint(
  x: number,
  y: number,
  z: number,
  zScale: number,
): [number, number, number] {
  return [x, y, z * zScale];
}

export function defaultCamera(meta: BundleMeta, view: Viewport): Camera {
  const sx = meta.dims.x;
  const sy = meta.dims.y;
  const sz = meta.dims.z * meta.z_scale;
  const extent = Math.max(sx, sy, sz);
  return {
    yaw: 0,
    pitch: 0,
    zoom: (0.9 * Math.min(view.width, view.height)) / extent,
    cx: sx / 2,
    cy: sy / 2,
    cz: sz / 2,
  };
}

const PITCH_LIMIT = Math.PI / 2;

export function rotate(cam: Camera, dyaw: number, dpitch: number): Camera {
  const pitch = Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, cam.pitch + dpitch));
  return { ...cam, yaw: cam.yaw + dyaw, pitch };
}

export function zoomBy(cam: Camera, factor: number): Camera {
  if (!(factor > 0)) throw new RangeError(`zoom factor must be > 0, got ${factor}`);
  return { ...cam, zoom: cam.zoom * factor };
}

/** Row-major 3x3 rotation: pitch about x after yaw about y. */
export function viewMatrix(cam: Camera): number[] {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  return [cy, 0, sy, sy * sp, cp, -cy * sp, -sy * cp, sp, cy * cp];
}

export function project(
  p: [number, number, number],
  cam: Camera,
  view: Viewport,
): [number, number, number] {
  const m = viewMatrix(cam);
  const dx = p[0] - cam.cx;
  const dy = p[1] - cam.cy;
  const dz = p[2] - cam.cz;
  const rx = m[0] * dx + m[1] * dy + m[2] * dz;
  const ry = m[3] * dx + m[4] * dy + m[5] * dz;
  const rz = m[6] * dx + m[7] * dy + m[8] * dz;
  return [view.width / 2 + cam.zoom * rx, view.height / 2 + cam.zoom * ry, rz];
}
