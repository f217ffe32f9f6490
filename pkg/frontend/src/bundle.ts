// Bundle parsing and validation. Everything here is pure: text in,
// structured scene out, so the same code paths run in the browser and in
// node-based tests. Errors carry file and line for quick diagnosis.

export interface BundleMeta {
  version: number;
  dims: { t: number; z: number; y: number; x: number };
  z_scale: number;
  cells: number;
  method: string;
  floor: number;
  stride: number;
  dtype_max: number;
  has_tree: boolean;
}

export interface VoxelFrame {
  x: Int32Array;
  y: Int32Array;
  z: Int32Array;
  v: Float32Array;
  count: number;
}

export interface TrackPoint {
  x: number;
  y: number;
  z: number; // index units, like voxel z; scale by z_scale for display
  status: "tracked" | "out_of_view";
}

export interface CellTree {
  root: number;
  edges: Array<[number, number, number]>;
}

export interface ViewBundle {
  meta: BundleMeta;
  frames: VoxelFrame[];
  tracks: TrackPoint[][]; // [frame][cell]
  tree: CellTree | null;
}

export class BundleError extends Error {}

function fail(file: string, line: number | null, message: string): never {
  const where = line === null ? file : `${file}:${line}`;
  throw new BundleError(`${where}: ${message}`);
}

export function parseMeta(text: string, file = "meta.json"): BundleMeta {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    fail(file, null, `not valid JSON (${(err as Error).message})`);
  }
  const obj = raw as Record<string, unknown>;
  const dims = obj.dims as Record<string, unknown> | undefined;
  for (const key of ["t", "z", "y", "x"]) {
    if (!dims || typeof dims[key] !== "number" || (dims[key] as number) < 1) {
      fail(file, null, `dims.${key} missing or not a positive number`);
    }
  }
  for (const key of ["z_scale", "cells", "floor", "stride", "dtype_max"]) {
    if (typeof obj[key] !== "number") {
      fail(file, null, `${key} missing or not a number`);
    }
  }
  return {
    version: typeof obj.version === "number" ? obj.version : 1,
    dims: dims as unknown as BundleMeta["dims"],
    z_scale: obj.z_scale as number,
    cells: obj.cells as number,
    method: typeof obj.method === "string" ? obj.method : "spf",
    floor: obj.floor as number,
    stride: obj.stride as number,
    dtype_max: obj.dtype_max as number,
    has_tree: Boolean(obj.has_tree),
  };
}

export function frameFileName(t: number): string {
  return `frame_${String(t).padStart(4, "0")}.txt`;
}

export function parseFrame(
  text: string,
  file: string,
  dims?: BundleMeta["dims"],
): VoxelFrame {
  const lines = text.split("\n");
  const xs: number[] = [];
  const ys: number[] = [];
  const zs: number[] = [];
  const vs: number[] = [];
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const parts = line.split(/\s+/);
    if (parts.length !== 4) {
      fail(file, i + 1, `expected "x y z v", got "${line}"`);
    }
    const nums = parts.map(Number);
    if (nums.some((n) => !Number.isFinite(n))) {
      fail(file, i + 1, `non-numeric voxel "${line}"`);
    }
    const [x, y, z, v] = nums;
    if (dims && (x < 0 || x >= dims.x || y < 0 || y >= dims.y || z < 0 || z >= dims.z)) {
      fail(file, i + 1, `voxel (${x}, ${y}, ${z}) outside dims`);
    }
    xs.push(x);
    ys.push(y);
    zs.push(z);
    vs.push(v);
  }
  return {
    x: Int32Array.from(xs),
    y: Int32Array.from(ys),
    z: Int32Array.from(zs),
    v: Float32Array.from(vs),
    count: xs.length,
  };
}

export function parseTracks(
  text: string,
  file: string,
  meta: BundleMeta,
): TrackPoint[][] {
  const { t: T } = meta.dims;
  const K = meta.cells;
  const tracks: Array<Array<TrackPoint | null>> = [];
  for (let t = 0; t < T; t++) {
    tracks.push(new Array<TrackPoint | null>(K).fill(null));
  }
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    if (parts.length !== 6) {
      fail(file, i + 1, `expected "t k x y z status", got "${line}"`);
    }
    const t = Number(parts[0]);
    const k = Number(parts[1]);
    const x = Number(parts[2]);
    const y = Number(parts[3]);
    const z = Number(parts[4]);
    const status = parts[5];
    if (![t, k, x, y, z].every(Number.isFinite)) {
      fail(file, i + 1, `non-numeric trajectory row "${line}"`);
    }
    if (!Number.isInteger(t) || t < 0 || t >= T) {
      fail(file, i + 1, `frame ${parts[0]} outside 0..${T - 1}`);
    }
    if (!Number.isInteger(k) || k < 0 || k >= K) {
      fail(file, i + 1, `cell ${parts[1]} outside 0..${K - 1}`);
    }
    if (status !== "tracked" && status !== "out_of_view") {
      fail(file, i + 1, `unknown status "${status}"`);
    }
    tracks[t][k] = { x, y, z, status };
  }
  for (let t = 0; t < T; t++) {
    for (let k = 0; k < K; k++) {
      if (tracks[t][k] === null) {
        fail(file, null, `missing row for frame ${t}, cell ${k}`);
      }
    }
  }
  return tracks as TrackPoint[][];
}

export function parseTree(text: string, file: string, cells: number): CellTree {
  let root: number | null = null;
  const edges: Array<[number, number, number]> = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    if (parts[0] === "root" && parts.length === 2) {
      root = Number(parts[1]);
      continue;
    }
    if (parts[0] === "edge" && parts.length === 4) {
      const [a, b, w] = [Number(parts[1]), Number(parts[2]), Number(parts[3])];
      if (![a, b, w].every(Number.isFinite)) {
        fail(file, i + 1, `non-numeric edge "${line}"`);
      }
      edges.push([a, b, w]);
      continue;
    }
    fail(file, i + 1, `expected "root <id>" or "edge k1 k2 w", got "${line}"`);
  }
  if (root === null || !Number.isInteger(root) || root < 0 || root >= cells) {
    fail(file, null, "missing or invalid root line");
  }
  return { root, edges };
}

export function assembleBundle(
  meta: BundleMeta,
  frameTexts: string[],
  tracksText: string,
  treeText: string | null,
): ViewBundle {
  if (frameTexts.length !== meta.dims.t) {
    fail(
      "meta.json",
      null,
      `dims.t = ${meta.dims.t} but ${frameTexts.length} frame files supplied`,
    );
  }
  const frames = frameTexts.map((text, t) =>
    parseFrame(text, frameFileName(t), meta.dims),
  );
  const tracks = parseTracks(tracksText, "tracks.txt", meta);
  const tree = treeText === null ? null : parseTree(treeText, "tree.txt", meta.cells);
  return { meta, frames, tracks, tree };
}

export type Fetcher = (path: string) => Promise<string>;

/** Load a bundle directory through any text fetcher (fetch, fs, zip...). */
export async function loadBundle(fetchText: Fetcher): Promise<ViewBundle> {
  let metaText: string;
  try {
    metaText = await fetchText("meta.json");
  } catch (err) {
    throw new BundleError(`meta.json: ${(err as Error).message}`);
  }
  const meta = parseMeta(metaText);
  const frameTexts: string[] = [];
  for (let t = 0; t < meta.dims.t; t++) {
    const name = frameFileName(t);
    try {
      frameTexts.push(await fetchText(name));
    } catch (err) {
      throw new BundleError(`${name}: ${(err as Error).message}`);
    }
  }
  let tracksText: string;
  try {
    tracksText = await fetchText("tracks.txt");
  } catch (err) {
    throw new BundleError(`tracks.txt: ${(err as Error).message}`);
  }
  let treeText: string | null = null;
  if (meta.has_tree) {
    try {
      treeText = await fetchText("tree.txt");
    } catch (err) {
      throw new BundleError(`tree.txt: ${(err as Error).message}`);
    }
  }
  return assembleBundle(meta, frameTexts, tracksText, treeText);
}
