// Manual verification sheet: one verdict per cell, success rate over the
// marked-and-not-excluded subset only. Excluded cells (false detections,
// cells that left the field of view) never enter the denominator.

export const VERDICTS = [
  "success",
  "failure",
  "excluded_false_detection",
  "excluded_out_of_view",
  "unmarked",
] as const;

export type Verdict = (typeof VERDICTS)[number];

export interface VerificationSheet {
  cells: number;
  verdicts: Verdict[];
}

export function newSheet(cells: number): VerificationSheet {
  if (!Number.isInteger(cells) || cells < 0) {
    throw new RangeError(`cells must be a non-negative integer, got ${cells}`);
  }
  return { cells, verdicts: new Array<Verdict>(cells).fill("unmarked") };
}

export function recordVerdict(
  sheet: VerificationSheet,
  k: number,
  verdict: Verdict,
): VerificationSheet {
  if (!Number.isInteger(k) || k < 0 || k >= sheet.cells) {
    throw new RangeError(`cell ${k} outside 0..${sheet.cells - 1}`);
  }
  if (!VERDICTS.includes(verdict)) {
    throw new RangeError(`unknown verdict "${verdict}"`);
  }
  const verdicts = sheet.verdicts.slice();
  verdicts[k] = verdict;
  return { cells: sheet.cells, verdicts };
}

/** success / (success + failure); null when the denominator is empty. */
export function successRate(sheet: VerificationSheet): number | null {
  let success = 0;
  let failure = 0;
  for (const v of sheet.verdicts) {
    if (v === "success") success++;
    else if (v === "failure") failure++;
  }
  const denom = success + failure;
  return denom === 0 ? null : success / denom;
}

export function exportSheet(sheet: VerificationSheet): string {
  const rate = successRate(sheet);
  const lines = sheet.verdicts.map((v, k) => `${k} ${v}`);
  lines.push(`rate ${rate === null ? "NA" : String(rate)}`);
  return lines.join("\n") + "\n";
}

export function parseSheet(text: string, cells: number): VerificationSheet {
  let sheet = newSheet(cells);
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("rate ")) continue;
    const parts = line.split(/\s+/);
    if (parts.length !== 2) throw new Error(`malformed sheet line "${line}"`);
    const k = Number(parts[0]);
    sheet = recordVerdict(sheet, k, parts[1] as Verdict);
  }
  return sheet;
}

// Persistence through any Storage-shaped object so tests can inject a map.
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function sheetKey(bundleId: string): string {
  return `spftrack-sheet:${bundleId}`;
}

export function saveSheet(store: KeyValueStore, key: string, sheet: VerificationSheet): void {
  store.setItem(key, JSON.stringify(sheet.verdicts));
}

export function loadSheet(store: KeyValueStore, key: string, cells: number): VerificationSheet {
  const raw = store.getItem(key);
  if (raw === null) return newSheet(cells);
  let verdicts: unknown;
  try {
    verdicts = JSON.parse(raw);
  } catch {
    return newSheet(cells);
  }
  if (!Array.isArray(verdicts)) return newSheet(cells);
  let sheet = newSheet(cells);
  verdicts.slice(0, cells).forEach((v, k) => {
    if (VERDICTS.includes(v as Verdict)) {
      sheet = recordVerdict(sheet, k, v as Verdict);
    }
  });
  return sheet;
}
