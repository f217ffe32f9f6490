"""Scoring tracked positions against ground truth.

Errors are Euclidean in physical units (z index differences are multiplied
by ``z_scale``). A tracking failure is a rising edge of the per-cell error
above a threshold; hidden frames freeze the failure state so one excursion
is never double-counted across a blink. Detection quality uses greedy
nearest-first one-to-one matching inside a fixed radius.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvalReport:
    """Everything the report files carry."""

    rmse_series: np.ndarray  # (T,) per-frame RMSE over visible cells
    failures_per_cell: np.ndarray  # (K,) rising-edge failure counts
    threshold: float
    z_scale: float
    frames: int
    cells: int
    detection: dict = field(default_factory=dict)

    @property
    def failure_mean(self):
        return float(self.failures_per_cell.mean()) if self.cells else float("nan")


def _errors(estimates, truth, z_scale):
    diff = np.asarray(estimates, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    if z_scale != 1.0:
        diff = diff.copy()
        diff[..., 2] *= z_scale
    return np.sqrt((diff * diff).sum(axis=-1))


def rmse(estimates, truth, visible=None, z_scale=1.0):
    """Per-frame root-mean-square Euclidean error over visible cells.

    ``estimates`` and ``truth`` are (T, K, 3). When the inputs already hold
    physical z, keep z_scale at 1; pass the anisotropy factor only for
    index-space coordinates. Frames with no visible cell yield NaN.
    """
    err = _errors(estimates, truth, z_scale)
    if visible is None:
        return np.sqrt((err * err).mean(axis=1))
    visible = np.asarray(visible, dtype=bool)
    sq = np.where(visible, err * err, 0.0)
    counts = visible.sum(axis=1)
    out = np.full(err.shape[0], np.nan)
    ok = counts > 0
    out[ok] = np.sqrt(sq[ok].sum(axis=1) / counts[ok])
    return out


def count_failures(estimates, truth, visible=None, threshold=4.5, z_scale=1.0):
    """Count rising edges of per-cell error above ``threshold``.

    A failure is counted when a cell's error crosses from <= threshold to
    > threshold between consecutive scored frames. Frames where the cell is
    hidden keep the previous frame's failure state, so a failure spanning a
    blink is counted once and a recovery during a blink needs a visible
    frame to register.
    """
    err = _errors(estimates, truth, z_scale)
    T, K = err.shape
    if visible is None:
        visible = np.ones((T, K), dtype=bool)
    visible = np.asarray(visible, dtype=bool)
    counts = np.zeros(K, dtype=np.int64)
    failed = np.zeros(K, dtype=bool)
    for t in range(T):
        vis = visible[t]
        now_failed = err[t] > threshold
        rising = vis & now_failed & ~failed
        counts += rising
        failed = np.where(vis, now_failed, failed)
    return counts


def detection_metrics(detected, annotated, match_radius=5.0):
    """Greedy one-to-one matching of detections to annotations.

    Pairs are considered in ascending distance (ties by detection id, then
    annotation id); each match consumes both endpoints. Detections within
    ``match_radius`` of an unmatched annotation count as true positives.
    Returns tp/fp/fn counts plus tpr and fdr (NaN when undefined).
    """
    detected = np.asarray(detected, dtype=np.float64).reshape(-1, 3)
    annotated = np.asarray(annotated, dtype=np.float64).reshape(-1, 3)
    n_det, n_ann = len(detected), len(annotated)
    tp = 0
    if n_det and n_ann:
        diff = detected[:, None, :] - annotated[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        di, ai = np.nonzero(dist <= match_radius)
        order = np.lexsort((ai, di, dist[di, ai]))
        det_used = np.zeros(n_det, dtype=bool)
        ann_used = np.zeros(n_ann, dtype=bool)
        for e in order:
            d, a = di[e], ai[e]
            if not det_used[d] and not ann_used[a]:
                det_used[d] = True
                ann_used[a] = True
                tp += 1
    fp = n_det - tp
    fn = n_ann - tp
    return {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "tpr": tp / n_ann if n_ann else float("nan"),
        "fdr": fp / n_det if n_det else float("nan"),
    }


def build_report(estimates, truth, visible=None, threshold=4.5, z_scale=1.0,
                 match_radius=5.0):
    """Score a full run; detection metrics compare the first frame."""
    series = rmse(estimates, truth, visible, z_scale)
    failures = count_failures(estimates, truth, visible, threshold, z_scale)
    T, K, _ = np.asarray(estimates).shape
    vis0 = visible[0] if visible is not None else np.ones(K, dtype=bool)
    detection = detection_metrics(
        np.asarray(estimates)[0], np.asarray(truth)[0][vis0], match_radius
    )
    return EvalReport(
        rmse_series=series,
        failures_per_cell=failures,
        threshold=threshold,
        z_scale=z_scale,
        frames=T,
        cells=K,
        detection=detection,
    )


def _summary_rows(report):
    series = report.rmse_series[~np.isnan(report.rmse_series)]
    rows = [
        ("frames", report.frames),
        ("cells", report.cells),
        ("threshold", report.threshold),
        ("rmse_mean", float(series.mean()) if len(series) else float("nan")),
        ("rmse_max", float(series.max()) if len(series) else float("nan")),
        ("rmse_final", float(series[-1]) if len(series) else float("nan")),
        ("failures_total", int(report.failures_per_cell.sum())),
        ("failures_per_cell_mean", report.failure_mean),
    ]
    for key in ("tp", "fp", "fn", "tpr", "fdr"):
        if key in report.detection:
            rows.append((f"detect_{key}", report.detection[key]))
    return rows


def write_report(path_txt, path_tsv, report):
    """Write the human-readable and the metric<TAB>value reports."""
    rows = _summary_rows(report)
    with open(path_txt, "w") as fh:
        fh.write("tracking evaluation\n")
        fh.write("===================\n")
        for key, value in rows:
            fh.write(f"{key:>24}: {value}\n")
        fh.write("\nper-cell failures:\n")
        for k, c in enumerate(report.failures_per_cell):
            fh.write(f"  cell {k}: {int(c)}\n")
    with open(path_tsv, "w") as fh:
        for key, value in rows:
            fh.write(f"{key}\t{value}\n")
