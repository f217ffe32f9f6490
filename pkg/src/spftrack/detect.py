"""Initial cell-centroid detection: local-peak collection + DP-means.

Peaks are voxels whose intensity is maximal within a small window; they are
clustered with DP-means, which opens a new cluster whenever a point is
farther than ``lam`` from every existing centroid, so the number of cells
emerges from the data. All coordinates handed to the clustering step are
physically isotropic: z indices are premultiplied by ``z_scale``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

_MAX_DPMEANS_ITERS = 500


@dataclass
class PeakSet:
    """Local-maximum voxels of one frame, in array scan order (z, y, x)."""

    points: np.ndarray  # (M, 3) float64, columns (x, y, z*z_scale)
    intensities: np.ndarray  # (M,) source intensities


@dataclass
class CentroidSet:
    """Converged DP-means clusters.

    ``assignment`` maps each input point to its cluster (-1 once a cluster
    has been discarded as too small). ``history`` records the clustering
    objective (sum of squared distances + lam^2 * k) after every pass.
    """

    centroids: np.ndarray  # (k, 3) float64
    assignment: np.ndarray  # (M,) int64
    k: int
    history: list = field(default_factory=list, repr=False)


@dataclass
class DetectConfig:
    peak_window: tuple = (3, 3, 1)  # odd full extents along (x, y, z)
    min_intensity: float | None = None  # default: 10% of dtype max
    lam: float = 8.0
    min_cluster_size: int = 3
    z_scale: float = 3.0


def collect_peaks(frame, peak_window=(3, 3, 1), min_intensity=1.0, z_scale=3.0):
    """Collect voxels that dominate their local window.

    A voxel is kept when its intensity is >= every voxel in the centered
    (px, py, pz) window and no tied voxel precedes it in array scan order
    (z, then y, then x), so each flat plateau yields exactly one peak.
    Returned z coordinates are premultiplied by ``z_scale``.
    """
    px, py, pz = peak_window
    if min(px, py, pz) < 1:
        raise ValueError(f"peak_window entries must be >= 1, got {peak_window}")
    Z, Y, X = frame.shape
    n_vox = frame.size
    # Key = intensity * n_vox - scan_rank: the window maximum of the key is
    # attained by the highest-intensity voxel, earliest in scan order on ties.
    rank = np.arange(n_vox, dtype=np.int64).reshape(frame.shape)
    key = frame.astype(np.int64) * n_vox - rank
    key_max = ndimage.maximum_filter(key, size=(pz, py, px), mode="constant", cval=-n_vox - 1)
    keep = (key == key_max) & (frame >= min_intensity)
    zyx = np.argwhere(keep)
    points = np.empty((len(zyx), 3), dtype=np.float64)
    points[:, 0] = zyx[:, 2]
    points[:, 1] = zyx[:, 1]
    points[:, 2] = zyx[:, 0] * z_scale
    return PeakSet(points=points, intensities=frame[keep].astype(np.float64))


def dp_means(points, lam):
    """Cluster points with DP-means.

    Starts from a single cluster at the global mean. Each pass scans the
    points in input order: a point farther than ``lam`` from every current
    centroid opens a new cluster at itself, otherwise it joins the nearest;
    after the pass centroids are recomputed as assigned-point means and
    empty clusters are dropped. Stops when assignments are stable.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    pts = points.points if isinstance(points, PeakSet) else np.asarray(points, dtype=np.float64)
    m = len(pts)
    if m == 0:
        return CentroidSet(
            centroids=np.zeros((0, 3)), assignment=np.zeros(0, dtype=np.int64), k=0
        )
    lam2 = lam * lam
    centroids = [pts.mean(axis=0)]
    assignment = np.zeros(m, dtype=np.int64)
    history = []
    prev_assignment = None
    for _ in range(_MAX_DPMEANS_ITERS):
        for i, p in enumerate(pts):
            d2 = ((np.asarray(centroids) - p) ** 2).sum(axis=1)
            nearest = int(d2.argmin())
            if d2[nearest] > lam2:
                centroids.append(p.copy())
                assignment[i] = len(centroids) - 1
            else:
                assignment[i] = nearest
        # drop empty clusters, renumbering survivors in order
        counts = np.bincount(assignment, minlength=len(centroids))
        if (counts == 0).any():
            remap = -np.ones(len(centroids), dtype=np.int64)
            remap[counts > 0] = np.arange(int((counts > 0).sum()))
            assignment = remap[assignment]
        centroids = [pts[assignment == j].mean(axis=0) for j in range(assignment.max() + 1)]
        d2_final = ((pts - np.asarray(centroids)[assignment]) ** 2).sum(axis=1)
        history.append(float(d2_final.sum()) + lam2 * len(centroids))
        if prev_assignment is not None and np.array_equal(assignment, prev_assignment):
            break
        prev_assignment = assignment.copy()
    else:
        logger.warning("dp_means did not converge in %d passes", _MAX_DPMEANS_ITERS)
    return CentroidSet(
        centroids=np.asarray(centroids),
        assignment=assignment,
        k=len(centroids),
        history=history,
    )


def detect_cells(frame, config=None, z_scale=None, dtype_max=None):
    """Full detection for one frame: peaks, DP-means, small-cluster removal."""
    config = config or DetectConfig()
    if z_scale is not None:
        config = DetectConfig(**{**config.__dict__, "z_scale": z_scale})
    min_intensity = config.min_intensity
    if min_intensity is None:
        if dtype_max is None:
            dtype_max = float(np.iinfo(frame.dtype).max)
        min_intensity = 0.1 * dtype_max
    peaks = collect_peaks(frame, config.peak_window, min_intensity, config.z_scale)
    clusters = dp_means(peaks, config.lam)
    if clusters.k == 0:
        return clusters
    counts = np.bincount(clusters.assignment, minlength=clusters.k)
    keep = counts >= config.min_cluster_size
    remap = -np.ones(clusters.k, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    return CentroidSet(
        centroids=clusters.centroids[keep],
        assignment=remap[clusters.assignment],
        k=int(keep.sum()),
        history=clusters.history,
    )


def write_centroids(path, centroids):
    """Write centroids as ``k x y z`` lines (z in physical units)."""
    with open(path, "w") as fh:
        fh.write("# k x y z\n")
        for k, (x, y, z) in enumerate(np.asarray(centroids)):
            fh.write(f"{k} {x} {y} {z}\n")


def read_centroids(path):
    """Read a centroid file back into a (K, 3) float64 array."""
    rows = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}: malformed centroid line {line!r}")
            rows[int(parts[0])] = [float(v) for v in parts[1:]]
    if sorted(rows) != list(range(len(rows))):
        raise ValueError(f"{path}: centroid ids must be 0..K-1 without gaps")
    return np.asarray([rows[k] for k in range(len(rows))], dtype=np.float64)
