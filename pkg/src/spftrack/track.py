"""Particle-filter tracking of many cells through a 4D volume.

Two methods share all machinery:

* ``track_all`` sweeps the cell tree parent-first each frame. A non-root
  cell's particles start from the parent's already-filtered particles of the
  same index, displaced by a blend of the latest and the initial parent
  offset plus small noise; candidates that collapse onto the parent are
  rejected probabilistically and redrawn. This keeps relative cell geometry
  intact even when individual cells dim or leave the volume.
* ``track_all_pf`` gives every cell an independent Gaussian random walk, the
  standard baseline the tree-guided method is measured against.

All positions are physical (z premultiplied by ``z_scale``). Randomness is
drawn from a per-(cell, frame) stream seeded as (seed, k, t), so results are
bitwise reproducible and independent of thread count.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .volume import nearest_voxel

logger = logging.getLogger(__name__)

STATUS_TRACKED = 0
STATUS_OUT_OF_VIEW = 1
_STATUS_NAMES = {STATUS_TRACKED: "tracked", STATUS_OUT_OF_VIEW: "out_of_view"}
_STATUS_CODES = {v: k for k, v in _STATUS_NAMES.items()}


@dataclass
class TrackConfig:
    """Knobs for both tracking methods.

    ``sigma_step`` scales the tree-guided proposal noise per axis (times
    ``step_scale``); ``sigma_root`` is the random-walk noise used by the
    root cell and by the baseline method. ``window`` holds half-widths
    (w1, w2, w3) of the matching subimage along (x, y, z). ``sigma_lik2``
    is the likelihood variance; None means 10% of the squared dtype
    maximum. ``ref_frame`` picks the frame whose estimated cell offsets
    replace the initial offsets once it has been filtered (0 keeps the
    detection-frame offsets). ``threads`` caps kernel parallelism and never
    changes results.
    """

    n_particles: int = 1000
    alpha: float = 0.6
    sigma_step: tuple = (0.6, 0.6, 0.03)
    step_scale: float = 1.0
    sigma_root: tuple = (3.0, 3.0, 0.3)
    lambda_rej: float = 4.5
    max_reject: int = 10
    window: tuple = (5, 5, 2)
    sigma_lik2: float | None = None
    ref_frame: int = 0
    seed: int = 0
    threads: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.lambda_rej <= 0:
            raise ValueError(f"lambda_rej must be positive, got {self.lambda_rej}")
        if self.max_reject < 1:
            raise ValueError(f"max_reject must be >= 1, got {self.max_reject}")
        if len(self.window) != 3 or min(self.window) < 0:
            raise ValueError(f"window must be three half-widths >= 0, got {self.window}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def from_dict(cls, values):
        """Build from a parsed key=value mapping; unknown keys are errors."""
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown tracking config keys: {sorted(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            if key in ("n_particles", "max_reject", "ref_frame", "seed", "threads"):
                kwargs[key] = int(raw)
            elif key in ("alpha", "step_scale", "lambda_rej"):
                kwargs[key] = float(raw)
            elif key == "sigma_lik2":
                kwargs[key] = None if str(raw).lower() == "none" else float(raw)
            elif key in ("sigma_step", "sigma_root"):
                kwargs[key] = tuple(float(v) for v in str(raw).replace(",", " ").split())
            elif key == "window":
                kwargs[key] = tuple(int(v) for v in str(raw).replace(",", " ").split())
            else:
                kwargs[key] = raw
        return cls(**kwargs)


@dataclass
class TrackerState:
    """Per-cell filter state between frames.

    ``mean_init`` anchors the restoring offset term; it holds the detected
    centroid until the configured reference frame (if any) has been
    filtered, after which it holds that frame's estimate.
    """

    cell: int
    particles: np.ndarray  # (N, 3) float64 physical positions
    weights: np.ndarray  # (N,) post-resampling weights
    template: np.ndarray  # (2*w3+1, 2*w2+1, 2*w1+1) detection-frame subimage
    mean_prev: np.ndarray  # (3,) estimate at the last filtered frame
    mean_init: np.ndarray  # (3,) estimate at the reference frame
    oov_flags: np.ndarray = None  # (N,) True where the particle is out of view


@dataclass
class TrackResult:
    """Estimated positions and visibility status for every cell and frame."""

    estimates: np.ndarray  # (T, K, 3) float64 physical positions
    status: np.ndarray  # (T, K) uint8, STATUS_* codes
    method: str  # "spf" or "pf"
    config: TrackConfig
    z_scale: float = 3.0
    tree: object = None  # CellTree for the tree-guided method
    failed_frames: dict = field(default_factory=dict, repr=False)


def _resolve_sigma_lik2(config, dtype):
    if config.sigma_lik2 is not None:
        return float(config.sigma_lik2)
    m = float(np.iinfo(dtype).max)
    return 0.1 * m * m


def _to_voxel_centers(positions, z_scale):
    """Physical particle positions -> integer voxel centers (x, y, z)."""
    idx = positions.copy()
    idx[:, 2] /= z_scale
    return np.floor(idx + 0.5).astype(np.int64)


def _in_view(centers, dims):
    Z, Y, X = dims
    return (
        (centers[:, 0] >= 0)
        & (centers[:, 0] < X)
        & (centers[:, 1] >= 0)
        & (centers[:, 1] < Y)
        & (centers[:, 2] >= 0)
        & (centers[:, 2] < Z)
    )


def extract_template(volume, t, center_physical, window):
    """Cut the matching subimage around a physical position (zero-padded)."""
    frame = volume.frame(t)
    w1, w2, w3 = window
    cx, cy, cz = nearest_voxel(
        np.array([center_physical[0], center_physical[1], center_physical[2] / volume.z_scale])
    )
    Z, Y, X = frame.shape
    out = np.zeros((2 * w3 + 1, 2 * w2 + 1, 2 * w1 + 1), dtype=frame.dtype)
    z0, z1 = max(cz - w3, 0), min(cz + w3 + 1, Z)
    y0, y1 = max(cy - w2, 0), min(cy + w2 + 1, Y)
    x0, x1 = max(cx - w1, 0), min(cx + w1 + 1, X)
    if z0 < z1 and y0 < y1 and x0 < x1:
        out[
            z0 - (cz - w3) : z1 - (cz - w3),
            y0 - (cy - w2) : y1 - (cy - w2),
            x0 - (cx - w1) : x1 - (cx - w1),
        ] = frame[z0:z1, y0:y1, x0:x1]
    return out


def init_trackers(volume, centroids, config):
    """Start one tracker per cell at its detected centroid.

    Templates are cut from frame 0 and matched against every later frame.
    All particles start at the centroid with uniform weights.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    trackers = []
    for k, c in enumerate(centroids):
        particles = np.tile(c, (config.n_particles, 1))
        trackers.append(
            TrackerState(
                cell=k,
                particles=particles,
                weights=np.full(config.n_particles, 1.0 / config.n_particles),
                template=extract_template(volume, 0, c, config.window),
                mean_prev=c.copy(),
                mean_init=c.copy(),
                oov_flags=np.zeros(config.n_particles, dtype=bool),
            )
        )
    return trackers


def propose_root(particles, config, rng):
    """Gaussian random-walk proposal used by the root and the baseline."""
    sigma = np.asarray(config.sigma_root, dtype=np.float64)
    return particles + rng.normal(0.0, 1.0, size=particles.shape) * sigma


def propose_spf(parent_particles, eta_prev, eta_init, config, rng):
    """Tree-guided proposal with rejection of parent-collapsing candidates.

    Particle n starts from parent particle n plus
    ``alpha * eta_prev + (1 - alpha) * eta_init`` and per-axis noise
    ``sigma_step * step_scale``. A candidate whose displacement d from its
    parent particle satisfies u < exp(-|d|^2 / lambda_rej^2) is redrawn, up
    to ``max_reject`` draws total; the last draw always stands. Returns the
    candidates and the number of draws spent per particle.
    """
    n = len(parent_particles)
    offset = config.alpha * np.asarray(eta_prev) + (1.0 - config.alpha) * np.asarray(eta_init)
    sigma = np.asarray(config.sigma_step, dtype=np.float64) * config.step_scale
    lam2 = config.lambda_rej * config.lambda_rej
    candidates = np.empty((n, 3), dtype=np.float64)
    attempts = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    for attempt in range(1, config.max_reject + 1):
        noise = rng.normal(0.0, 1.0, size=(len(pending), 3)) * sigma
        disp = offset + noise
        candidates[pending] = parent_particles[pending] + disp
        attempts[pending] = attempt
        if attempt == config.max_reject:
            break
        p_rej = np.exp(-(disp * disp).sum(axis=1) / lam2)
        rejected = rng.random(len(pending)) < p_rej
        pending = pending[rejected]
        if len(pending) == 0:
            break
    return candidates, attempts


def likelihood(volume, t, position, template, config):
    """Match weight exp(-SSD / (2 sigma^2 W)) of one physical position.

    SSD compares the subimage at the position's voxel center against the
    cell's template; W counts voxel pairs where either side is nonzero.
    Out-of-volume voxels read as zero; a fully out-of-view center gets
    weight 0 (the caller routes such particles around the filter).
    """
    frame = volume.frame(t)
    centers = _to_voxel_centers(np.asarray(position, dtype=np.float64)[None, :], volume.z_scale)
    if not _in_view(centers, frame.shape)[0]:
        return 0.0
    sigma2 = _resolve_sigma_lik2(config, frame.dtype)
    expo = kernels.window_ssd_exponents(
        frame, template, centers, config.window, sigma2, config.threads
    )
    return float(np.exp(-expo[0]))


def weigh_and_resample(particles, weights, in_view, rng):
    """Systematic resampling of in-view particles; out-of-view pass through.

    In-view weights are normalized and resampled into the N - n_oov slots;
    out-of-view particles keep their positions with weight 0. Returns the
    new ensemble, its weights, the unweighted ensemble mean, the new status
    code (out of view when more than half the ensemble is), and whether the
    all-zero-weight fallback to uniform weights fired.
    """
    n = len(particles)
    n_in = int(in_view.sum())
    status = STATUS_OUT_OF_VIEW if (n - n_in) > n / 2 else STATUS_TRACKED
    if n_in == 0:
        ensemble = particles.copy()
        return ensemble, np.zeros(n), ensemble.mean(axis=0), STATUS_OUT_OF_VIEW, False
    w_in = weights[in_view].astype(np.float64)
    total = w_in.sum()
    degenerate = not (total > 0.0)
    if degenerate:
        logger.warning("all in-view particle weights are zero; using uniform weights")
        w_in = np.full(n_in, 1.0 / n_in)
    else:
        w_in = w_in / total
    cum = np.cumsum(w_in)
    cum[-1] = 1.0
    positions = (np.arange(n_in) + rng.random()) / n_in
    picks = np.minimum(np.searchsorted(cum, positions, side="left"), n_in - 1)
    resampled = particles[in_view][picks]
    ensemble = np.concatenate([particles[~in_view], resampled])
    new_weights = np.zeros(n)
    new_weights[n - n_in :] = 1.0 / n_in
    return ensemble, new_weights, ensemble.mean(axis=0), status, degenerate


def _filter_cell(tracker, proposed, frame, dims, sigma2, z_scale, threads, rng):
    """Weigh proposals against the template and resample in place."""
    centers = _to_voxel_centers(proposed, z_scale)
    in_view = _in_view(centers, dims)
    weights = np.zeros(len(proposed))
    if in_view.any():
        expo = kernels.window_ssd_exponents(
            frame,
            tracker.template,
            centers[in_view],
            _current_window(tracker),
            sigma2,
            threads,
        )
        weights[in_view] = np.exp(-expo)
    ensemble, new_weights, estimate, status, degenerate = weigh_and_resample(
        proposed, weights, in_view, rng
    )
    tracker.particles = ensemble
    tracker.weights = new_weights
    tracker.oov_flags = new_weights == 0.0
    return estimate, status, degenerate


def _current_window(tracker):
    d, h, w = tracker.template.shape
    return ((w - 1) // 2, (h - 1) // 2, (d - 1) // 2)


def step_frame(trackers, volume, t, tree, config):
    """Advance every cell one frame, sweeping the tree parent-first.

    Each non-root proposal conditions on the parent's ensemble as already
    filtered at frame t, while both offset terms read the frame t-1
    estimates, which are committed only after the whole sweep.
    """
    frame = volume.frame(t)
    sigma2 = _resolve_sigma_lik2(config, frame.dtype)
    k_count = len(trackers)
    estimates = np.empty((k_count, 3))
    status = np.empty(k_count, dtype=np.uint8)
    for k in tree.order:
        rng = np.random.default_rng([config.seed, k, t])
        tracker = trackers[k]
        if k == tree.root:
            proposed = propose_root(tracker.particles, config, rng)
        else:
            parent = trackers[tree.parent[k]]
            eta_prev = tracker.mean_prev - parent.mean_prev
            eta_init = tracker.mean_init - parent.mean_init
            proposed, _ = propose_spf(parent.particles, eta_prev, eta_init, config, rng)
        estimate, st, degenerate = _filter_cell(
            tracker, proposed, frame, frame.shape, sigma2, volume.z_scale, config.threads, rng
        )
        estimates[k] = estimate
        status[k] = st
        if degenerate:
            logger.info("degenerate weights at frame %d cell %d", t, k)
    for k in tree.order:
        trackers[k].mean_prev = estimates[k]
    return estimates, status


def track_all(volume, tree, config=None):
    """Track every cell through the volume with the tree-guided method."""
    config = config or TrackConfig()
    trackers = init_trackers(volume, tree.nodes, config)
    T = volume.dims[0]
    K = len(tree.nodes)
    estimates = np.empty((T, K, 3))
    status = np.zeros((T, K), dtype=np.uint8)
    estimates[0] = np.asarray(tree.nodes, dtype=np.float64)
    for t in range(1, T):
        estimates[t], status[t] = step_frame(trackers, volume, t, tree, config)
        if t == config.ref_frame:
            for k in range(K):
                trackers[k].mean_init = estimates[t, k].copy()
    return TrackResult(
        estimates=estimates,
        status=status,
        method="spf",
        config=config,
        z_scale=volume.z_scale,
        tree=tree,
    )


def track_all_pf(volume, centroids, config=None):
    """Track every cell independently with random-walk proposals."""
    config = config or TrackConfig()
    centroids = np.asarray(centroids, dtype=np.float64)
    trackers = init_trackers(volume, centroids, config)
    T = volume.dims[0]
    K = len(centroids)
    estimates = np.empty((T, K, 3))
    status = np.zeros((T, K), dtype=np.uint8)
    estimates[0] = centroids
    for t in range(1, T):
        frame = volume.frame(t)
        sigma2 = _resolve_sigma_lik2(config, frame.dtype)
        for k in range(K):
            rng = np.random.default_rng([config.seed, k, t])
            tracker = trackers[k]
            proposed = propose_root(tracker.particles, config, rng)
            estimate, st, _ = _filter_cell(
                tracker, proposed, frame, frame.shape, sigma2, volume.z_scale, config.threads, rng
            )
            estimates[t, k] = estimate
            status[t, k] = st
            tracker.mean_prev = estimate
    return TrackResult(
        estimates=estimates,
        status=status,
        method="pf",
        config=config,
        z_scale=volume.z_scale,
    )


def write_result(path, result):
    """Write ``t k x y z status`` lines; z is stored in index units.

    Header comments carry the method, z scale, and config so the file is
    self-describing.
    """
    cfg = result.config
    with open(path, "w") as fh:
        fh.write(f"# method = {result.method}\n")
        fh.write(f"# z_scale = {result.z_scale}\n")
        for name in cfg.__dataclass_fields__:
            value = getattr(cfg, name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            fh.write(f"# {name} = {value}\n")
        fh.write("# t k x y z status\n")
        T, K, _ = result.estimates.shape
        for t in range(T):
            for k in range(K):
                x, y, z = result.estimates[t, k]
                token = _STATUS_NAMES[int(result.status[t, k])]
                fh.write(f"{t} {k} {x} {y} {z / result.z_scale} {token}\n")


def read_result(path):
    """Read a result file back into (estimates, status, z_scale, header)."""
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}: malformed result line {line!r}")
            if parts[5] not in _STATUS_CODES:
                raise ValueError(f"{path}: unknown status {parts[5]!r}")
            rows.append(
                (
                    int(parts[0]),
                    int(parts[1]),
                    float(parts[2]),
                    float(parts[3]),
                    float(parts[4]),
                    _STATUS_CODES[parts[5]],
                )
            )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    z_scale = float(header.get("z_scale", 3.0))
    T = max(r[0] for r in rows) + 1
    K = max(r[1] for r in rows) + 1
    estimates = np.full((T, K, 3), np.nan)
    status = np.zeros((T, K), dtype=np.uint8)
    for t, k, x, y, z, st in rows:
        estimates[t, k] = (x, y, z * z_scale)
        status[t, k] = st
    if np.isnan(estimates).any():
        raise ValueError(f"{path}: missing (t, k) rows")
    return estimates, status, z_scale, header
