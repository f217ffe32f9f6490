"""Synthetic 4D datasets with known ground truth.

Cell motion follows the same tree-guided dynamics the tracker assumes: the
root holds still (optionally random-walks) and every other cell moves with
its parent plus a blended offset drift and per-axis noise. Each visible cell
renders as a truncated anisotropic Gaussian spot; overlaps take the
voxelwise maximum. Cells other than the root blink out independently with a
small probability per frame, which exercises occlusion handling.
"""

from dataclasses import dataclass, field

import numpy as np

from .tree import CellTree, build_cell_tree
from .volume import Volume4D, open_volume_writer

_DTYPE_NAMES = {"u8": np.uint8, "u16": np.uint16}


@dataclass
class SimConfig:
    """Generation parameters.

    ``dims`` is the spatial grid (X, Y, Z); ``frames`` the number of time
    points. ``sigma_step`` are per-axis standard deviations of the relative
    motion noise and ``alpha`` blends latest against initial offsets, as in
    the tracker. ``psf_axes`` holds the squared semi-axes of the rendered
    spot (the quadratic form is sum(d_i^2 / psf_axes_i), truncated at 1) and
    ``peak_intensity`` its center value before quantization. ``p_drop`` is
    the per-frame probability that a non-root cell is hidden. The scatter_*
    fields shape the initial layout when positions are drawn rather than
    given: cells fill a bent tube (a sine-shaped midline in y) with at least
    ``scatter_min_dist`` between any two cells in physical units.
    """

    dims: tuple = (512, 256, 20)
    frames: int = 500
    alpha: float = 0.6
    sigma_step: tuple = (0.6, 0.6, 0.03)
    psf_axes: tuple = (9.0, 6.0, 3.0)
    peak_intensity: float = 200.0
    p_drop: float = 0.03
    root_fixed: bool = True
    z_scale: float = 3.0
    dtype: str = "u8"
    seed: int = 0
    scatter_min_dist: float = 9.0
    scatter_margin: float = 0.07
    scatter_halfwidth: float = 0.09
    scatter_amplitude: float = 0.20

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive extents, got {self.dims}")
        if self.dtype not in _DTYPE_NAMES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPE_NAMES)}, got {self.dtype}")
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError(f"p_drop must be in [0, 1], got {self.p_drop}")
        if min(self.psf_axes) <= 0:
            raise ValueError(f"psf_axes must be positive, got {self.psf_axes}")

    @classmethod
    def from_dict(cls, values):
        """Build from a parsed key=value mapping; unknown keys are errors."""
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            if key in ("frames", "seed"):
                kwargs[key] = int(raw)
            elif key == "root_fixed":
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif key == "dtype":
                kwargs[key] = str(raw)
            elif key == "dims":
                kwargs[key] = tuple(int(v) for v in str(raw).replace(",", " ").split())
            elif key in ("sigma_step", "psf_axes"):
                kwargs[key] = tuple(float(v) for v in str(raw).replace(",", " ").split())
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


@dataclass
class GroundTruth:
    """True positions and visibility used to score tracking output."""

    positions: np.ndarray  # (T, K, 3) float64 physical positions
    visible: np.ndarray  # (T, K) bool
    tree: CellTree
    config: SimConfig = field(repr=False, default=None)


def scatter_cells(k_count, config, rng):
    """Draw initial cell positions inside a bent tube, min-distance apart.

    Positions are physical (z premultiplied by z_scale). Raises when the
    requested count cannot be placed, which signals parameters that leave
    too little room.
    """
    X, Y, Z = config.dims
    mx = config.scatter_margin * X
    amp = config.scatter_amplitude * Y
    half = config.scatter_halfwidth * Y
    z_lo, z_hi = 2.0 * config.z_scale, (Z - 3.0) * config.z_scale
    if z_hi <= z_lo:
        z_lo, z_hi = 0.0, (Z - 1.0) * config.z_scale
    phase = rng.uniform(0.0, 2.0 * np.pi)
    min2 = config.scatter_min_dist**2
    placed = np.empty((k_count, 3))
    n_placed = 0
    for _ in range(20000 * k_count):
        x = rng.uniform(mx, X - mx)
        y = Y / 2.0 + amp * np.sin(2.0 * np.pi * (x - mx) / (X - 2.0 * mx) + phase)
        y += rng.uniform(-half, half)
        z = rng.uniform(z_lo, z_hi)
        cand = np.array([x, y, z])
        if n_placed:
            d2 = ((placed[:n_placed] - cand) ** 2).sum(axis=1)
            if d2.min() < min2:
                continue
        placed[n_placed] = cand
        n_placed += 1
        if n_placed == k_count:
            return placed
    raise ValueError(
        f"could not place {k_count} cells at min distance {config.scatter_min_dist}"
    )


def simulate_positions(init, tree, config, rng):
    """Roll cell positions forward through all frames.

    Frame 0 is the initial layout. For t >= 1 the root either stays or
    random-walks with sigma_step; every other cell, visited in tree order,
    moves to its parent's new position plus
    ``alpha * (previous offset) + (1 - alpha) * (initial offset)`` plus
    per-axis Gaussian noise. Positions may drift outside the volume; the
    renderer simply clips them.
    """
    init = np.asarray(init, dtype=np.float64)
    T = config.frames
    k_count = len(init)
    sigma = np.asarray(config.sigma_step, dtype=np.float64)
    pos = np.empty((T, k_count, 3))
    pos[0] = init
    for t in range(1, T):
        prev = pos[t - 1]
        cur = pos[t]
        if config.root_fixed:
            cur[tree.root] = prev[tree.root]
        else:
            cur[tree.root] = prev[tree.root] + rng.normal(0.0, 1.0, 3) * sigma
        for k in tree.order:
            if k == tree.root:
                continue
            u = tree.parent[k]
            eta_prev = prev[k] - prev[u]
            eta_init = init[k] - init[u]
            offset = config.alpha * eta_prev + (1.0 - config.alpha) * eta_init
            cur[k] = cur[u] + offset + rng.normal(0.0, 1.0, 3) * sigma
    return pos


def sample_visibility(t_count, k_count, config, rng):
    """Frame 0 is fully visible; later frames hide cells i.i.d. with p_drop."""
    visible = np.ones((t_count, k_count), dtype=bool)
    if t_count > 1 and config.p_drop > 0.0:
        visible[1:] = rng.random((t_count - 1, k_count)) >= config.p_drop
    return visible


def render_frame(positions, visible, config):
    """Render one frame: a truncated Gaussian spot per visible cell.

    Spots are evaluated in index space (z divided by z_scale), overlap by
    voxelwise maximum, and quantize by rounding into the configured dtype.
    """
    X, Y, Z = config.dims
    dtype = _DTYPE_NAMES[config.dtype]
    acc = np.zeros((Z, Y, X), dtype=np.float32)
    ax, ay, az = config.psf_axes
    rx, ry, rz = np.sqrt(ax), np.sqrt(ay), np.sqrt(az)
    for k, p in enumerate(positions):
        if not visible[k]:
            continue
        cx, cy, cz = p[0], p[1], p[2] / config.z_scale
        x0, x1 = max(int(np.ceil(cx - rx)), 0), min(int(np.floor(cx + rx)), X - 1)
        y0, y1 = max(int(np.ceil(cy - ry)), 0), min(int(np.floor(cy + ry)), Y - 1)
        z0, z1 = max(int(np.ceil(cz - rz)), 0), min(int(np.floor(cz + rz)), Z - 1)
        if x0 > x1 or y0 > y1 or z0 > z1:
            continue
        gz, gy, gx = np.ogrid[z0 : z1 + 1, y0 : y1 + 1, x0 : x1 + 1]
        d2 = (gx - cx) ** 2 / ax + (gy - cy) ** 2 / ay + (gz - cz) ** 2 / az
        spot = np.where(d2 < 1.0, config.peak_intensity * np.exp(-0.5 * d2), 0.0)
        region = acc[z0 : z1 + 1, y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(region, spot.astype(np.float32), out=region)
    return np.clip(np.rint(acc), 0, np.iinfo(dtype).max).astype(dtype)


def generate_dataset(config, init=None, k_count=None, volume_path=None):
    """Generate a full dataset; returns (Volume4D, GroundTruth).

    ``init`` gives explicit initial positions (physical z); otherwise
    ``k_count`` cells are scattered. With ``volume_path`` the voxels stream
    to disk frame by frame and the returned volume memory-maps that file,
    which keeps peak memory flat for long recordings.
    """
    rng = np.random.default_rng(config.seed)
    if init is None:
        if k_count is None:
            raise ValueError("need init positions or k_count")
        init = scatter_cells(k_count, config, rng)
    init = np.asarray(init, dtype=np.float64)
    tree = build_cell_tree(init)
    positions = simulate_positions(init, tree, config, rng)
    visible = sample_visibility(config.frames, len(init), config, rng)
    X, Y, Z = config.dims
    dims = (config.frames, Z, Y, X)
    truth = GroundTruth(positions=positions, visible=visible, tree=tree, config=config)
    if volume_path is None:
        voxels = np.empty(dims, dtype=_DTYPE_NAMES[config.dtype])
        for t in range(config.frames):
            voxels[t] = render_frame(positions[t], visible[t], config)
        return Volume4D(voxels=voxels, z_scale=config.z_scale), truth
    with open_volume_writer(volume_path, dims, _DTYPE_NAMES[config.dtype]) as write_frame:
        for t in range(config.frames):
            write_frame(render_frame(positions[t], visible[t], config))
    from .volume import read_volume

    return read_volume(volume_path, z_scale=config.z_scale, memmap=True), truth


def write_truth(path, truth):
    """Write ``t k x y z visible`` lines; z is stored in index units."""
    cfg = truth.config
    z_scale = cfg.z_scale if cfg is not None else 3.0
    T, K, _ = truth.positions.shape
    with open(path, "w") as fh:
        fh.write(f"# z_scale = {z_scale}\n")
        fh.write(f"# root = {truth.tree.root}\n")
        fh.write("# t k x y z visible\n")
        for t in range(T):
            for k in range(K):
                x, y, z = truth.positions[t, k]
                fh.write(f"{t} {k} {x} {y} {z / z_scale} {int(truth.visible[t, k])}\n")


def read_truth(path):
    """Read a truth file back into (positions, visible, z_scale)."""
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
                raise ValueError(f"{path}: malformed truth line {line!r}")
            rows.append(
                (int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]),
                 float(parts[4]), bool(int(parts[5])))
            )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    z_scale = float(header.get("z_scale", 3.0))
    T = max(r[0] for r in rows) + 1
    K = max(r[1] for r in rows) + 1
    positions = np.full((T, K, 3), np.nan)
    visible = np.zeros((T, K), dtype=bool)
    for t, k, x, y, z, vis in rows:
        positions[t, k] = (x, y, z * z_scale)
        visible[t, k] = vis
    if np.isnan(positions).any():
        raise ValueError(f"{path}: missing (t, k) rows")
    return positions, visible, z_scale
