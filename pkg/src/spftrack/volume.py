"""4D volume container, binary file format, and preprocessing.

Volumes are dense (T, Z, Y, X) grids of unsigned intensities. The z step of
typical confocal stacks is anisotropic; ``z_scale`` records the physical z
step relative to the xy pixel edge (default 3) and is applied by the modules
that need physically isotropic distances.

The on-disk format is little-endian throughout: 4-byte magic ``SPFV``,
u32 version (1), u32 T, Z, Y, X, u32 dtype code (1 = u8, 2 = u16), then
T*Z*Y*X voxels in t-major, then z, y, x order.
"""

import os
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

MAGIC = b"SPFV"
FORMAT_VERSION = 1
_DTYPE_CODES = {np.dtype(np.uint8): 1, np.dtype(np.uint16): 2}
_CODE_DTYPES = {1: np.dtype("<u1"), 2: np.dtype("<u2")}


class VolumeFormatError(ValueError):
    """Raised for malformed volume files (magic, version, payload size)."""


def nearest_voxel(p):
    """Nearest voxel index of a (possibly fractional) coordinate.

    Halves round up (floor(p + 0.5)) so the mapping is deterministic and
    independent of the platform's round-half-to-even behavior.
    """
    return np.floor(np.asarray(p, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class Volume4D:
    """Dense 4D intensity grid with anisotropy metadata."""

    voxels: np.ndarray  # (T, Z, Y, X), uint8 or uint16
    z_scale: float = 3.0

    def __post_init__(self):
        self.voxels = np.ascontiguousarray(self.voxels)
        if self.voxels.ndim != 4:
            raise ValueError(f"voxels must be 4D (T,Z,Y,X), got shape {self.voxels.shape}")
        if self.voxels.dtype not in _DTYPE_CODES:
            raise ValueError(f"unsupported dtype {self.voxels.dtype}; use uint8 or uint16")
        if not self.z_scale > 0:
            raise ValueError(f"z_scale must be positive, got {self.z_scale}")

    @property
    def dims(self):
        return self.voxels.shape

    @property
    def dtype(self):
        return self.voxels.dtype

    def frame(self, t):
        """The (Z, Y, X) array of frame t (a view, not a copy)."""
        T = self.voxels.shape[0]
        if not 0 <= t < T:
            raise IndexError(f"frame index {t} out of range [0, {T})")
        return self.voxels[t]


@dataclass
class SubImage:
    """A cuboid window of intensities around a center voxel.

    ``values`` is (2*w3+1, 2*w2+1, 2*w1+1) in z, y, x order; positions that
    fall outside the source volume hold exactly 0.
    """

    center: tuple  # (x, y, z) integer voxel coordinate
    half_widths: tuple  # (w1, w2, w3) along (x, y, z)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        w1, w2, w3 = self.half_widths
        expected = (2 * w3 + 1, 2 * w2 + 1, 2 * w1 + 1)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != window shape {expected}")


def load_slices(directory, pattern, dims, z_scale=3.0):
    """Assemble a Volume4D from per-slice 2D grayscale images.

    ``pattern`` is a str.format template with fields ``t`` and ``z``
    (0-based), e.g. ``"img_t{t:03d}_z{z:02d}.png"``. Slices are ingested
    t-major, then z.
    """
    T, Z, Y, X = dims
    voxels = None
    for t in range(T):
        for z in range(Z):
            path = os.path.join(directory, pattern.format(t=t, z=z))
            if not os.path.exists(path):
                raise FileNotFoundError(f"missing slice file {path} (t={t}, z={z})")
            with Image.open(path) as img:
                arr = np.asarray(img)
            if arr.ndim != 2:
                raise ValueError(f"{path}: expected a single-channel grayscale image, got shape {arr.shape}")
            if arr.shape != (Y, X):
                raise ValueError(f"{path}: slice shape {arr.shape} does not match (Y,X)=({Y},{X})")
            if arr.dtype == np.uint8:
                dtype = np.uint8
            elif arr.dtype in (np.uint16, np.int32):
                # Pillow decodes 16-bit grayscale as mode I (int32)
                if arr.max(initial=0) > np.iinfo(np.uint16).max:
                    raise ValueError(f"{path}: bit depth above 16 is unsupported")
                dtype = np.uint16
            else:
                raise ValueError(f"{path}: unsupported pixel dtype {arr.dtype}")
            if voxels is None:
                voxels = np.zeros((T, Z, Y, X), dtype=dtype)
            elif np.dtype(dtype) != voxels.dtype:
                raise ValueError(f"{path}: bit depth differs from earlier slices")
            voxels[t, z] = arr.astype(dtype)
    if voxels is None:
        raise ValueError("empty dims: nothing to load")
    return Volume4D(voxels, z_scale=z_scale)


def _pack_header(dims, dtype):
    T, Z, Y, X = dims
    head = np.array([T, Z, Y, X, _DTYPE_CODES[np.dtype(dtype)]], dtype="<u4")
    version = np.array([FORMAT_VERSION], dtype="<u4")
    return MAGIC + version.tobytes() + head.tobytes()


@contextmanager
def open_volume_writer(path, dims, dtype):
    """Stream a volume to disk frame by frame (t-major order).

    Yields a ``write_frame(arr)`` callable; exactly T frames of shape
    (Z, Y, X) must be written.
    """
    T, Z, Y, X = dims
    dtype = np.dtype(dtype)
    written = [0]
    with open(path, "wb") as fh:
        fh.write(_pack_header(dims, dtype))

        def write_frame(arr):
            arr = np.ascontiguousarray(arr, dtype=dtype.newbyteorder("<"))
            if arr.shape != (Z, Y, X):
                raise ValueError(f"frame shape {arr.shape} != {(Z, Y, X)}")
            fh.write(arr.tobytes())
            written[0] += 1

        yield write_frame
        if written[0] != T:
            raise ValueError(f"wrote {written[0]} frames, header declares {T}")


def write_volume(v, path):
    """Write a Volume4D in the SPFV binary format."""
    with open_volume_writer(path, v.dims, v.dtype) as write_frame:
        for t in range(v.dims[0]):
            write_frame(v.voxels[t])


def read_volume(path, z_scale=3.0, memmap=False):
    """Read an SPFV file back into a Volume4D.

    With ``memmap=True`` the voxel payload is memory-mapped read-only, which
    keeps resident memory low for large volumes.
    """
    header_size = 4 + 4 + 5 * 4
    file_size = os.path.getsize(path)
    with open(path, "rb") as fh:
        head = fh.read(header_size)
    if len(head) < header_size:
        raise VolumeFormatError(f"{path}: file too short for header ({len(head)} bytes)")
    magic = head[:4]
    if magic != MAGIC:
        raise VolumeFormatError(f"{path}: bad magic {magic!r} (expected {MAGIC!r})")
    version = int(np.frombuffer(head, dtype="<u4", count=1, offset=4)[0])
    if version != FORMAT_VERSION:
        raise VolumeFormatError(f"{path}: unsupported format version {version} (expected {FORMAT_VERSION})")
    T, Z, Y, X, code = (int(x) for x in np.frombuffer(head, dtype="<u4", count=5, offset=8))
    if code not in _CODE_DTYPES:
        raise VolumeFormatError(f"{path}: unknown dtype code {code}")
    dtype = _CODE_DTYPES[code]
    n_voxels = T * Z * Y * X
    expected = n_voxels * dtype.itemsize
    actual = file_size - header_size
    if actual != expected:
        raise VolumeFormatError(
            f"{path}: truncated or oversized payload: expected {expected} voxel bytes "
            f"({n_voxels} voxels), found {actual}"
        )
    if memmap:
        voxels = np.memmap(path, dtype=dtype, mode="r", offset=header_size, shape=(T, Z, Y, X))
    else:
        with open(path, "rb") as fh:
            fh.seek(header_size)
            voxels = np.fromfile(fh, dtype=dtype, count=n_voxels).reshape(T, Z, Y, X)
    return Volume4D(voxels, z_scale=z_scale)


def subtract_background(v):
    """Subtract each (t, z) slice's mean intensity, clamping at 0.

    Per-slice because background level varies with imaging depth. Results
    are rounded to the nearest integer and stored in the input dtype.
    """
    out = np.empty_like(v.voxels)
    for t in range(v.dims[0]):
        frame = v.voxels[t].astype(np.float64)
        means = frame.mean(axis=(1, 2), keepdims=True)
        np.rint(np.clip(frame - means, 0.0, None), out=frame)
        out[t] = frame.astype(v.dtype)
    return Volume4D(out, z_scale=v.z_scale)


def median_filter(v, window=(3, 3, 1), num_threads=0):
    """Per-frame 3D median filter with truncated windows at the borders.

    ``window`` gives odd full extents (wx, wy, wz). Border voxels take the
    median over the in-bounds part of their window only.
    """
    from . import kernels

    wx, wy, wz = window
    for w in window:
        if w % 2 == 0 or w < 1:
            raise ValueError(f"window extents must be odd and >= 1, got {window}")
    out = np.empty_like(v.voxels)
    for t in range(v.dims[0]):
        out[t] = kernels.median_filter_frame(v.voxels[t], wx, wy, wz, num_threads)
    return Volume4D(out, z_scale=v.z_scale)


def extract_subimage(v, t, center, w):
    """Extract the cuboid window around the voxel containing ``center``.

    ``center`` is an (x, y, z) index-space coordinate (fractional values are
    mapped to the nearest voxel); ``w`` the (w1, w2, w3) half-widths along
    (x, y, z). Out-of-volume positions read as 0.
    """
    frame = v.frame(t)
    cx, cy, cz = (int(c) for c in nearest_voxel(center))
    w1, w2, w3 = w
    values = extract_window(frame, cx, cy, cz, w1, w2, w3)
    return SubImage(center=(cx, cy, cz), half_widths=(w1, w2, w3), values=values)


def extract_window(frame, cx, cy, cz, w1, w2, w3):
    """Zero-padded (2*w3+1, 2*w2+1, 2*w1+1) window gather from a 3D frame."""
    Z, Y, X = frame.shape
    values = np.zeros((2 * w3 + 1, 2 * w2 + 1, 2 * w1 + 1), dtype=frame.dtype)
    x0, x1 = max(cx - w1, 0), min(cx + w1 + 1, X)
    y0, y1 = max(cy - w2, 0), min(cy + w2 + 1, Y)
    z0, z1 = max(cz - w3, 0), min(cz + w3 + 1, Z)
    if x0 < x1 and y0 < y1 and z0 < z1:
        values[
            z0 - (cz - w3) : z1 - (cz - w3),
            y0 - (cy - w2) : y1 - (cy - w2),
            x0 - (cx - w1) : x1 - (cx - w1),
        ] = frame[z0:z1, y0:y1, x0:x1]
    return values
