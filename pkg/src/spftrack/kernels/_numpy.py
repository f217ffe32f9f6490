"""Pure-numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable.
Both backends must produce bit-identical results: all sums of squared
differences and element counts are exact integer arithmetic, and the final
exponent is computed as ``ssd / ((2.0 * sigma2) * W)`` in float64 with that
exact association in both implementations.
"""

import numpy as np

NAME = "numpy"


def window_ssd_exponents(frame, template, centers, half_widths, sigma2, num_threads=0):
    """Likelihood exponents for a batch of candidate window centers.

    For each center, gathers the cuboid window (out-of-bounds voxels read as
    zero), computes the sum of squared differences against ``template`` and
    the count W of positions where ``window + template != 0``, and returns
    ``ssd / (2 * sigma2 * W)`` (0 where W == 0).

    frame: (Z, Y, X) unsigned int array.
    template: (2*w3+1, 2*w2+1, 2*w1+1) unsigned int array (z, y, x order).
    centers: (N, 3) int64 voxel coordinates, columns (x, y, z); the center
        voxel itself must be in bounds.
    half_widths: (w1, w2, w3) along (x, y, z).
    num_threads is accepted for signature parity and ignored.
    """
    centers = np.ascontiguousarray(centers, dtype=np.int64)
    if centers.size == 0:
        return np.zeros(0, dtype=np.float64)
    Z, Y, X = frame.shape
    w1, w2, w3 = half_widths
    ox = np.arange(-w1, w1 + 1, dtype=np.int64)
    oy = np.arange(-w2, w2 + 1, dtype=np.int64)
    oz = np.arange(-w3, w3 + 1, dtype=np.int64)
    ax = centers[:, 0, None, None, None] + ox[None, None, None, :]
    ay = centers[:, 1, None, None, None] + oy[None, None, :, None]
    az = centers[:, 2, None, None, None] + oz[None, :, None, None]
    inb = (ax >= 0) & (ax < X) & (ay >= 0) & (ay < Y) & (az >= 0) & (az < Z)
    flat = (az.clip(0, Z - 1) * Y + ay.clip(0, Y - 1)) * X + ax.clip(0, X - 1)
    cur = frame.reshape(-1)[flat].astype(np.int64)
    cur *= inb
    tmpl = template.astype(np.int64)[None, :, :, :]
    diff = cur - tmpl
    ssd = (diff * diff).sum(axis=(1, 2, 3))
    w_cnt = ((cur + tmpl) != 0).sum(axis=(1, 2, 3))
    expo = np.zeros(len(centers), dtype=np.float64)
    pos = w_cnt > 0
    expo[pos] = ssd[pos] / ((2.0 * sigma2) * w_cnt[pos])
    return expo


def median_filter_frame(frame, wx, wy, wz, num_threads=0):
    """Median filter one 3D frame with truncated windows at the borders.

    Window extents (wx, wy, wz) are odd full widths along (x, y, z). At the
    borders the median is taken over in-bounds voxels only. The median of a
    window of n values is the sorted element at index n // 2, so the output
    is always drawn from the input multiset.
    """
    if wx % 2 == 0 or wy % 2 == 0 or wz % 2 == 0:
        raise ValueError("median window extents must be odd")
    Z, Y, X = frame.shape
    hx, hy, hz = wx // 2, wy // 2, wz // 2
    m = wx * wy * wz
    sent = np.int32(np.iinfo(np.int32).max)
    stack = np.full((m, Z, Y, X), sent, dtype=np.int32)
    i = 0
    for dz in range(-hz, hz + 1):
        zs_dst = slice(max(0, -dz), Z - max(0, dz))
        zs_src = slice(max(0, dz), Z - max(0, -dz))
        for dy in range(-hy, hy + 1):
            ys_dst = slice(max(0, -dy), Y - max(0, dy))
            ys_src = slice(max(0, dy), Y - max(0, -dy))
            for dx in range(-hx, hx + 1):
                xs_dst = slice(max(0, -dx), X - max(0, dx))
                xs_src = slice(max(0, dx), X - max(0, -dx))
                stack[i, zs_dst, ys_dst, xs_dst] = frame[zs_src, ys_src, xs_src]
                i += 1
    stack.sort(axis=0, kind="stable")
    counts = (stack != sent).sum(axis=0)
    med = np.take_along_axis(stack, (counts // 2)[None, :, :, :], axis=0)[0]
    return med.astype(frame.dtype)
