# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tracking kernels.

Mirrors ``spftrack.kernels._numpy`` exactly: sums of squared differences and
overlap counts are exact integers and the exponent divide uses the same
association, so both backends return bit-identical float64 arrays.
"""

import os

from libc.stdlib cimport free, malloc

from cython.parallel cimport prange

import numpy as np

cimport numpy as cnp

ctypedef fused pixel_t:
    cnp.uint8_t
    cnp.uint16_t

NAME = "native"


def window_ssd_exponents(frame, template, centers, half_widths, sigma2,
                         num_threads=0):
    """Exponent of the match weight for each particle center.

    See the numpy backend for the contract. ``frame`` must be uint8 or
    uint16; ``centers`` holds integer voxel coordinates as (x, y, z) rows.
    """
    frame = np.ascontiguousarray(frame)
    if frame.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"frame dtype must be uint8 or uint16, got {frame.dtype}")
    return _ssd_impl(
        frame,
        np.ascontiguousarray(template, dtype=np.int64),
        np.ascontiguousarray(centers, dtype=np.int64),
        int(half_widths[0]), int(half_widths[1]), int(half_widths[2]),
        float(sigma2), int(num_threads) if num_threads > 0 else (os.cpu_count() or 1),
    )


def _ssd_impl(const pixel_t[:, :, ::1] frame, const cnp.int64_t[:, :, ::1] template,
              const cnp.int64_t[:, ::1] centers, int w1, int w2, int w3,
              double sigma2, int num_threads):
    cdef Py_ssize_t n = centers.shape[0]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t Z = frame.shape[0], Y = frame.shape[1], X = frame.shape[2]
    cdef Py_ssize_t i, z, y, x, zz, yy, xx, cx, cy, cz
    cdef long long ssd, w_cnt, cur, tmp, d
    cdef int nthreads = num_threads
    if template.shape[0] != 2 * w3 + 1 or template.shape[1] != 2 * w2 + 1 \
            or template.shape[2] != 2 * w1 + 1:
        raise ValueError("template shape does not match half widths")
    with nogil:
        for i in prange(n, num_threads=nthreads, schedule='static'):
            cx = centers[i, 0]
            cy = centers[i, 1]
            cz = centers[i, 2]
            ssd = 0
            w_cnt = 0
            for zz in range(2 * w3 + 1):
                z = cz - w3 + zz
                for yy in range(2 * w2 + 1):
                    y = cy - w2 + yy
                    for xx in range(2 * w1 + 1):
                        x = cx - w1 + xx
                        if 0 <= z < Z and 0 <= y < Y and 0 <= x < X:
                            cur = <long long> frame[z, y, x]
                        else:
                            cur = 0
                        tmp = template[zz, yy, xx]
                        d = cur - tmp
                        ssd = ssd + d * d
                        if cur + tmp != 0:
                            w_cnt = w_cnt + 1
            if w_cnt > 0:
                out_v[i] = (<double> ssd) / ((2.0 * sigma2) * (<double> w_cnt))
    return out


def median_filter_frame(frame, wx, wy, wz, num_threads=0):
    """Median filter one frame with window extents (wx, wy, wz), all odd.

    Border windows truncate to in-bounds voxels; the median of n values is
    the sorted element at index n // 2, matching the numpy backend.
    """
    if wx % 2 == 0 or wy % 2 == 0 or wz % 2 == 0 or min(wx, wy, wz) < 1:
        raise ValueError(f"window extents must be odd and >= 1, got {(wx, wy, wz)}")
    frame = np.ascontiguousarray(frame)
    if frame.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"frame dtype must be uint8 or uint16, got {frame.dtype}")
    out = np.empty_like(frame)
    _median_impl(frame, out, int(wx) // 2, int(wy) // 2, int(wz) // 2,
                 int(num_threads) if num_threads > 0 else (os.cpu_count() or 1))
    return out


def _median_impl(const pixel_t[:, :, ::1] frame, pixel_t[:, :, ::1] out,
                 int hx, int hy, int hz, int num_threads):
    cdef Py_ssize_t Z = frame.shape[0]
    cdef Py_ssize_t z
    cdef int nthreads = num_threads
    cdef int ok = 1
    with nogil:
        for z in prange(Z, num_threads=nthreads, schedule='static'):
            if _median_slice(frame, out, z, hx, hy, hz) != 0:
                ok = 0
    if not ok:
        raise MemoryError("median filter buffer allocation failed")


cdef int _median_slice(const pixel_t[:, :, ::1] frame, pixel_t[:, :, ::1] out,
                       Py_ssize_t z, int hx, int hy, int hz) noexcept nogil:
    cdef Py_ssize_t Z = frame.shape[0], Y = frame.shape[1], X = frame.shape[2]
    cdef int cap = (2 * hx + 1) * (2 * hy + 1) * (2 * hz + 1)
    cdef int* buf = <int*> malloc(cap * sizeof(int))
    cdef Py_ssize_t y, x, zz, yy, xx
    cdef int cnt, j, key
    if buf == NULL:
        return 1
    for y in range(Y):
        for x in range(X):
            cnt = 0
            for zz in range(z - hz, z + hz + 1):
                if zz < 0 or zz >= Z:
                    continue
                for yy in range(y - hy, y + hy + 1):
                    if yy < 0 or yy >= Y:
                        continue
                    for xx in range(x - hx, x + hx + 1):
                        if xx < 0 or xx >= X:
                            continue
                        key = <int> frame[zz, yy, xx]
                        j = cnt - 1
                        while j >= 0 and buf[j] > key:
                            buf[j + 1] = buf[j]
                            j = j - 1
                        buf[j + 1] = key
                        cnt = cnt + 1
            out[z, y, x] = <pixel_t> buf[cnt // 2]
    free(buf)
    return 0
