"""Export a tracking run as a plain-text bundle a browser viewer can load.

The bundle is a directory: ``meta.json`` describes the grid and export
settings, ``frame_%04d.txt`` files hold per-frame sparse voxels as
``x y z v`` rows (intensities strictly above a floor, subsampled by a
stride in x and y), ``tracks.txt`` is the tracker result file verbatim,
and ``tree.txt`` the cell tree when one is available.
"""

import json
import os

import numpy as np

from .track import write_result


def export_view(volume, result, out_dir, floor=None, stride=2, tree=None):
    """Write the viewer bundle for one run.

    ``result`` must cover the same frame count as ``volume``; its cell
    count and the volume grid go into ``meta.json`` so the viewer needs no
    other source of shape information.
    """
    T, Z, Y, X = volume.dims
    if result.estimates.shape[0] != T:
        raise ValueError(
            f"result covers {result.estimates.shape[0]} frames, volume has {T}"
        )
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    dtype_max = float(np.iinfo(volume.dtype).max)
    if floor is None:
        floor = 0.1 * dtype_max
    os.makedirs(out_dir, exist_ok=True)
    for t in range(T):
        frame = volume.frame(t)
        sub = frame[:, ::stride, ::stride]
        zz, yy, xx = np.nonzero(sub > floor)
        vals = sub[zz, yy, xx]
        with open(os.path.join(out_dir, f"frame_{t:04d}.txt"), "w") as fh:
            for x, y, z, v in zip(xx * stride, yy * stride, zz, vals):
                fh.write(f"{x} {y} {z} {int(v)}\n")
    write_result(os.path.join(out_dir, "tracks.txt"), result)
    tree = tree if tree is not None else result.tree
    if tree is not None:
        from .tree import write_tree

        write_tree(os.path.join(out_dir, "tree.txt"), tree)
    meta = {
        "version": 1,
        "dims": {"t": T, "z": Z, "y": Y, "x": X},
        "z_scale": volume.z_scale,
        "cells": int(result.estimates.shape[1]),
        "method": result.method,
        "floor": float(floor),
        "stride": int(stride),
        "dtype_max": dtype_max,
        "has_tree": tree is not None,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta
