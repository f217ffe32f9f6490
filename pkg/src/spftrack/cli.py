"""Command-line interface.

One executable with subcommands covering the whole pipeline:

* ``convert``   image slices -> single 4D volume file
* ``detect``    initial cell centroids from one frame
* ``track``     run the tree-guided tracker or the random-walk baseline
* ``simulate``  synthetic dataset with ground truth
* ``evaluate``  score a result file against a truth file
* ``export-view``  bundle a run for the browser viewer

Exit codes: 0 success, 1 usage error, 2 data error. Options may also come
from ``key = value`` config files; unknown keys are rejected.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__, detect, evaluate, simulate, track, tree, view, volume


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this interface reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            key, sep, value = body.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key or not value:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            values[key] = value
    return values


def _parse_ints(text, n, what):
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if len(parts) != n:
        raise ValueError(f"{what} needs {n} integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _cmd_convert(args):
    dims = _parse_ints(args.dims, 4, "--dims")
    vol = volume.load_slices(args.input_dir, args.pattern, dims, z_scale=args.z_scale)
    if args.subtract_bg:
        vol = volume.subtract_background(vol)
    if args.median:
        window = _parse_ints(args.median, 3, "--median")
        vol = volume.median_filter(vol, window, num_threads=args.threads)
    volume.write_volume(vol, args.out)
    print(f"wrote {args.out}: T={dims[0]} Z={dims[1]} Y={dims[2]} X={dims[3]}")
    return 0


def _cmd_detect(args):
    vol = volume.read_volume(args.volume, z_scale=args.z_scale, memmap=True)
    config = detect.DetectConfig(
        peak_window=_parse_ints(args.peak_window, 3, "--peak-window"),
        min_intensity=args.min_intensity,
        lam=args.lam,
        min_cluster_size=args.min_cluster_size,
        z_scale=vol.z_scale,
    )
    clusters = detect.detect_cells(vol.frame(args.frame), config)
    detect.write_centroids(args.out, clusters.centroids)
    print(f"wrote {args.out}: {clusters.k} cells")
    return 0


def _cmd_track(args):
    values = parse_config_file(args.config) if args.config else {}
    config = track.TrackConfig.from_dict(values)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    if args.ref_frame is not None:
        config.ref_frame = args.ref_frame
    vol = volume.read_volume(args.volume, z_scale=args.z_scale, memmap=True)
    centroids = detect.read_centroids(args.centroids)
    if args.method == "spf":
        cell_tree = tree.build_cell_tree(centroids)
        if args.tree_out:
            tree.write_tree(args.tree_out, cell_tree)
        result = track.track_all(vol, cell_tree, config)
    else:
        result = track.track_all_pf(vol, centroids, config)
    track.write_result(args.out, result)
    print(f"wrote {args.out}: {len(centroids)} cells over {vol.dims[0]} frames ({args.method})")
    return 0


def _cmd_simulate(args):
    values = parse_config_file(args.config) if args.config else {}
    config = simulate.SimConfig.from_dict(values)
    if args.frames is not None:
        config.frames = args.frames
    if args.dims is not None:
        config.dims = _parse_ints(args.dims, 3, "--dims")
    if args.seed is not None:
        config.seed = args.seed
    init = None
    if args.init:
        init = detect.read_centroids(args.init)
    elif not args.scatter:
        raise ValueError("need --init or --scatter")
    vol, truth = simulate.generate_dataset(
        config, init=init, k_count=args.scatter, volume_path=args.out
    )
    simulate.write_truth(args.truth, truth)
    if args.init_out:
        detect.write_centroids(args.init_out, truth.positions[0])
    k_count = truth.positions.shape[1]
    print(f"wrote {args.out} and {args.truth}: {k_count} cells, {config.frames} frames")
    return 0


def _cmd_evaluate(args):
    estimates, _, _, _ = track.read_result(args.result)
    truth_pos, visible, _ = simulate.read_truth(args.truth)
    if estimates.shape != truth_pos.shape:
        raise ValueError(
            f"result shape {estimates.shape} does not match truth {truth_pos.shape}"
        )
    # Positions are physical on load, so the anisotropy is already applied.
    report = evaluate.build_report(
        estimates, truth_pos, visible, threshold=args.threshold, z_scale=1.0
    )
    tsv = args.report_tsv or os.path.splitext(args.report)[0] + ".tsv"
    evaluate.write_report(args.report, tsv, report)
    series = report.rmse_series[~np.isnan(report.rmse_series)]
    print(
        f"wrote {args.report}: rmse_mean={series.mean():.3f} "
        f"failures_per_cell={report.failure_mean:.3f}"
    )
    return 0


def _cmd_export_view(args):
    vol = volume.read_volume(args.volume, z_scale=args.z_scale, memmap=True)
    estimates, status, z_scale, header = track.read_result(args.result)
    config = track.TrackConfig()
    result = track.TrackResult(
        estimates=estimates,
        status=status,
        method=header.get("method", "spf"),
        config=config,
        z_scale=z_scale,
    )
    cell_tree = None
    if args.tree:
        centroids = estimates[0].copy()
        cell_tree = tree.read_tree(args.tree, centroids)
    meta = view.export_view(
        vol, result, args.out, floor=args.floor, stride=args.stride, tree=cell_tree
    )
    print(f"wrote viewer bundle to {args.out}: {meta['dims']['t']} frames")
    return 0


def build_parser():
    parser = _Parser(prog="spftrack", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="stack image slices into a volume file")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--pattern", required=True, help="filename pattern with {t} and {z} fields")
    p.add_argument("--dims", required=True, help="T,Z,Y,X")
    p.add_argument("--z-scale", type=float, default=3.0)
    p.add_argument("--subtract-bg", action="store_true", help="subtract per-slice mean")
    p.add_argument("--median", help="median filter extents wx,wy,wz (odd)")
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("detect", help="detect cell centroids in one frame")
    p.add_argument("--volume", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=8.0,
                   help="cluster opening distance")
    p.add_argument("--min-intensity", type=float, default=None)
    p.add_argument("--peak-window", default="3,3,1")
    p.add_argument("--min-cluster-size", type=int, default=3)
    p.add_argument("--z-scale", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("track", help="track all cells through a volume")
    p.add_argument("--volume", required=True)
    p.add_argument("--centroids", required=True)
    p.add_argument("--method", choices=("spf", "pf"), default="spf")
    p.add_argument("--config", help="key = value tracking config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--ref-frame", type=int, default=None,
                   help="frame whose estimates re-anchor the restoring offsets")
    p.add_argument("--z-scale", type=float, default=3.0)
    p.add_argument("--tree-out", help="write the cell tree used for the sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", help="key = value simulation config file")
    p.add_argument("--scatter", type=int, default=None, help="number of cells to place")
    p.add_argument("--init", help="centroid file with initial positions")
    p.add_argument("--T", "--frames", dest="frames", type=int, default=None,
                   help="number of frames")
    p.add_argument("--dims", default=None, help="X,Y,Z")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="volume file to write")
    p.add_argument("--truth", required=True, help="truth file to write")
    p.add_argument("--init-out", help="also write frame-0 positions as a centroid file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score a result against ground truth")
    p.add_argument("--result", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--threshold", type=float, default=4.5)
    p.add_argument("--z-scale", type=float, default=3.0,
                   help="kept for symmetry; files already carry their z scale")
    p.add_argument("--report", required=True)
    p.add_argument("--report-tsv", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("export-view", help="write a browser viewer bundle")
    p.add_argument("--volume", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--tree", help="tree file to include")
    p.add_argument("--z-scale", type=float, default=3.0)
    p.add_argument("--floor", type=float, default=None, help="minimum exported intensity")
    p.add_argument("--stride", type=int, default=2, help="x/y subsampling step")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_export_view)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"spftrack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
