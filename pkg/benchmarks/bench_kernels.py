"""Time the hot kernels on every importable backend.

Runs window_ssd_exponents (the per-sweep likelihood batch) and
median_filter_frame (the preprocessing filter) on a realistic frame and
prints a per-call timing table. Both backends must return identical
results, so the run doubles as an agreement check.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 5] [--dims 512,256,20]
"""

import argparse
import time

import numpy as np

from spftrack.kernels import available_backends, get_backend


def best_of(repeats, fn, *args):
    """Best wall time of ``repeats`` calls, first call discarded as warmup."""
    fn(*args)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def make_frame(dims, rng):
    X, Y, Z = dims
    frame = rng.integers(0, 40, size=(Z, Y, X), dtype=np.uint8)
    # A few bright blobs so the windows are not pure noise.
    for _ in range(60):
        x, y, z = rng.integers((8, 8, 2), (X - 8, Y - 8, Z - 2))
        frame[z - 1 : z + 2, y - 4 : y + 5, x - 4 : x + 5] |= rng.integers(
            120, 220, dtype=np.uint8
        )
    return frame


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timed calls per case")
    ap.add_argument("--dims", default="512,256,20", help="frame extents X,Y,Z")
    ap.add_argument(
        "--centers",
        default="1000,10000,40000",
        help="batch sizes for the likelihood kernel",
    )
    args = ap.parse_args()

    dims = tuple(int(s) for s in args.dims.split(","))
    batches = [int(s) for s in args.centers.split(",")]
    rng = np.random.default_rng(0)
    frame = make_frame(dims, rng)
    X, Y, Z = dims

    half = (3, 3, 1)
    template = frame[
        Z // 2 - half[2] : Z // 2 + half[2] + 1,
        Y // 2 - half[1] : Y // 2 + half[1] + 1,
        X // 2 - half[0] : X // 2 + half[0] + 1,
    ].copy()

    backends = available_backends()
    print(f"frame {X}x{Y}x{Z} uint8, backends: {', '.join(backends)}")
    print()
    header = f"{'kernel':<34}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    cases = []
    for n in batches:
        centers = np.column_stack(
            [
                rng.integers(0, X, size=n),
                rng.integers(0, Y, size=n),
                rng.integers(0, Z, size=n),
            ]
        ).astype(np.int64)
        cases.append(
            (
                f"window_ssd_exponents n={n}",
                "window_ssd_exponents",
                (frame, template, centers, half, 6502.5),
            )
        )
    cases.append(
        ("median_filter_frame 3x3x1", "median_filter_frame", (frame, 3, 3, 1))
    )
    cases.append(
        ("median_filter_frame 3x3x3", "median_filter_frame", (frame, 3, 3, 3))
    )

    for label, fn_name, fn_args in cases:
        outs = []
        row = f"{label:<34}"
        per_backend = []
        for b in backends:
            fn = getattr(get_backend(b), fn_name)
            dt = best_of(args.repeats, fn, *fn_args)
            per_backend.append(dt)
            outs.append(fn(*fn_args))
            row += f"{dt * 1e3:>10.1f}ms"
        if len(outs) == 2:
            if not np.array_equal(outs[0], outs[1]):
                raise SystemExit(f"backend mismatch on {label}")
            row += f"{per_backend[1] / per_backend[0]:>9.1f}x"
        print(row)

    if len(backends) == 2:
        print()
        print("speedup = numpy time / native time; outputs verified identical")


if __name__ == "__main__":
    main()
