#!/usr/bin/env python3
"""Processing-unit sweep: wall time and speedup of sliced execution.

Times the depth method on a 126x625 organized frame for each unit count in
the sweep, against the unsliced single-unit baseline. On a multi-core host
P=5 should land well under half the P=1 time; hardware pipelines of this
architecture go much further, but that is outside what a software harness
can show.
"""

import argparse
import os
import statistics

from groundslice import default_config
from groundslice.parallel_exec import (SliceExecutor, frame_from_ssl,
                                       run_sliced, time_baseline,
                                       write_bench_csv)
from groundslice.ssl_frame import decode_ssl_frame, load_sslraw
from groundslice.synthetic import make_ssl_capture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ssl-file", help="capture to time; synthesized if omitted")
    ap.add_argument("--slices", type=int, default=5)
    ap.add_argument("--units", default="1,2,3,5")
    ap.add_argument("--repeats", type=int, default=11)
    ap.add_argument("--out", default="bench.csv")
    args = ap.parse_args()

    cfg = default_config()
    cfg.depth.sensor_height = cfg.ssl.sensor_height
    raw = load_sslraw(args.ssl_file) if args.ssl_file else make_ssl_capture(0)
    frame = frame_from_ssl(decode_ssl_frame(raw, cfg.ssl.parity), "frame0")
    frame.range_image(cfg)

    print(f"host cores: {os.cpu_count()}")
    baseline = time_baseline(frame, "depth", cfg, repeats=args.repeats)
    print(f"baseline (K=1, P=1): {baseline:.3f} ms")

    records = []
    for p in (int(u) for u in args.units.split(",")):
        executor = SliceExecutor(p, "process") if p > 1 else None
        try:
            for _ in range(3):
                run_sliced(frame, "depth", args.slices, p, cfg, executor=executor)
            times = []
            for _ in range(args.repeats):
                _, rec = run_sliced(frame, "depth", args.slices, p, cfg,
                                    executor=executor)
                times.append(rec.wall_ms)
        finally:
            if executor is not None:
                executor.close()
        rec.wall_ms = statistics.median(times)
        rec.speedup = baseline / rec.wall_ms
        records.append(rec)
        print(f"K={args.slices} P={p}: {rec.wall_ms:.3f} ms  "
              f"speedup {rec.speedup:.2f}x")
    write_bench_csv(records, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
