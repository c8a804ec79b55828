"""Command-line front end: segment, eval, bench, render, decode-ssl.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
segment run writes a manifest echoing the full effective config, so a run
is reproducible from the manifest plus inputs alone.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import ssl_frame as sslmod
from .config import RunConfig, default_config, dump_config, load_config
from .kitti_io import GROUND_CLASS_PRESETS, load_frame, list_sequence, load_velodyne_bin
from .metrics import aggregate, confusion, f1, iou, write_frame_csv, write_summary_csv
from .parallel_exec import (METHODS, SliceExecutor, frame_from_cloud,
                            frame_from_ssl, run_sliced, time_baseline,
                            write_bench_csv)
from .range_image import from_ssl_frame


class UsageError(Exception):
    """Bad arguments, paths or config: exit code 2."""


def _parse_frames(text: str | None):
    if text is None:
        return None
    if ".." in text:
        a, b = text.split("..", 1)
        return (int(a), int(b))
    v = int(text)
    return (v, v)


def _parse_int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty integer list: {text!r}")
    return out


def _load_cfg(args) -> RunConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            return load_config(path)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return default_config()


def _ground_classes(cfg: RunConfig):
    preset = cfg.dataset.ground_classes
    if preset not in GROUND_CLASS_PRESETS:
        raise UsageError(f"unknown ground class preset {preset!r}")
    return GROUND_CLASS_PRESETS[preset]


def _iter_kitti_frames(args, cfg: RunConfig, with_labels: bool):
    root = Path(args.root)
    if not root.is_dir():
        raise UsageError(f"dataset root not found: {root}")
    try:
        pairs = list_sequence(root, args.sequence, _parse_frames(args.frames))
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    if not pairs:
        raise UsageError(f"no frames matched in sequence {args.sequence}")
    classes = _ground_classes(cfg)
    for scan_path, label_path in pairs:
        if with_labels:
            cloud, truth, dropped = load_frame(scan_path, label_path, classes)
        else:
            cloud, dropped = load_velodyne_bin(scan_path)
            truth = None
        frame = frame_from_cloud(cloud, frame_id=scan_path.stem)
        yield frame, truth, dropped


def _load_ssl_input(path, cfg: RunConfig):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"capture not found: {path}")
    if path.suffix == ".csv":
        raw = sslmod.load_ssl_csv(path)
    else:
        raw = sslmod.load_sslraw(path)
    return sslmod.decode_ssl_frame(raw, cfg.ssl.parity)


def _record_mask_kitti(mask: np.ndarray, dropped: np.ndarray) -> np.ndarray:
    """Expand a cloud-aligned mask back to raw record order (dropped -> 0)."""
    n_raw = mask.size + dropped.size
    out = np.zeros(n_raw, dtype=np.uint8)
    keep = np.ones(n_raw, dtype=bool)
    keep[dropped] = False
    out[keep] = mask.astype(np.uint8)
    return out


def _record_mask_ssl(mask: np.ndarray, frame: sslmod.SslFrame) -> np.ndarray:
    """Per-record mask: valid cells carry their point's flag, invalid are 0."""
    out = np.zeros(sslmod.RECORDS_PER_FRAME, dtype=np.uint8)
    record_of_point = frame.index_map[frame.valid]
    out[record_of_point] = mask.astype(np.uint8)
    return out


def cmd_segment(args) -> int:
    cfg = _load_cfg(args)
    if args.method not in METHODS:
        raise UsageError(f"--method must be one of {METHODS}")
    k, p = args.slices, args.units
    if not 1 <= p <= k:
        raise UsageError(f"--units must be in 1..{k} for {k} slices")
    out_dir = Path(args.out)

    jobs = []  # (frame, record_mask_fn)
    if args.ssl_file:
        ssl = _load_ssl_input(args.ssl_file, cfg)
        frame = frame_from_ssl(ssl, frame_id=Path(args.ssl_file).stem)
        if args.method == "depth":
            cfg.depth.sensor_height = cfg.ssl.sensor_height
        jobs.append((frame, lambda m, s=ssl: _record_mask_ssl(m, s)))
    elif args.root:
        for frame, _, dropped in _iter_kitti_frames(args, cfg, with_labels=False):
            jobs.append((frame, lambda m, d=dropped: _record_mask_kitti(m, d)))
    else:
        raise UsageError("segment needs --root or --ssl-file")

    out_dir.mkdir(parents=True, exist_ok=True)
    source = (f"ssl_file={args.ssl_file}" if args.ssl_file else
              f"root={args.root} sequence={args.sequence} frames={args.frames}")
    manifest = [f"# groundslice segment method={args.method} slices={k} units={p} "
                f"seed={args.seed} {source}", ""]
    executor = SliceExecutor(p, cfg.parallel.backend) if p > 1 else None
    try:
        for frame, to_records in jobs:
            mask, record = run_sliced(frame, args.method, k, p, cfg,
                                      seed=args.seed, executor=executor)
            (out_dir / f"{frame.frame_id}.mask").write_bytes(to_records(mask).tobytes())
            manifest.append(f"# frame {frame.frame_id}: {int(mask.sum())} ground, "
                            f"{record.wall_ms:.3f} ms")
    finally:
        if executor is not None:
            executor.close()
    manifest.append("")
    manifest.append(dump_config(cfg))
    (out_dir / "manifest.txt").write_text("\n".join(manifest))
    print(f"wrote {len(jobs)} mask file(s) to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    methods = METHODS if args.method == "all" else tuple(args.method.split(","))
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    slice_counts = _parse_int_list(args.slices)
    if args.units < 1:
        raise UsageError("--units must be >= 1")
    if not args.root:
        raise UsageError("eval needs --root (labelled dataset)")

    loaded = [(frame, truth) for frame, truth, _ in
              _iter_kitti_frames(args, cfg, with_labels=True)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    executor = (SliceExecutor(args.units, cfg.parallel.backend)
                if args.units > 1 else None)
    frame_rows = []
    summary_rows = []
    try:
        for method in methods:
            for k in slice_counts:
                iou_values, f1_values = [], []
                empty_ground = 0
                p = min(args.units, k)  # masks are P-independent by contract
                for frame, truth in loaded:
                    mask, _ = run_sliced(frame, method, k, p, cfg,
                                         seed=args.seed, executor=executor)
                    stats = confusion(mask, truth)
                    empty_ground += stats.empty_ground
                    iou_values.append(iou(stats))
                    f1_values.append(f1(stats))
                    frame_rows.append((method, k, frame.frame_id,
                                       iou_values[-1], f1_values[-1]))
                summary_rows.append((method, k, aggregate(iou_values),
                                     aggregate(f1_values)))
                line = (f"{method} K={k}: mean IoU {summary_rows[-1][2].mean:.4f} "
                        f"± {summary_rows[-1][2].std:.4f}")
                if empty_ground:
                    line += f"  ({empty_ground} empty-ground frames scored 1.0)"
                print(line)
    finally:
        if executor is not None:
            executor.close()
    write_frame_csv(frame_rows, out_dir / "eval_frames.csv")
    write_summary_csv(summary_rows, out_dir / "eval_summary.csv")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    if args.method not in METHODS:
        raise UsageError(f"--method must be one of {METHODS}")
    k = args.slices
    unit_set = _parse_int_list(args.units_set)
    for p in unit_set:
        if not 1 <= p <= k:
            raise UsageError(f"unit count {p} invalid for {k} slices")

    frames = []
    if args.ssl_file:
        ssl = _load_ssl_input(args.ssl_file, cfg)
        if args.method == "depth":
            cfg.depth.sensor_height = cfg.ssl.sensor_height
        frames.append(frame_from_ssl(ssl, frame_id=Path(args.ssl_file).stem))
    elif args.root:
        frames.extend(f for f, _, _ in _iter_kitti_frames(args, cfg, with_labels=False))
    else:
        raise UsageError("bench needs --root or --ssl-file")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    repeats = cfg.parallel.bench_repeats
    for frame in frames:
        baseline = time_baseline(frame, args.method, cfg, seed=args.seed,
                                 repeats=repeats, warmup=cfg.parallel.bench_warmup)
        for p in unit_set:
            executor = SliceExecutor(p, cfg.parallel.backend) if p > 1 else None
            try:
                for _ in range(cfg.parallel.bench_warmup):
                    run_sliced(frame, args.method, k, p, cfg, seed=args.seed,
                               executor=executor)
                times = []
                for _ in range(repeats):
                    _, rec = run_sliced(frame, args.method, k, p, cfg,
                                        seed=args.seed, executor=executor)
                    times.append(rec.wall_ms)
            finally:
                if executor is not None:
                    executor.close()
            times.sort()
            rec.wall_ms = times[len(times) // 2]
            rec.speedup = baseline / rec.wall_ms
            records.append(rec)
            print(f"{frame.frame_id} K={k} P={p}: {rec.wall_ms:.3f} ms "
                  f"(speedup {rec.speedup:.2f}x)")
    write_bench_csv(records, out_dir / "bench.csv")
    return 0


def _write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.astype(np.uint8).tobytes())


def cmd_render(args) -> int:
    cfg = _load_cfg(args)
    if args.ssl_file:
        ssl = _load_ssl_input(args.ssl_file, cfg)
        image, _ = from_ssl_frame(ssl)
        # record mask -> per-point mask over the valid-cell cloud
        record_of_point = ssl.index_map[ssl.valid]
    elif args.root:
        frames = list(_iter_kitti_frames(args, cfg, with_labels=False))
        if len(frames) != 1:
            raise UsageError("render needs exactly one frame; narrow --frames")
        frame, _, dropped = frames[0]
        image = frame.range_image(cfg)
    else:
        raise UsageError("render needs --root or --ssl-file")

    pixel_ground = np.zeros((image.rows, image.cols), dtype=bool)
    if args.mask:
        mask_path = Path(args.mask)
        if not mask_path.is_file():
            raise UsageError(f"mask file not found: {mask_path}")
        record_mask = np.frombuffer(mask_path.read_bytes(), dtype=np.uint8).astype(bool)
        if args.ssl_file:
            if record_mask.size != sslmod.RECORDS_PER_FRAME:
                raise UsageError(f"mask length {record_mask.size} does not match "
                                 f"{sslmod.RECORDS_PER_FRAME} records")
            point_mask = record_mask[record_of_point]
        else:
            n_raw = len(frame.cloud) + dropped.size
            if record_mask.size != n_raw:
                raise UsageError(f"mask length {record_mask.size} does not match "
                                 f"scan record count {n_raw}")
            keep = np.ones(n_raw, dtype=bool)
            keep[dropped] = False
            point_mask = record_mask[keep]
        filled = image.point_index != -1
        pixel_ground[filled] = point_mask[image.point_index[filled]]

    valid = image.range_m > 0
    gray = np.zeros((image.rows, image.cols))
    if valid.any():
        inv = np.zeros_like(gray)
        inv[valid] = 1.0 / image.range_m[valid]
        lo, hi = inv[valid].min(), inv[valid].max()
        span = (hi - lo) if hi > lo else 1.0
        gray[valid] = (inv[valid] - lo) / span
    g8 = np.round(40 + gray * 215).astype(np.uint8)
    rgb = np.zeros((image.rows, image.cols, 3), dtype=np.uint8)
    for ch in range(3):
        rgb[:, :, ch] = np.where(valid, g8, 0)
    rgb[pixel_ground & valid] = (255, 40, 40)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_ppm(out_path, rgb)
    print(f"wrote {out_path} ({image.cols}x{image.rows})")
    return 0


def cmd_decode_ssl(args) -> int:
    cfg = _load_cfg(args)
    parity = args.parity or cfg.ssl.parity
    if parity not in ("even", "odd"):
        raise UsageError(f"--parity must be even or odd, got {parity!r}")
    path = Path(args.ssl_file)
    if not path.is_file():
        raise UsageError(f"capture not found: {path}")
    raw = sslmod.load_ssl_csv(path) if path.suffix == ".csv" else sslmod.load_sslraw(path)
    frame = sslmod.decode_ssl_frame(raw, parity)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{path.stem}.sslframe"
    with open(out_path, "wb") as fh:
        fh.write(np.array([frame.rows, frame.cols], dtype="<u4").tobytes())
        fh.write(frame.xyz.astype("<f4").tobytes())
        fh.write(frame.valid.astype(np.uint8).tobytes())

    print(f"decoded {path.name}: {frame.rows}x{frame.cols} grid, "
          f"{frame.subframe_count} subframes of {sslmod.RECORDS_PER_SUBFRAME} points")
    for s in range(frame.subframe_count):
        xyz, valid = sslmod.subframe(frame, s)
        n_valid = int(valid.sum())
        line = f"subframe {s}: valid {n_valid}/{sslmod.RECORDS_PER_SUBFRAME}"
        if n_valid:
            for axis, name in enumerate("xyz"):
                vals = xyz[:, :, axis][valid]
                line += f"  {name} [{vals.min():.3f}, {vals.max():.3f}]"
        print(line)
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundslice",
        description="Sliced-frame parallel LiDAR ground segmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p, units=True):
        p.add_argument("--config", help="config file (flat sectioned key=value)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory/file")
        p.add_argument("--frames", help="inclusive frame interval a..b")
        p.add_argument("--root", help="dataset root (sequences/<id>/...)")
        p.add_argument("--sequence", default="00")
        p.add_argument("--ssl-file", help="raw solid-state capture (.sslraw or .csv)")

    p = sub.add_parser("segment", help="write per-frame ground masks")
    add_shared(p)
    p.add_argument("--method", required=True)
    p.add_argument("--slices", type=int, default=1)
    p.add_argument("--units", type=int, default=1)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="IoU/F1 per (method, slice count)")
    add_shared(p)
    p.add_argument("--method", default="all", help="method or comma list or 'all'")
    p.add_argument("--slices", default="1..5", help="slice counts, e.g. 1..5 or 1,3")
    p.add_argument("--units", type=int, default=1,
                   help="processing units (results are unit-independent)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="wall-time sweep over processing units")
    add_shared(p)
    p.add_argument("--method", required=True)
    p.add_argument("--slices", type=int, default=5)
    p.add_argument("--units-set", default="1,2,3,5", dest="units_set")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="range image to PPM, mask overlaid red")
    add_shared(p)
    p.add_argument("--mask", help="mask file from `segment`")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("decode-ssl", help="organize a raw capture, print stats")
    add_shared(p)
    p.add_argument("--parity", choices=("even", "odd"))
    p.set_defaults(func=cmd_decode_ssl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
