#!/usr/bin/env python3
"""Generate the synthetic benchmark data: a street sequence in SemanticKITTI
layout plus a handful of raw solid-state captures."""

import argparse
from pathlib import Path

from groundslice import ssl_frame
from groundslice.synthetic import make_ssl_capture, write_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output root")
    ap.add_argument("--frames", type=int, default=50)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--ssl-captures", type=int, default=3)
    args = ap.parse_args()

    root = Path(args.out)
    seq_dir = write_sequence(root, "00", args.frames, seed=args.seed)
    print(f"wrote {args.frames} frames to {seq_dir}")

    ssl_dir = root / "ssl"
    ssl_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.ssl_captures):
        raw = make_ssl_capture(seed=args.seed + i)
        path = ssl_dir / f"capture_{i:02d}.sslraw"
        ssl_frame.save_sslraw(raw, path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
