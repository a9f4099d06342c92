#!/usr/bin/env python3
# Copyright 2026 The cinn Authors
# SPDX-License-Identifier: Apache-2.0
"""Lays out MNIST IDX files where `cinn` looks for them.

Copies (and gunzips when needed) the training images and labels into
<data-root>/mnist/, checks the IDX headers, and optionally keeps only the
first N items.

    tools/prepare_mnist.py --src ~/Downloads --data-root /root/data [--limit 10000]
"""

import argparse
import gzip
import pathlib
import struct
import sys

FILES = {"train-images-idx3-ubyte": 2051, "train-labels-idx1-ubyte": 2049}


def read_source(src: pathlib.Path, name: str) -> bytes:
    for candidate in (src / name, src / (name + ".gz"), src / name.replace("-idx", ".idx")):
        if candidate.exists():
            data = candidate.read_bytes()
            return gzip.decompress(data) if data[:2] == b"\x1f\x8b" else data
    sys.exit(f"missing {name}[.gz] in {src}")


def truncate(data: bytes, magic: int, limit: int) -> bytes:
    got, count = struct.unpack(">II", data[:8])
    if got != magic:
        sys.exit(f"bad magic {got:#x}, expected {magic:#x}")
    header = 16 if magic == 2051 else 8
    item = 28 * 28 if magic == 2051 else 1
    if len(data) < header + count * item:
        sys.exit("truncated IDX file")
    if limit and limit < count:
        count = limit
    return data[:4] + struct.pack(">I", count) + data[8:header] + data[header : header + count * item]


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--src", type=pathlib.Path, required=True, help="directory with the downloaded files")
    p.add_argument("--data-root", type=pathlib.Path, required=True)
    p.add_argument("--limit", type=int, default=0, help="keep the first N items (0 = all)")
    args = p.parse_args()

    out = args.data_root / "mnist"
    out.mkdir(parents=True, exist_ok=True)
    counts = []
    for name, magic in FILES.items():
        data = truncate(read_source(args.src, name), magic, args.limit)
        (out / name).write_bytes(data)
        counts.append(struct.unpack(">I", data[4:8])[0])
    if counts[0] != counts[1]:
        sys.exit(f"image/label count mismatch: {counts[0]} vs {counts[1]}")
    print(f"wrote {counts[0]} items to {out}")


if __name__ == "__main__":
    main()
