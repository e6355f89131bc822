#!/usr/bin/env python3
"""Build a 10k-digit MNIST subset in IDX format from the `mnist` npm package.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_subset.py package/src/digits data/mnist-subset

Writes train (first 6000) and test (remaining 4000) IDX files, gzipped,
after a fixed-seed shuffle that interleaves the per-digit source files.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main(src, dst):
    samples = []
    for digit in range(10):
        flat = json.loads((Path(src) / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for start in range(0, len(flat), 784):
            row = flat[start:start + 784]
            pixels = bytes(min(255, max(0, round(v * 255))) for v in row)
            samples.append((pixels, digit))
    random.Random(20200618).shuffle(samples)
    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", samples[:6000]), ("t10k", samples[6000:])):
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x803, (len(part), 28, 28),
                  b"".join(p for p, _ in part))
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(part),),
                  bytes(l for _, l in part))
        print(name, len(part))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
