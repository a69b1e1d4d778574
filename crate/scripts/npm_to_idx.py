#!/usr/bin/env python3
"""Convert the `mnist` / `fashion-mnist` npm packages into IDX3 image files.

Usage: npm_to_idx.py <unpacked package dir> <out dir> [test_per_class] [max_per_class]

Images are interleaved round-robin across the ten classes; the last
`test_per_class` images of each class go to t10k-images-idx3-ubyte.gz and
the rest to train-images-idx3-ubyte.gz.
"""
import gzip
import json
import os
import struct
import sys


def load_class(path):
    data = json.load(open(path))["data"]
    if data and isinstance(data[0], list):
        return [bytes(row) for row in data if len(row) == 784]
    # flat list of floats in [0, 1], 784 per image
    rows = []
    for i in range(0, len(data) - 783, 784):
        rows.append(bytes(max(0, min(255, round(v * 255))) for v in data[i:i + 784]))
    return rows


def write_idx(path, images):
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            assert len(img) == 784
            f.write(img)


def main():
    pkg, out = sys.argv[1], sys.argv[2]
    test_per_class = int(sys.argv[3]) if len(sys.argv) > 3 else 100
    sub = "digits" if os.path.isdir(os.path.join(pkg, "src", "digits")) else "clothes"
    max_per_class = int(sys.argv[4]) if len(sys.argv) > 4 else None
    classes = [load_class(os.path.join(pkg, "src", sub, f"{c}.json"))[:max_per_class] for c in range(10)]
    train_cls = [c[:-test_per_class] for c in classes]
    test_cls = [c[-test_per_class:] for c in classes]

    def interleave(groups):
        res = []
        for i in range(max(len(g) for g in groups)):
            for g in groups:
                if i < len(g):
                    res.append(g[i])
        return res

    os.makedirs(out, exist_ok=True)
    train, test = interleave(train_cls), interleave(test_cls)
    write_idx(os.path.join(out, "train-images-idx3-ubyte.gz"), train)
    write_idx(os.path.join(out, "t10k-images-idx3-ubyte.gz"), test)
    print(f"{out}: {len(train)} train, {len(test)} test")


if __name__ == "__main__":
    main()
