#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format for the classification tests.

Source: the 5,000-example MNIST sample bundled with the `mlxtend` wheel
(mlxtend/data/data/mnist_5k.csv.gz, 500 images per digit, label in the last
column). Per class, the first 100 images go to the training split and the
next 100 to the test split; both splits are shuffled with a fixed seed.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl crates/core/tests/data/mnist-subset
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    data = np.loadtxt(io.BytesIO(raw), delimiter=",")
    x, y = data[:, :-1], data[:, -1].astype(int)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(y == c)
        train_idx.extend(idx[:100])
        test_idx.extend(idx[100:200])
    rng = np.random.RandomState(20170101)
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)
    for name, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx_images(f"{out_dir}/{name}-images-idx3-ubyte", x[idx])
        write_idx_labels(f"{out_dir}/{name}-labels-idx1-ubyte", y[idx])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
