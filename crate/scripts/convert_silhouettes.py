#!/usr/bin/env python3
"""Convert CalTech101 Silhouettes (28x28, split 1) to the packed-bitmap file.

Input is `caltech101_silhouettes_28_split1.mat` from the dataset's public
distribution, holding train/val/test `*_data` (N x 784, binary) and
`*_labels` (1-based class ids). Images in the .mat file are stored column by
column; they are transposed so every example is flattened row by row. Labels
are shifted to start at 0.

    python3 scripts/convert_silhouettes.py caltech101_silhouettes_28_split1.mat silhouettes.ibmp
    irbm train --data-format silhouettes --data-path silhouettes.ibmp ...

Layout (little-endian): b"IBMP", version u32 = 1, D u32, C u32, then the
train/valid/test counts as u32; then every label as u16 in split order;
then every example as D bits, most significant bit first, padded to a byte.
"""
import struct
import sys

import numpy as np
from scipy.io import loadmat

SPLITS = (("train_data", "train_labels"), ("val_data", "val_labels"), ("test_data", "test_labels"))


def load(path):
    mat = loadmat(path)
    out = []
    for xk, yk in SPLITS:
        x = np.asarray(mat[xk])
        x = x.reshape(-1, 28, 28).transpose(0, 2, 1).reshape(-1, 784)
        if not np.isin(x, (0, 1)).all():
            raise SystemExit(f"{xk} is not binary")
        y = np.asarray(mat[yk]).reshape(-1).astype(int) - 1
        if len(y) != len(x):
            raise SystemExit(f"{xk} and {yk} disagree in length")
        out.append((x.astype(np.uint8), y))
    return out


def write(path, splits, classes=101):
    with open(path, "wb") as f:
        f.write(b"IBMP")
        f.write(struct.pack("<III", 1, 784, classes))
        f.write(struct.pack("<III", *(len(x) for x, _ in splits)))
        for _, y in splits:
            f.write(y.astype("<u2").tobytes())
        for x, _ in splits:
            f.write(np.packbits(x, axis=1, bitorder="big").tobytes())


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    splits = load(sys.argv[1])
    write(sys.argv[2], splits)
    print("wrote", sys.argv[2], [len(x) for x, _ in splits])


if __name__ == "__main__":
    main()
