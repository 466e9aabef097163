"""Build the desk-scale MNIST subset used by the test suite.

Reads the 5000-image MNIST sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 500 images per digit) and writes
gzip-compressed IDX files with 100 training and 20 test images per digit.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl crates/core/tests/data/mnist
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np

TRAIN_PER_CLASS = 100
TEST_PER_CLASS = 20


def write_idx(path, arr):
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    header = bytes([0, 0, 0x08, arr.ndim]) + b"".join(struct.pack(">I", d) for d in arr.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + arr.tobytes())


def main(wheel, out_dir):
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    rng = np.random.default_rng(2024)
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        train_idx.extend(idx[:TRAIN_PER_CLASS])
        test_idx.extend(idx[TRAIN_PER_CLASS:TRAIN_PER_CLASS + TEST_PER_CLASS])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    write_idx(f"{out_dir}/train-images-idx3-ubyte.gz", images[train_idx])
    write_idx(f"{out_dir}/train-labels-idx1-ubyte.gz", labels[train_idx])
    write_idx(f"{out_dir}/t10k-images-idx3-ubyte.gz", images[test_idx])
    write_idx(f"{out_dir}/t10k-labels-idx1-ubyte.gz", labels[test_idx])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
