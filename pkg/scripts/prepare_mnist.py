"""Build the desk-scale MNIST subset shipped in data/mnist/.

Source: the 5,000-image MNIST sample bundled with mlxtend
(``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit, 784 pixel
columns followed by the label). Pass either that CSV or an mlxtend wheel:

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/prepare_mnist.py /tmp/mlx/mlxtend-*.whl

Writes a stratified 2,000 / 500 train/test split (200 / 50 per class) as
gzip-compressed IDX files. Selection is seeded, so reruns are byte-identical.
"""

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from byzcent.dataio import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_source(path: Path) -> tuple[np.ndarray, np.ndarray]:
    if path.suffix == ".whl":
        with zipfile.ZipFile(path) as zf:
            blob = io.BytesIO(gzip.decompress(zf.read(MEMBER)))
        table = np.loadtxt(blob, delimiter=",")
    else:
        table = np.loadtxt(path, delimiter=",")
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.int64)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path)
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    ap.add_argument("--train-per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pixels, labels = read_source(args.source)
    rng = np.random.default_rng(args.seed)
    train, test = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        train.append(idx[: args.train_per_class])
        test.append(idx[args.train_per_class : args.train_per_class + args.test_per_class])
    train = rng.permutation(np.concatenate(train))
    test = rng.permutation(np.concatenate(test))

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train-images-idx3-ubyte.gz", args.out / "train-labels-idx1-ubyte.gz", pixels[train], labels[train])
    write_idx(args.out / "test-images-idx3-ubyte.gz", args.out / "test-labels-idx1-ubyte.gz", pixels[test], labels[test])
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
