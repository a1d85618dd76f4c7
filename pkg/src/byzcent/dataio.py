"""Dataset ingestion: MNIST IDX files, labelled CSV, and synthetic blobs."""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if x.ndim != 2 or len(x) != len(y):
            raise DataFormatError(f"features {x.shape} and labels {y.shape} do not line up")
        if len(y) and (y.min() < 0 or y.max() >= self.class_count):
            raise DataFormatError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_count)

    def split(self, test_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Stratified train/test split; each class contributes ``round(test_fraction * size)`` test rows."""
        if not 0 < test_fraction < 1:
            raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
        rng = np.random.default_rng(seed)
        train, test = [], []
        for c in range(self.class_count):
            idx = np.flatnonzero(self.labels == c)
            idx = idx[rng.permutation(len(idx))]
            k = int(round(test_fraction * len(idx)))
            test.append(idx[:k])
            train.append(idx[k:])
        return self.subset(np.sort(np.concatenate(train))), self.subset(np.sort(np.concatenate(test)))


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _read_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{path}: bad IDX image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise DataFormatError(f"{path}: truncated, expected {size} pixel bytes, found {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=16).reshape(count, rows * cols)


def _read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated IDX label header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{path}: bad IDX label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    if len(raw) - 8 < count:
        raise DataFormatError(f"{path}: truncated, expected {count} labels, found {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path, labels_path, class_count: int = 10) -> Dataset:
    """Load an IDX image/label pair (optionally gzip-compressed); pixels are scaled to [0, 1]."""
    pixels = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise DataFormatError(f"image count {len(pixels)} != label count {len(labels)}")
    return Dataset(pixels.astype(np.float64) / 255.0, labels, class_count)


def write_idx(images_path, labels_path, pixels: np.ndarray, labels: np.ndarray, rows: int = 28, cols: int = 28) -> None:
    """Write uint8 pixels ``(count, rows*cols)`` and labels as IDX; gzip when the path ends in ``.gz``."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise DataFormatError("IDX pixels must be uint8")
    count = len(pixels)
    if pixels.shape != (count, rows * cols) or len(labels) != count:
        raise DataFormatError("pixel/label shapes do not match the IDX header")
    img = struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()
    lab = struct.pack(">II", IDX_LABELS_MAGIC, count) + np.asarray(labels, dtype=np.uint8).tobytes()
    for path, payload in ((images_path, img), (labels_path, lab)):
        if str(path).endswith(".gz"):
            payload = gzip.compress(payload, mtime=0)
        Path(path).write_bytes(payload)


def load_csv(path, class_count: Optional[int] = None) -> Dataset:
    """Load ``label,px0,px1,...`` rows (header required); pixels scaled by 1/255."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        width = len(header)
        if width < 2:
            raise DataFormatError(f"{path}: header needs a label column and at least one pixel column")
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(f"{path}: row {lineno} has {len(row)} columns, header has {width}")
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataFormatError(f"{path}: non-numeric value in row {lineno}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    y = np.array(labels, dtype=np.int64)
    if class_count is None:
        class_count = int(y.max()) + 1
    return Dataset(np.array(rows) / 255.0, y, class_count)


def synth_blobs(d: int, classes: int, per_class: int, spread: float, seed: int) -> Dataset:
    """Gaussian blobs: class centres are random directions scaled to length 3."""
    if d < 1 or classes < 2:
        raise ValueError(f"need d >= 1 and classes >= 2, got d={d}, classes={classes}")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, d))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = 3.0 * centers / np.where(norms > 0, norms, 1.0)
    labels = np.repeat(np.arange(classes), per_class)
    feats = centers[labels] + spread * rng.standard_normal((len(labels), d))
    return Dataset(feats, labels, classes)
