"""Reader/writer for the big-endian IDX container used by (Fashion-)MNIST.

Layout: 4-byte magic (0x00000803 images, 0x00000801 labels), one 4-byte
count per dimension, then raw unsigned bytes row-major.
"""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from ..errors import IdxDimensionError, IdxMagicError, IdxTruncatedError
from .classifiers import DatasetSplit

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

FASHION_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(f, path, magic, ndim):
    head = f.read(4 + 4 * ndim)
    if len(head) < 4:
        raise IdxTruncatedError(f"{path}: file too short for IDX magic")
    (found,) = struct.unpack(">I", head[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(head) < 4 + 4 * ndim:
        raise IdxTruncatedError(f"{path}: truncated IDX header")
    return struct.unpack(f">{ndim}I", head[4:])


def read_idx_images(path, max_n=None) -> np.ndarray:
    with _open(path) as f:
        n, rows, cols = _read_header(f, path, IMAGES_MAGIC, 3)
        if max_n is not None:
            n = min(n, max_n)
        size = n * rows * cols
        buf = f.read(size)
    if len(buf) < size:
        raise IdxTruncatedError(f"{path}: expected {size} pixel bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path, max_n=None) -> np.ndarray:
    with _open(path) as f:
        (n,) = _read_header(f, path, LABELS_MAGIC, 1)
        if max_n is not None:
            n = min(n, max_n)
        buf = f.read(n)
    if len(buf) < n:
        raise IdxTruncatedError(f"{path}: expected {n} label bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8).copy()


def _header_count(path, magic, ndim):
    with _open(path) as f:
        return _read_header(f, path, magic, ndim)[0]


def load_idx(images_path, labels_path, max_n=None, n_classes=10) -> DatasetSplit:
    """Parse the first ``max_n`` records; pixels are rescaled to [0, 1]."""
    n_img = _header_count(images_path, IMAGES_MAGIC, 3)
    n_lab = _header_count(labels_path, LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise IdxDimensionError(f"{n_img} images but {n_lab} labels")
    images = read_idx_images(images_path, max_n)
    labels = read_idx_labels(labels_path, max_n)
    if labels.size and labels.max() >= n_classes:
        raise IdxDimensionError(f"label {labels.max()} out of range for {n_classes} classes")
    features = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return DatasetSplit(features, labels.astype(np.int64), n_classes)


def write_idx_images(path, images) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


def _find(data_dir: Path, stem: str):
    for name in (stem, stem + ".gz"):
        if (data_dir / name).exists():
            return data_dir / name
    return None


def resolve_data_dir(data_dir=None):
    """LOGSTEP_DATA_DIR takes precedence over the ``--data-dir`` flag."""
    env = os.environ.get("LOGSTEP_DATA_DIR")
    chosen = env or data_dir
    return Path(chosen) if chosen else None


def load_fashion_mnist(data_dir, part="train", max_n=None) -> DatasetSplit | None:
    """Load a FashionMNIST split, or return None when the files are absent."""
    data_dir = resolve_data_dir(data_dir)
    if data_dir is None:
        return None
    img_stem, lab_stem = FASHION_FILES[part]
    img = _find(data_dir, img_stem)
    lab = _find(data_dir, lab_stem)
    if img is None or lab is None:
        return None
    return load_idx(img, lab, max_n)
