"""MNIST IDX loading and deterministic splits."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATA_DIR_ENV = "OSCRES_DATA_DIR"

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


@dataclass
class LabeledImageSet:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if len(self.images) != len(self.labels):
            raise DataFormatError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and self.labels.max() > 9:
            raise DataFormatError("labels must lie in [0, 9]")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "LabeledImageSet":
        return LabeledImageSet(self.images[idx], self.labels[idx])

    def batches(self, batch_size: int):
        for i in range(0, len(self), batch_size):
            yield self.subset(slice(i, i + batch_size))


@dataclass(frozen=True)
class SplitSpec:
    train: int = 50_000
    validation: int = 10_000
    test: int = 10_000
    shuffle_seed: int = 0


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc


def parse_idx_images(buf: bytes) -> np.ndarray:
    if len(buf) < 16:
        raise DataFormatError("image file truncated in header")
    magic, n, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IMAGE_MAGIC:
        raise DataFormatError(f"bad image magic 0x{magic:08x}")
    if (rows, cols) != (28, 28):
        raise DataFormatError(f"expected 28x28 images, got {rows}x{cols}")
    body = buf[16:]
    if len(body) != n * rows * cols:
        raise DataFormatError(f"image body has {len(body)} bytes, header promises {n * rows * cols}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, rows, cols).copy()


def parse_idx_labels(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise DataFormatError("label file truncated in header")
    magic, n = struct.unpack(">II", buf[:8])
    if magic != LABEL_MAGIC:
        raise DataFormatError(f"bad label magic 0x{magic:08x}")
    body = buf[8:]
    if len(body) != n:
        raise DataFormatError(f"label body has {len(body)} bytes, header promises {n}")
    return np.frombuffer(body, dtype=np.uint8).copy()


def serialize_idx(data: LabeledImageSet) -> tuple[bytes, bytes]:
    n, rows, cols = data.images.shape
    img = struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + data.images.tobytes()
    lab = struct.pack(">II", LABEL_MAGIC, n) + data.labels.tobytes()
    return img, lab


def write_idx(data: LabeledImageSet, images_path, labels_path) -> None:
    img, lab = serialize_idx(data)
    Path(images_path).write_bytes(img)
    Path(labels_path).write_bytes(lab)


def load_idx(images_path, labels_path) -> LabeledImageSet:
    images = parse_idx_images(_read(images_path))
    labels = parse_idx_labels(_read(labels_path))
    if len(images) != len(labels):
        raise DataFormatError(f"{len(images)} images but {len(labels)} labels")
    return LabeledImageSet(images, labels)


def data_dir(override=None) -> Path:
    root = override or os.environ.get(DATA_DIR_ENV)
    if not root:
        raise DataFormatError(f"no data directory given and ${DATA_DIR_ENV} is unset")
    return Path(root)


def load_mnist(root=None) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Official (train, test) sets from a directory of uncompressed IDX files."""
    root = data_dir(root)
    train = load_idx(root / TRAIN_FILES[0], root / TRAIN_FILES[1])
    test = load_idx(root / TEST_FILES[0], root / TEST_FILES[1])
    return train, test


def split(train_file: LabeledImageSet, test_file: LabeledImageSet, spec: SplitSpec = SplitSpec()):
    """Shuffle the official training file by seed into train/validation; test is untouched."""
    if spec.train + spec.validation != len(train_file):
        raise ConfigError(
            f"train+validation = {spec.train + spec.validation}, training file has {len(train_file)}"
        )
    if spec.test != len(test_file):
        raise ConfigError(f"test = {spec.test}, test file has {len(test_file)}")
    perm = np.random.default_rng(spec.shuffle_seed).permutation(len(train_file))
    return (
        train_file.subset(perm[: spec.train]),
        train_file.subset(perm[spec.train :]),
        test_file,
    )
