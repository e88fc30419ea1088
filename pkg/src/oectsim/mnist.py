"""Reader for the MNIST IDX files (optionally gzip-compressed)."""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
ENV_DIR = "OECTSIM_MNIST_DIR"

_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxError(ValueError):
    """Base class for malformed IDX input."""


class BadMagicError(IdxError):
    pass


class TruncatedFileError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


@dataclass
class MnistSplit:
    images: np.ndarray  # (n, 784) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, n: int) -> "MnistSplit":
        return MnistSplit(self.images[:n], self.labels[:n])


def _read_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path, expected_magic: int | None = None) -> np.ndarray:
    """Read an unsigned-byte IDX file into an array shaped by its header."""
    path = Path(path)
    data = _read_bytes(path)
    if len(data) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    magic = int.from_bytes(data[:4], "big")
    if data[0] != 0 or data[1] != 0 or data[2] != 0x08 or (
            expected_magic is not None and magic != expected_magic):
        raise BadMagicError(f"{path}: bad magic number 0x{magic:08x}")
    ndim = data[3]
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedFileError(f"{path}: truncated header")
    dims = tuple(int.from_bytes(data[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim))
    size = int(np.prod(dims)) if dims else 0
    if len(data) - header < size:
        raise TruncatedFileError(
            f"{path}: header declares {size} bytes of data, found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_split(images_path, labels_path) -> MnistSplit:
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise IdxError("unexpected IDX dimensionality for MNIST")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    flat = images.reshape(images.shape[0], -1).astype(np.float32) / np.float32(255.0)
    return MnistSplit(flat, labels.astype(np.int64))


def resolve_dir(path=None) -> Path:
    if path:
        return Path(path)
    env = os.environ.get(ENV_DIR)
    if env:
        return Path(env)
    raise FileNotFoundError(f"no MNIST directory given (set data.mnist_dir or {ENV_DIR})")


def load_mnist(path=None) -> tuple[MnistSplit, MnistSplit]:
    """Load the train and test splits from a directory of IDX files.

    Pixels are scaled to [0, 1] as float32; labels are int64.
    """
    directory = resolve_dir(path)
    out = []
    for split in ("train", "test"):
        img, lab = _NAMES[split]
        out.append(load_split(_find(directory, img), _find(directory, lab)))
    return out[0], out[1]


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file (used to build fixtures)."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    header = bytes([0, 0, 0x08, arr.ndim]) + b"".join(
        int(d).to_bytes(4, "big") for d in arr.shape)
    payload = header + arr.tobytes()
    if str(path).endswith(".gz"):
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)
