import gzip
import os
import shutil

import numpy as np
import pytest

from oectsim.mnist import (BadMagicError, CountMismatchError, IdxError, TruncatedFileError,
                           load_mnist, load_split, read_idx, resolve_dir, write_idx)


@pytest.fixture
def mnist_dir(fixture_dir):
    return fixture_dir / "mnist"


def test_fixture_loads(mnist_dir):
    train, test = load_mnist(mnist_dir)
    assert train.images.shape == (100, 784) and test.images.shape == (100, 784)
    assert train.images.dtype == np.float32 and train.labels.dtype == np.int64
    assert train.images.min() == 0.0 and train.images.max() == 1.0
    assert set(np.unique(train.labels)) <= set(range(10))
    # first training digit of the standard set
    assert train.labels[0] == 5 and test.labels[0] == 7


def test_pixel_scaling(tmp_path):
    img = np.zeros((2, 28, 28), np.uint8)
    img[0, 0, 0] = 255
    write_idx(tmp_path / "i", img)
    write_idx(tmp_path / "l", np.array([1, 2], np.uint8))
    split = load_split(tmp_path / "i", tmp_path / "l")
    assert split.images[0, 0] == 1.0 and split.images[1, 0] == 0.0


def test_idx_roundtrip_plain_and_gzip(tmp_path):
    arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    for name in ("a.idx", "a.idx.gz"):
        write_idx(tmp_path / name, arr)
        np.testing.assert_array_equal(read_idx(tmp_path / name), arr)


def test_gzip_fixture_is_reproducible(tmp_path, mnist_dir):
    arr = read_idx(mnist_dir / "t10k-labels-idx1-ubyte.gz")
    write_idx(tmp_path / "x.gz", arr)
    assert (tmp_path / "x.gz").read_bytes() == (mnist_dir / "t10k-labels-idx1-ubyte.gz").read_bytes()


def test_bad_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"\x00\x00\x09\x01" + (3).to_bytes(4, "big") + b"abc")
    with pytest.raises(BadMagicError):
        read_idx(tmp_path / "bad")
    write_idx(tmp_path / "labels", np.zeros(3, np.uint8))
    with pytest.raises(BadMagicError):
        read_idx(tmp_path / "labels", expected_magic=2051)


def test_truncated(tmp_path, mnist_dir):
    data = gzip.decompress((mnist_dir / "t10k-images-idx3-ubyte.gz").read_bytes())
    (tmp_path / "short").write_bytes(data[:-10])
    with pytest.raises(TruncatedFileError):
        read_idx(tmp_path / "short")
    (tmp_path / "tiny").write_bytes(data[:6])
    with pytest.raises(TruncatedFileError):
        read_idx(tmp_path / "tiny")


def test_count_mismatch(tmp_path):
    write_idx(tmp_path / "i", np.zeros((3, 28, 28), np.uint8))
    write_idx(tmp_path / "l", np.zeros(2, np.uint8))
    with pytest.raises(CountMismatchError):
        load_split(tmp_path / "i", tmp_path / "l")


def test_errors_are_distinct():
    assert len({BadMagicError, TruncatedFileError, CountMismatchError}) == 3
    for e in (BadMagicError, TruncatedFileError, CountMismatchError):
        assert issubclass(e, IdxError)


def test_missing_directory(tmp_path, monkeypatch):
    monkeypatch.delenv("OECTSIM_MNIST_DIR", raising=False)
    with pytest.raises(FileNotFoundError):
        resolve_dir()
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path)


def test_env_directory(monkeypatch, mnist_dir, tmp_path):
    monkeypatch.setenv("OECTSIM_MNIST_DIR", str(mnist_dir))
    assert len(load_mnist()[1]) == 100
    # uncompressed files are found as well
    for f in mnist_dir.iterdir():
        (tmp_path / f.name[:-3]).write_bytes(gzip.decompress(f.read_bytes()))
    assert len(load_mnist(tmp_path)[0]) == 100


def test_subset(mnist_dir):
    train, _ = load_mnist(mnist_dir)
    small = train.subset(10)
    assert len(small) == 10
    np.testing.assert_array_equal(small.labels, train.labels[:10])


@pytest.mark.skipif(not os.environ.get("OECTSIM_MNIST_DIR"), reason="full MNIST not configured")
def test_full_train_file_header():
    train, test = load_mnist()
    assert train.images.shape == (60000, 784) and len(test) == 10000
