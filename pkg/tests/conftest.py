"""Shared fixtures: a digit corpus (synthetic by default, real MNIST when
PCADP_MNIST_DIR points at the four IDX files) and IDX files on disk."""

import os
from pathlib import Path
from types import SimpleNamespace

import pytest

from synthdata import make_database, write_idx_images, write_idx_labels

TRAIN_N = 2000
TEST_N = 1000


def _real_mnist(directory):
    from pcadp.imageio import load_idx

    d = Path(directory)
    train = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return train.subset(range(TRAIN_N)), test.subset(range(TEST_N))


@pytest.fixture(scope="session")
def digit_corpus(tmp_path_factory):
    mnist_dir = os.environ.get("PCADP_MNIST_DIR")
    if mnist_dir:
        train, test = _real_mnist(mnist_dir)
        source = "mnist"
    else:
        train = make_database(TRAIN_N, seed=11)
        test = make_database(TEST_N, seed=23)
        source = "synthetic"
    base = tmp_path_factory.mktemp("idx")
    images_path = base / "test-images.idx"
    labels_path = base / "test-labels.idx"
    write_idx_images(test, images_path)
    write_idx_labels(test, labels_path)
    return SimpleNamespace(
        train=train,
        test=test,
        images_path=images_path,
        labels_path=labels_path,
        source=source,
    )


@pytest.fixture(scope="session")
def small_corpus():
    """24 images, enough for 3 batches of ~10 at desk speed."""
    return make_database(24, seed=5)
