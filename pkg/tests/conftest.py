import numpy as np
import pytest

from gemmine.data import DatasetSplit, gen_synthetic, load_idx, make_digit_archive


@pytest.fixture(scope="session")
def blobs() -> DatasetSplit:
    return gen_synthetic("blobs", 120, noise=0.4, seed=7)


@pytest.fixture(scope="session")
def digits_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("digits")
    return make_digit_archive(directory, n_train=1250, n_test=400, seed=5, noise=1.0)


@pytest.fixture(scope="session")
def digits_1k(digits_dir) -> DatasetSplit:
    """1000 training rows of the synthetic digit task, 10 classes, 784 features."""
    return load_idx(digits_dir, train_limit=1000, val_fraction=0.1, seed=0)


def random_classification(n: int, dim: int, classes: int, seed: int) -> DatasetSplit:
    """Structureless labelled data for purely structural miner tests."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    y = rng.integers(0, classes, size=n).astype(np.int64)
    n_train = int(0.8 * n)
    n_val = int(0.1 * n)
    return DatasetSplit(
        train_x=x[:n_train],
        train_y=y[:n_train],
        val_x=x[n_train : n_train + n_val],
        val_y=y[n_train : n_train + n_val],
        test_x=x[n_train + n_val :],
        test_y=y[n_train + n_val :],
        n_classes=classes,
    )
