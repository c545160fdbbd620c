import numpy as np
import pytest

from opforest import Dataset


def line_dataset() -> Dataset:
    """1-D fixture: x = 0, 1 (class 1) and x = 3, 4 (class 2)."""
    feats = np.array([[0.0], [1.0], [3.0], [4.0]])
    return Dataset(feats, np.array([1, 1, 2, 2]), n_classes=2)


def single_class_line() -> Dataset:
    """1-D single-class fixture at x = 0, 5, 7."""
    feats = np.array([[0.0], [5.0], [7.0]])
    return Dataset(feats, np.array([1, 1, 1]), n_classes=1)


def random_blobs(rng: np.random.Generator, n: int, n_classes: int,
                 n_features: int = 2, spread: float = 1.0) -> Dataset:
    """Gaussian clusters on a circle, one per class."""
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = 5.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n_features != 2:
        extra = rng.uniform(-1, 1, size=(n_classes, n_features - 2))
        centers = np.hstack([centers, 4.0 * extra])
    per = [n // n_classes + (1 if i < n % n_classes else 0)
           for i in range(n_classes)]
    feats, labels = [], []
    for c, m in enumerate(per):
        feats.append(centers[c] + spread * rng.standard_normal((m, n_features)))
        labels.extend([c + 1] * m)
    return Dataset(np.vstack(feats), np.asarray(labels, dtype=np.int64),
                   n_classes)


def random_uniform(rng: np.random.Generator, n: int, n_classes: int,
                   n_features: int) -> Dataset:
    """Uniform points with every class represented."""
    feats = rng.uniform(0.0, 1.0, size=(n, n_features))
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_classes] = np.arange(1, n_classes + 1)
    labels[n_classes:] = rng.integers(1, n_classes + 1, size=n - n_classes)
    return Dataset(feats, labels, n_classes)


@pytest.fixture
def line():
    return line_dataset()
