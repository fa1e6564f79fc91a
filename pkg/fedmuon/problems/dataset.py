"""
Synthetic labeled datasets and their on-disk container.

A dataset directory holds `features.npy` (float64, samples x features),
`labels.npy` (int64, samples) and `dataset.json`, a sidecar describing both
shapes and the per-label counts. Loading checks the arrays against the
sidecar.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SIDECAR = 'dataset.json'


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    classes: int

    @property
    def label_counts(self):
        return np.bincount(self.labels, minlength=self.classes)


def make_blobs(samples=1200, features=16, classes=10, spread=1.5, seed=0):
    """Gaussian class clusters around random unit-scale centers."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(classes, features))
    labels = rng.integers(0, classes, size=samples)
    points = centers[labels] + rng.normal(size=(samples, features))
    return Dataset(features=points, labels=labels.astype(np.int64), classes=classes)


def save_dataset(path, dataset):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.save(path / 'features.npy', dataset.features)
    np.save(path / 'labels.npy', dataset.labels)

    sidecar = {
        'features': {'dtype': 'float64', 'shape': list(dataset.features.shape)},
        'labels': {'dtype': 'int64', 'shape': list(dataset.labels.shape)},
        'classes': dataset.classes,
        'label_counts': dataset.label_counts.tolist(),
    }
    with open(path / SIDECAR, 'w') as f:
        json.dump(sidecar, f, indent=2)
        f.write('\n')


def load_dataset(path):
    """
    Raises:
        ValueError: the dataset cannot be read or disagrees with its sidecar
    """
    path = Path(path)
    try:
        with open(path / SIDECAR, 'r') as f:
            sidecar = json.load(f)
        features = np.load(path / 'features.npy')
        labels = np.load(path / 'labels.npy')
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"Error reading dataset '{path}': {e}")

    try:
        feature_shape = list(sidecar['features']['shape'])
        label_shape = list(sidecar['labels']['shape'])
        classes = int(sidecar['classes'])
        label_counts = list(sidecar['label_counts'])
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Malformed {SIDECAR} in '{path}': {e!r}")

    if list(features.shape) != feature_shape:
        raise ValueError(f"Feature shape {features.shape} disagrees with {SIDECAR}")
    if list(labels.shape) != label_shape:
        raise ValueError(f"Label shape {labels.shape} disagrees with {SIDECAR}")

    dataset = Dataset(
        features=features.astype(np.float64),
        labels=labels.astype(np.int64),
        classes=classes,
    )
    if dataset.label_counts.tolist() != label_counts:
        raise ValueError(f"Label counts disagree with {SIDECAR}")
    return dataset
