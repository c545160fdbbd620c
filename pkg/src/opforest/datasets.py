"""Labeled feature-vector datasets: loading, generation, and splitting.

Two on-disk formats are supported:

* CSV — one sample per line, ``n_features`` real columns followed by one
  integer label column, optional single header line.
* LibOPF binary — little-endian; header of three int32
  (n_samples, n_classes, n_features), then per sample: int32 id,
  int32 label (1-based), ``n_features`` float32 values.

Labels are remapped to contiguous 1-based integers on load; the original
label values are recorded so reports can show them.
"""

from __future__ import annotations

import struct
from dataclasses import InitVar, dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, DataError

_HEADER = struct.Struct("<iii")
_SAMPLE_FIXED = struct.Struct("<ii")


class Sample(NamedTuple):
    id: int
    label: int
    features: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of samples with 1-based contiguous labels.

    ``original_labels[c - 1]`` holds the label value class ``c`` had in the
    source file (identity for generated/binary data).
    """

    features: np.ndarray          # (n, n_features) float64
    labels: np.ndarray            # (n,) int64, values in 1..n_classes
    n_classes: int
    original_labels: tuple[int, ...] = ()
    # split parts may legitimately miss a class of a 3-sample stratum
    require_all_classes: InitVar[bool] = True

    def __post_init__(self, require_all_classes: bool = True):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise DataError("features must be a 2-D array")
        if labels.shape != (feats.shape[0],):
            raise DataError("labels length does not match sample count")
        if feats.shape[0] == 0:
            raise DataError("dataset has no samples")
        if feats.shape[1] == 0:
            raise DataError("dataset has no features")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature value")
        if self.n_classes < 1:
            raise DataError("n_classes must be positive")
        if labels.min() < 1 or labels.max() > self.n_classes:
            raise DataError("label outside [1, n_classes]")
        if require_all_classes:
            present = np.unique(labels)
            if present.size != self.n_classes:
                missing = sorted(set(range(1, self.n_classes + 1))
                                 - set(present.tolist()))
                raise DataError(f"classes absent from dataset: {missing}")
        if not self.original_labels:
            object.__setattr__(self, "original_labels",
                               tuple(range(1, self.n_classes + 1)))
        elif len(self.original_labels) != self.n_classes:
            raise DataError("original_labels length must equal n_classes")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(i, int(self.labels[i]), self.features[i])

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self.sample(i)

    def subset(self, indices, require_all_classes: bool = True) -> "Dataset":
        """New dataset from the given row indices (ids are reassigned)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx].copy(), self.labels[idx].copy(),
                       self.n_classes, self.original_labels,
                       require_all_classes=require_all_classes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.n_classes == other.n_classes
                and self.original_labels == other.original_labels
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.features, other.features))


@dataclass(frozen=True)
class SplitSpec:
    """Train/evaluation/test fractions plus the seed that fixes the split."""

    train_fraction: float = 0.6
    eval_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        parts = (self.train_fraction, self.eval_fraction, self.test_fraction)
        if any(not 0.0 < f < 1.0 for f in parts):
            raise ConfigError("split fractions must lie in (0, 1)")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {sum(parts)!r}, not 1")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.eval_fraction, self.test_fraction)


def _remap_labels(raw: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Remap arbitrary integer labels to 1..K by order of first appearance."""
    seen: dict[int, int] = {}
    out = np.empty(raw.shape[0], dtype=np.int64)
    for i, value in enumerate(raw.tolist()):
        if value not in seen:
            seen[value] = len(seen) + 1
        out[i] = seen[value]
    return out, tuple(seen)


def load_csv(path, has_header: bool = False) -> Dataset:
    """Load a CSV dataset; the last column is the integer label.

    Labels are remapped to contiguous 1..n_classes in order of first
    appearance. Errors name the offending file line (1-based).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    rows: list[list[float]] = []
    raw_labels: list[int] = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and has_header:
                continue
            line = line.strip()
            if not line:
                continue
            cols = line.split(",")
            if width is None:
                width = len(cols)
                if width < 2:
                    raise DataError(f"line {lineno}: need at least one feature "
                                    "column and one label column")
            elif len(cols) != width:
                raise DataError(f"line {lineno}: expected {width} columns, "
                                f"got {len(cols)} (ragged rows)")
            try:
                feats = [float(c) for c in cols[:-1]]
            except ValueError as exc:
                raise DataError(f"line {lineno}: malformed feature value "
                                f"({exc})") from None
            if not all(np.isfinite(feats)):
                raise DataError(f"line {lineno}: non-finite feature value")
            label_txt = cols[-1].strip()
            try:
                label = int(label_txt)
            except ValueError:
                try:
                    as_float = float(label_txt)
                except ValueError:
                    raise DataError(f"line {lineno}: malformed label "
                                    f"{label_txt!r}") from None
                if not as_float.is_integer():
                    raise DataError(f"line {lineno}: non-integer label "
                                    f"{label_txt!r}")
                label = int(as_float)
            rows.append(feats)
            raw_labels.append(label)
    if not rows:
        raise DataError(f"{path}: empty dataset file")
    labels, original = _remap_labels(np.asarray(raw_labels, dtype=np.int64))
    return Dataset(np.asarray(rows, dtype=np.float64), labels,
                   n_classes=len(original), original_labels=original)


def save_csv(dataset: Dataset, path, header: bool = False) -> None:
    """Write CSV with original label values (full float64 precision)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if header:
            cols = [f"f{j}" for j in range(dataset.n_features)] + ["label"]
            fh.write(",".join(cols) + "\n")
        for i in range(len(dataset)):
            feats = ",".join(repr(float(v)) for v in dataset.features[i])
            original = dataset.original_labels[dataset.labels[i] - 1]
            fh.write(f"{feats},{original}\n")


def load_opf_binary(path) -> Dataset:
    """Load a dataset in the LibOPF binary layout."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    n, n_classes, n_features = _HEADER.unpack_from(blob, 0)
    if n <= 0 or n_classes <= 0 or n_features <= 0:
        raise DataError(f"{path}: invalid header ({n}, {n_classes}, {n_features})")
    record = _SAMPLE_FIXED.size + 4 * n_features
    expected = _HEADER.size + n * record
    if len(blob) != expected:
        raise DataError(f"{path}: payload is {len(blob)} bytes, header "
                        f"implies {expected}")
    features = np.empty((n, n_features), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    offset = _HEADER.size
    for i in range(n):
        sid, label = _SAMPLE_FIXED.unpack_from(blob, offset)
        if sid != i:
            raise DataError(f"{path}: sample {i} carries id {sid}")
        if not 1 <= label <= n_classes:
            raise DataError(f"{path}: sample {i} label {label} outside "
                            f"[1, {n_classes}]")
        offset += _SAMPLE_FIXED.size
        row = np.frombuffer(blob, dtype="<f4", count=n_features, offset=offset)
        if not np.all(np.isfinite(row)):
            raise DataError(f"{path}: sample {i}: non-finite feature value")
        features[i] = row
        labels[i] = label
        offset += 4 * n_features
    return Dataset(features, labels, n_classes=n_classes)


def save_opf_binary(dataset: Dataset, path) -> None:
    """Write the LibOPF binary layout (features narrowed to float32)."""
    path = Path(path)
    feats32 = dataset.features.astype("<f4")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(len(dataset), dataset.n_classes,
                              dataset.n_features))
        for i in range(len(dataset)):
            fh.write(_SAMPLE_FIXED.pack(i, int(dataset.labels[i])))
            fh.write(feats32[i].tobytes())


def stratified_split(dataset: Dataset,
                     spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic stratified split into (train, eval, test).

    Per-class counts deviate from the exact fractions by at most one
    sample, and every class appears in every part (hence each class needs
    at least 3 samples).
    """
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes + 1)[1:]
    thin = np.flatnonzero(counts < 3) + 1
    if thin.size:
        raise DataError(f"classes with fewer than 3 samples: {thin.tolist()}")
    rng = np.random.default_rng(spec.seed)
    buckets: list[list[int]] = [[], [], []]
    for c in range(1, dataset.n_classes + 1):
        members = np.flatnonzero(dataset.labels == c)
        members = members[rng.permutation(members.size)]
        alloc = _allocate(members.size, spec.fractions)
        start = 0
        for part, take in enumerate(alloc):
            buckets[part].extend(members[start:start + take].tolist())
            start += take
    parts = []
    for part, idx in enumerate(buckets):
        idx.sort()
        parts.append(dataset.subset(idx, require_all_classes=(part == 0)))
    return parts[0], parts[1], parts[2]


def _allocate(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Largest-remainder allocation of n items; training never gets zero."""
    targets = [f * n for f in fractions]
    alloc = [int(np.floor(t)) for t in targets]
    remainders = [t - a for t, a in zip(targets, alloc)]
    for _ in range(n - sum(alloc)):
        best = max(range(3), key=lambda i: (remainders[i], -i))
        alloc[best] += 1
        remainders[best] = -1.0
    if alloc[0] == 0:
        donor = max(range(1, 3), key=lambda j: (alloc[j] - targets[j], -j))
        alloc[donor] -= 1
        alloc[0] += 1
    return alloc


def generate_synthetic(kind: str, n: int, seed: int,
                       n_classes: int | None = None) -> Dataset:
    """Deterministic 2-feature toy datasets.

    ``blobs``: one isotropic Gaussian cluster per class, centers on a
    circle. ``concentric-rings``: two classes on annuli of radius 1 and 3
    with Gaussian radial noise 0.1. Features are rounded to float32
    resolution so binary round-trips are exact.
    """
    if n < 10:
        raise ConfigError(f"need n >= 10 samples, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "blobs":
        k = 3 if n_classes is None else int(n_classes)
        if not 1 <= k <= n:
            raise ConfigError(f"invalid class count {k}")
        angles = 2.0 * np.pi * np.arange(k) / k
        centers = 6.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        per = [n // k + (1 if i < n % k else 0) for i in range(k)]
        feats = []
        labels = []
        for c, m in enumerate(per):
            feats.append(centers[c] + rng.standard_normal((m, 2)))
            labels.extend([c + 1] * m)
        features = np.vstack(feats)
    elif kind == "concentric-rings":
        if n_classes not in (None, 2):
            raise ConfigError("concentric-rings always has 2 classes")
        radii = (1.0, 3.0)
        per = [n // 2 + n % 2, n // 2]
        feats = []
        labels = []
        for c, m in enumerate(per):
            theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
            r = radii[c] + 0.1 * rng.standard_normal(m)
            feats.append(np.stack([r * np.cos(theta), r * np.sin(theta)],
                                  axis=1))
            labels.extend([c + 1] * m)
        features = np.vstack(feats)
    else:
        raise ConfigError(f"unknown synthetic kind {kind!r}")
    features = features.astype(np.float32).astype(np.float64)
    return Dataset(features, np.asarray(labels, dtype=np.int64),
                   n_classes=int(max(labels)))


def minmax_scale(dataset: Dataset) -> Dataset:
    """Min-max scale each feature to [0, 1] (constant columns become 0)."""
    lo = dataset.features.min(axis=0)
    hi = dataset.features.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (dataset.features - lo) / span
    return Dataset(scaled, dataset.labels.copy(), dataset.n_classes,
                   dataset.original_labels)
