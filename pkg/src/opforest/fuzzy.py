"""Fuzzy-weighted optimum-path forest.

Each training sample gets an unsupervised membership derived from its
k-NN density: a quadratic rescaling of the normalized density, bounded
below by the ``sigma`` hyperparameter. During the supervised competition
every offered cost is multiplied by the receiving node's membership, so
low-density (outlier-ish) samples become cheap to conquer and stop pulling
decision boundaries toward themselves. With ``sigma = 1`` the memberships
are identically one and the classifier coincides with the standard forest.

Test samples have no membership; classification uses the plain max-arc
offer rule over the fuzzy-trained cost map.

For ``sigma >= 1`` every offer meets or exceeds the offering node's own
cost, the competition is the usual label-setting search, and the trained
cost map is exactly the minimum of the scaled recurrence over simple
paths from the prototypes. For ``sigma < 1`` the scaled path cost is no
longer monotone along paths; nodes are still finalized in queue order
(never re-conquered, so the predecessor map stays a forest), every
trained cost remains the recurrence value of its own predecessor path,
and therefore never falls below the simple-path minimum.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import find_best_k
from .datasets import Dataset
from .errors import ConfigError, DataError
from .graph import PrototypeSet, compute_mst, find_prototypes
from .supervised import (SupervisedModel, _compete, _pack_common, _Reader,
                         _unpack_common, classify_one)

log = logging.getLogger(__name__)

FUZZY_MODEL_MAGIC = b"FOPF"
SIGMA_RANGE = (0.2, 1.2)


@dataclass(frozen=True)
class MembershipParams:
    """Lower bound ``sigma`` plus the density extremes it interpolates."""

    sigma: float
    rho_min: float
    rho_max: float

    def __post_init__(self):
        lo, hi = SIGMA_RANGE
        if not lo <= self.sigma <= hi:
            raise ConfigError(f"sigma must lie in [{lo}, {hi}], "
                              f"got {self.sigma}")
        if self.rho_min > self.rho_max:
            raise ConfigError("rho_min exceeds rho_max")


@dataclass(frozen=True)
class MembershipMap:
    """Per-training-node membership values."""

    value: np.ndarray
    params: MembershipParams
    k_used: int


def membership_values(rho: np.ndarray, sigma: float) -> np.ndarray:
    """Quadratic density rescaling: 1 at the maximum density, ``sigma`` at
    the minimum. Degenerate (constant) densities fall back to all ones."""
    rho_min = float(rho.min())
    rho_max = float(rho.max())
    if sigma == 1.0:
        return np.ones_like(rho)
    if rho_max == rho_min:
        log.warning("all densities equal; memberships fall back to 1 "
                    "(standard forest)")
        return np.ones_like(rho)
    scaled = (rho - rho_min) / (rho_max - rho_min)
    return (1.0 - sigma) * np.square(scaled) + sigma


def compute_membership(dataset: Dataset, sigma: float, k_max: int,
                       metric: str = "euclidean") -> MembershipMap:
    """Memberships from the densities of the cut-minimizing clustering."""
    k_star, model = find_best_k(dataset, k_max, metric)
    rho = model.densities.rho
    params = MembershipParams(sigma, float(rho.min()), float(rho.max()))
    return MembershipMap(membership_values(rho, sigma), params, k_star)


@dataclass(frozen=True)
class FuzzyModel:
    """A supervised forest trained under membership-scaled offers."""

    base: SupervisedModel
    membership: MembershipMap

    def __len__(self) -> int:
        return len(self.base)


def train_fuzzy(dataset: Dataset, sigma: float, k_max: int,
                metric: str = "euclidean") -> FuzzyModel:
    membership = compute_membership(dataset, sigma, k_max, metric)
    return train_fuzzy_with_membership(dataset, membership, metric)


def train_fuzzy_with_membership(dataset: Dataset, membership: MembershipMap,
                                metric: str = "euclidean", *,
                                prototypes: PrototypeSet | None = None
                                ) -> FuzzyModel:
    """Run the fuzzy competition with precomputed memberships (lets a grid
    search reuse one density map across all sigma values)."""
    n = len(dataset)
    if n < 2:
        raise DataError(f"training needs at least 2 samples, got {n}")
    if membership.value.shape != (n,):
        raise DataError("membership length does not match dataset")
    if prototypes is None:
        prototypes = find_prototypes(dataset, compute_mst(dataset, metric))
    cost, label, pred = _compete(dataset, metric, prototypes,
                                 membership=membership.value)
    order = np.argsort(cost, kind="stable").astype(np.int64)
    base = SupervisedModel(cost, label, pred, prototypes, order, dataset,
                           metric)
    return FuzzyModel(base, membership)


def classify_fuzzy(model: FuzzyModel, x) -> tuple[int, float, int]:
    """Plain max-arc offer scan over the fuzzy-trained cost map."""
    return classify_one(model.base, x)


def classify_fuzzy_batch(model: FuzzyModel, dataset: Dataset):
    from .supervised import classify_batch
    return classify_batch(model.base, dataset)


def save_fuzzy_model(model: FuzzyModel, path) -> None:
    params = model.membership.params
    tail = struct.pack("<dddi", params.sigma, params.rho_min, params.rho_max,
                       model.membership.k_used)
    Path(path).write_bytes(FUZZY_MODEL_MAGIC + _pack_common(model.base)
                           + model.membership.value.astype("<f8").tobytes()
                           + tail)


def load_fuzzy_model(path) -> FuzzyModel:
    blob = Path(path).read_bytes()
    if blob[:4] != FUZZY_MODEL_MAGIC:
        raise DataError(f"{path}: not an {FUZZY_MODEL_MAGIC.decode()} "
                        "model file")
    reader = _Reader(blob, 4)
    base = _unpack_common(reader)
    value = reader.array("<f8", len(base)).astype(np.float64)
    sigma, rho_min, rho_max, k_used = reader.unpack("<dddi")
    if reader.offset != len(blob):
        raise DataError(f"{path}: trailing bytes after model payload")
    membership = MembershipMap(value, MembershipParams(sigma, rho_min,
                                                       rho_max), k_used)
    return FuzzyModel(base, membership)
