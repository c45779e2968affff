"""Synthetic sequential bags, JSON Lines serialization, dataset splitting.

A bag is an ordered sequence of feature vectors with one observed label;
instance labels are carried only for evaluation. Synthetic positive bags
hide a contiguous run of shifted instances so that neighborhood smoothing
is genuinely the right prior; scatter mode breaks the contiguity on purpose
as a negative control.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class BagFileError(ValueError):
    """Malformed or inconsistent bag file."""


@dataclass
class Bag:
    bag_id: str
    features: np.ndarray  # (n, F)
    label: int
    instance_labels: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.features, (list, tuple)):
            width = None
            for i, row in enumerate(self.features):
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise ValueError(
                        f"bag {self.bag_id}: instance {i} has dimension {len(row)}, expected {width}")
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ValueError(f"bag {self.bag_id}: features must be a non-empty matrix, got shape {self.features.shape}")
        if self.label not in (0, 1):
            raise ValueError(f"bag {self.bag_id}: label must be 0 or 1, got {self.label!r}")
        if self.instance_labels is not None:
            labels = np.asarray(self.instance_labels, dtype=np.int64)
            if labels.shape != (self.features.shape[0],):
                raise ValueError(
                    f"bag {self.bag_id}: {labels.size} instance labels for {self.features.shape[0]} instances")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError(f"bag {self.bag_id}: instance labels must be 0 or 1")
            if int(labels.max()) != self.label:
                raise ValueError(
                    f"bag {self.bag_id}: bag label {self.label} inconsistent with instance labels "
                    f"(bag label must equal the max of the instance labels)")
            self.instance_labels = labels

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SynthConfig:
    num_bags: int = 200
    positive_fraction: float = 0.5
    bag_size_range: tuple = (24, 57)
    feature_dim: int = 10
    signal_dims: tuple = (0, 1, 2)
    signal_shift: float = 1.0
    noise_std: float = 1.0
    run_length_range: tuple = (3, 8)
    scatter: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.num_bags < 1:
            raise ValueError(f"num_bags must be positive, got {self.num_bags}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ValueError(f"positive_fraction must lie in [0, 1], got {self.positive_fraction}")
        lo, hi = self.bag_size_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bag_size_range must satisfy 1 <= min <= max, got {self.bag_size_range}")
        rlo, rhi = self.run_length_range
        if not 1 <= rlo <= rhi:
            raise ValueError(f"run_length_range must satisfy 1 <= min <= max, got {self.run_length_range}")
        if rhi > lo:
            raise ValueError(
                f"run_length_range max {rhi} exceeds bag_size_range min {lo}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be positive, got {self.feature_dim}")
        if any(not 0 <= d < self.feature_dim for d in self.signal_dims):
            raise ValueError(f"signal_dims {self.signal_dims} out of range for feature_dim {self.feature_dim}")
        if not self.noise_std > 0:
            raise ValueError(f"noise_std must be positive, got {self.noise_std}")


def generate(cfg: SynthConfig) -> list[Bag]:
    """Deterministic synthetic dataset; positive bags carry one shifted run
    (contiguous unless cfg.scatter)."""
    rng = np.random.default_rng(cfg.seed)
    labels = np.zeros(cfg.num_bags, dtype=np.int64)
    labels[: round(cfg.num_bags * cfg.positive_fraction)] = 1
    rng.shuffle(labels)

    sdims = list(cfg.signal_dims)
    bags = []
    for i, label in enumerate(labels):
        n = int(rng.integers(cfg.bag_size_range[0], cfg.bag_size_range[1] + 1))
        feats = rng.normal(0.0, cfg.noise_std, size=(n, cfg.feature_dim))
        inst = np.zeros(n, dtype=np.int64)
        if label == 1:
            run = int(rng.integers(cfg.run_length_range[0], cfg.run_length_range[1] + 1))
            if cfg.scatter:
                pos = np.sort(rng.choice(n, size=run, replace=False))
            else:
                start = int(rng.integers(0, n - run + 1))
                pos = np.arange(start, start + run)
            feats[np.ix_(pos, sdims)] += cfg.signal_shift
            inst[pos] = 1
        bags.append(Bag(bag_id=f"bag{i:04d}", features=feats, label=int(label),
                        instance_labels=inst))
    return bags


def save_bags(bags: list[Bag], path) -> None:
    """One JSON object per line; floats keep their shortest round-trip form."""
    with open(path, "w", encoding="utf-8") as fh:
        for bag in bags:
            record = {
                "id": bag.bag_id,
                "bag_label": bag.label,
                "instances": bag.features.tolist(),
            }
            if bag.instance_labels is not None:
                record["instance_labels"] = bag.instance_labels.tolist()
            fh.write(json.dumps(record) + "\n")


def load_bags(path) -> list[Bag]:
    bags = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise BagFileError(f"{path}: line {lineno}: invalid JSON ({e.msg})") from None
            try:
                bags.append(Bag(
                    bag_id=str(record["id"]),
                    features=record["instances"],
                    label=record["bag_label"],
                    instance_labels=record.get("instance_labels"),
                ))
            except (KeyError, TypeError, ValueError) as e:
                raise BagFileError(f"{path}: line {lineno}: {e}") from None
    return bags


def split(bags: list[Bag], fractions, seed) -> tuple[list[Bag], list[Bag], list[Bag]]:
    """Seeded shuffle, then floor-sized val/test with the remainder in train."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ValueError(f"need (train, val, test) fractions, got {fractions}")
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be non-negative, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions} (sum {sum(fractions)!r})")
    order = np.random.default_rng(seed).permutation(len(bags))
    shuffled = [bags[i] for i in order]
    n = len(bags)
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    return (shuffled[:n_train],
            shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])
