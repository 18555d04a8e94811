"""Synthetic long-tailed classification data.

Class ``k`` of ``K`` keeps ``n_k = n_max * (1/rho)^(k/(K-1))`` training
samples (rounded half up); the test split has the same number of samples for
every class.  Samples of class ``k`` are ``mean_k + N(0, I)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA = "iglu-longtail/1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LongTailConfig:
    num_classes: int
    n_max: int
    imbalance_ratio: float = 1.0
    feature_dim: int = 16
    seed: int = 0
    class_separation: float = 4.0
    test_per_class: int = 50

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")
        if self.n_max < 1 or self.feature_dim < 1 or self.test_per_class < 1:
            raise ConfigError("n_max, feature_dim and test_per_class must be positive")
        if not (math.isfinite(self.imbalance_ratio) and self.imbalance_ratio >= 1.0):
            raise ConfigError("imbalance ratio must be >= 1")
        if not self.class_separation > 0:
            raise ConfigError("class_separation must be positive")

    @property
    def imbalance_factor(self) -> float:
        return 1.0 / self.imbalance_ratio


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d) and match labels")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def unrounded_counts(cfg: LongTailConfig) -> np.ndarray:
    k = np.arange(cfg.num_classes)
    return cfg.n_max * cfg.imbalance_factor ** (k / (cfg.num_classes - 1))


def class_counts(cfg: LongTailConfig) -> list[int]:
    raw = unrounded_counts(cfg)
    counts = [int(math.floor(v + 0.5)) for v in raw]
    counts[0] = cfg.n_max  # mu^0 is exact; guard against pow rounding
    if min(counts) < 1:
        raise ConfigError(
            f"n_max={cfg.n_max} with ratio {cfg.imbalance_ratio} leaves a class empty; raise n_max")
    return counts


def class_weights(counts) -> np.ndarray:
    """Inverse-frequency weights ``N / (K n_k)`` rescaled to mean 1."""
    c = np.asarray(counts, dtype=np.float64)
    if c.size == 0 or np.any(c < 1):
        raise ConfigError("every class needs at least one sample")
    w = c.sum() / (c.size * c)
    return w / w.mean()


def class_means(cfg: LongTailConfig) -> np.ndarray:
    """Seeded class centres with pairwise distance >= class_separation.

    Candidates are drawn from an isotropic Gaussian sized so that typical
    pairwise distances are near ``class_separation``; the spread grows by 10%
    after every 100 consecutive rejections.
    """
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    d = cfg.feature_dim
    spread = cfg.class_separation / math.sqrt(2.0 * d) * max(1.0, cfg.num_classes ** (1.0 / d))
    means = []
    misses = 0
    while len(means) < cfg.num_classes:
        cand = rng.normal(0.0, spread, cfg.feature_dim)
        if all(np.linalg.norm(cand - m) >= cfg.class_separation for m in means):
            means.append(cand)
            misses = 0
        else:
            misses += 1
            if misses >= 100:
                spread *= 1.1
                misses = 0
    return np.array(means)


def _sample(rng, means, counts, num_classes, split):
    labels = np.repeat(np.arange(num_classes), counts)
    feats = means[labels] + rng.standard_normal((labels.size, means.shape[1]))
    return LabeledDataset(feats, labels, num_classes, split)


def generate(cfg: LongTailConfig) -> tuple[LabeledDataset, LabeledDataset]:
    counts = class_counts(cfg)
    means = class_means(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    train = _sample(rng, means, counts, cfg.num_classes, "train")
    test = _sample(rng, means, [cfg.test_per_class] * cfg.num_classes, cfg.num_classes, "test")
    return train, test


def write_csv(ds: LabeledDataset, path) -> None:
    """CSV layout: two ``#`` header lines, a column header, then label + features."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema={SCHEMA}\n")
        counts = ",".join(str(int(c)) for c in ds.histogram())
        fh.write(f"# K={ds.num_classes} feature_dim={ds.feature_dim} split={ds.split} counts={counts}\n")
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{i}" for i in range(ds.feature_dim)])
        for lab, row in zip(ds.labels, ds.features):
            w.writerow([int(lab)] + [repr(float(v)) for v in row])


def read_csv(path) -> LabeledDataset:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline().strip()
        if first != f"# schema={SCHEMA}":
            raise ValueError(f"{path}: unsupported schema line {first!r}")
        meta = dict(tok.split("=", 1) for tok in fh.readline()[1:].split() if "=" in tok)
        reader = csv.reader(fh)
        next(reader)
        rows = [r for r in reader if r]
    k = int(meta["K"])
    d = int(meta["feature_dim"])
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    feats = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(-1, d)
    return LabeledDataset(feats, labels, k, meta.get("split", "train"))
