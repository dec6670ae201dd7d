"""Dataset construction: toy targets, CSV ingestion, support sampling, and
the Heston training-grid generator."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .heston import FftGrid, HestonParams, heston_fft_price
from .rkhs import KernelSpec, SupportSet

log = logging.getLogger(__name__)

REGRESSION = "regression"
CLASSIFICATION = "classification"

# parameter box for the generated pricing grid: (strike, maturity, rate,
# kappa, theta, rho, sigma_v, v0)
HESTON_RANGES = {
    "strike": (50.0, 150.0),
    "maturity": (11.0 / 12.0, 1.0),
    "rate": (0.015, 0.025),
    "kappa": (1.5, 2.5),
    "theta": (0.5, 0.7),
    "rho": (-0.7, -0.5),
    "sigma_v": (0.02, 0.1),
    "v0": (0.02, 0.1),
}
HESTON_FEATURES = tuple(HESTON_RANGES)
HESTON_SPOT = 100.0


class SchemaError(ValueError):
    """CSV structure does not match the declared columns or task."""


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray          # (n, d)
    targets: np.ndarray         # (n,)
    task: str = REGRESSION
    feature_mean: Optional[np.ndarray] = None
    feature_std: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have the same length")
        if self.task == CLASSIFICATION and not np.all(
                (self.targets == 0.0) | (self.targets == 1.0)):
            raise SchemaError("classification targets must be binary {0,1}")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def standardize(self, mean=None, std=None) -> "Dataset":
        """Z-score features; stats default to this dataset's own (training) stats."""
        if mean is None:
            mean = self.inputs.mean(axis=0)
            std = self.inputs.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return replace(self, inputs=(self.inputs - mean) / std,
                       feature_mean=np.asarray(mean), feature_std=np.asarray(std))

    def subset(self, idx) -> "Dataset":
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx])


def sample_support(train: Dataset, m: int, seed: int,
                   kernel: KernelSpec) -> SupportSet:
    """m pairwise-distinct points drawn uniformly without replacement."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(train.n)
    chosen = []
    for i in order:
        x = train.inputs[i]
        if all(np.linalg.norm(x - c) > 1e-12 for c in chosen):
            chosen.append(x)
            if len(chosen) == m:
                break
    if len(chosen) < m:
        raise ValueError(f"fewer than m={m} distinct training points")
    return SupportSet.from_points(np.asarray(chosen), kernel)


def toy_sine(n: int, seed: int) -> Dataset:
    """Uniform inputs on [-pi, pi], targets sin(x)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-np.pi, np.pi, size=(n, 1))
    return Dataset(inputs=x, targets=np.sin(x[:, 0]))


def toy_linear3(n: int, seed: int) -> Dataset:
    """Uniform inputs on [-3, 3]^3, targets 0.5 x1 - 0.2 x2 + 0.1 x3."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3.0, 3.0, size=(n, 3))
    return Dataset(inputs=x, targets=x @ np.array([0.5, -0.2, 0.1]))


def synthetic_classification(n: int, seed: int, d: int = 5,
                             separation: float = 4.0) -> Dataset:
    """Balanced two-Gaussian binary task with mean shift along all axes."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n).astype(float)
    shift = separation / np.sqrt(d)
    x = rng.standard_normal((n, d)) + np.where(y[:, None] == 1.0, shift, -shift) / 2.0
    return Dataset(inputs=x, targets=y, task=CLASSIFICATION)


_IGNORED_COLUMNS = {"id", "eventid", "weight"}


def load_csv(path, label_column: str, feature_columns=None,
             standardize: bool = False, task: str = REGRESSION) -> Dataset:
    """Load a headered CSV; '#'-prefixed lines are treated as comments.

    Feature columns default to every column except the label and the
    conventional id/weight columns.  Rows with unparsable numerics are
    skipped (logged with their row index).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"empty CSV file {path}")
    header = [c.strip() for c in rows[0]]
    if label_column not in header:
        raise SchemaError(f"missing label column {label_column!r}")
    if feature_columns is None:
        feature_columns = [c for c in header
                           if c != label_column and c.lower() not in _IGNORED_COLUMNS]
    missing = [c for c in feature_columns if c not in header]
    if missing:
        raise SchemaError(f"missing feature columns {missing}")
    fidx = [header.index(c) for c in feature_columns]
    lidx = header.index(label_column)
    feats, labels = [], []
    for i, row in enumerate(rows[1:], start=1):
        try:
            feats.append([float(row[j]) for j in fidx])
            labels.append(float(row[lidx]))
        except (ValueError, IndexError):
            log.warning("skipping unparsable row %d of %s", i, path)
    if not feats:
        raise ValueError(f"no parsable data rows in {path}")
    ds = Dataset(inputs=np.asarray(feats), targets=np.asarray(labels), task=task)
    return ds.standardize() if standardize else ds


def write_csv(dataset: Dataset, path, label_column: str = "target",
              header_comment: Optional[str] = None,
              feature_names=None) -> None:
    names = (list(feature_names) if feature_names is not None
             else [f"feature_{j}" for j in range(dataset.dim)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(names + [label_column])
        for x, y in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def params_from_row(row) -> HestonParams:
    vals = dict(zip(HESTON_FEATURES, row))
    return HestonParams(spot=HESTON_SPOT, **vals)


def generate_heston_grid(count: int, seed: int, ranges=None,
                         grid: FftGrid = FftGrid()) -> Dataset:
    """Uniform draws in the 8-D parameter box, priced with the FFT engine."""
    if count < 1:
        raise ValueError("count must be >= 1")
    ranges = dict(HESTON_RANGES if ranges is None else ranges)
    rng = np.random.default_rng(seed)
    lo = np.array([ranges[k][0] for k in HESTON_FEATURES])
    hi = np.array([ranges[k][1] for k in HESTON_FEATURES])
    X = rng.uniform(lo, hi, size=(count, len(HESTON_FEATURES)))
    prices = np.empty(count)
    for i, row in enumerate(X):
        try:
            prices[i] = heston_fft_price(params_from_row(row), grid)
        except Exception as exc:
            raise RuntimeError(f"pricing failed for parameter tuple {row}") from exc
    return Dataset(inputs=X, targets=prices)
