"""Dataset ingestion, toy generators, splitting and standardization.

Every dataset entering the harness goes through the same pipeline: a seeded
shuffle, an 85/15 train/test split, then per-column standardization of both
inputs and targets using statistics of the training portion only.  The
statistics are kept on the dataset so predictions can be mapped back to the
original units if needed.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, NonNumericColumn, ParseError, UnknownGenerator

__all__ = [
    "TRAIN_FRACTION",
    "StandardizedDataset",
    "standardize_split",
    "load_dataset",
    "toy_raw",
    "generate_toy",
    "save_csv",
]

TRAIN_FRACTION = 0.85


@dataclass(frozen=True)
class StandardizedDataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    seed: int
    source: str

    @property
    def n_train(self):
        return self.x_train.shape[0]

    @property
    def input_dim(self):
        return self.x_train.shape[1]


def _column_stats(a):
    """Means and scales of each column; constant columns get scale 1."""
    mean = a.mean(axis=0)
    scale = a.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return mean, scale


def standardize_split(x, y, seed, source):
    """Shuffle, split 85/15 and standardize with train statistics only."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if n < 2:
        raise EmptyDataset(f"need at least 2 rows, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    x, y = x[perm], y[perm]
    n_train = int(np.floor(TRAIN_FRACTION * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    x_train, x_test = x[:n_train], x[n_train:]
    y_train, y_test = y[:n_train], y[n_train:]

    x_mean, x_scale = _column_stats(x_train)
    y_mean, y_scale = _column_stats(y_train[:, None])
    y_mean, y_scale = float(y_mean[0]), float(y_scale[0])
    return StandardizedDataset(
        x_train=(x_train - x_mean) / x_scale,
        y_train=(y_train - y_mean) / y_scale,
        x_test=(x_test - x_mean) / x_scale,
        y_test=(y_test - y_mean) / y_scale,
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        y_scale=y_scale,
        seed=seed,
        source=source,
    )


def _sniff_delimiter(header_line):
    return "," if "," in header_line else None  # None: any whitespace


def load_dataset(path, target_column=None, seed=0):
    """Load a delimited numeric text file with a header row.

    ``target_column`` selects the regression target by header name or
    0-based index; the default is the last column.  Rows containing NaN are
    rejected (dropped).  Identical path and seed always reproduce the exact
    same split.

    Raises
    ------
    ParseError
        Malformed row; carries the 1-based line number.
    NonNumericColumn
        A modelling column holds a non-numeric entry.
    EmptyDataset
        Fewer than two usable rows.
    """
    with io.open(path, "r", encoding="utf-8") as handle:
        lines = [line.strip() for line in handle]
    lines = [(i + 1, line) for i, line in enumerate(lines) if line]
    if not lines:
        raise EmptyDataset(f"{path} contains no data")
    _, header_line = lines[0]
    delim = _sniff_delimiter(header_line)
    header = [h.strip() for h in header_line.split(delim)]
    width = len(header)

    if target_column is None:
        target_idx = width - 1
    elif isinstance(target_column, int) or str(target_column).lstrip("-").isdigit():
        target_idx = int(target_column)
        if not -width <= target_idx < width:
            raise ParseError(f"target column index {target_idx} out of range")
        target_idx %= width
    else:
        try:
            target_idx = header.index(str(target_column))
        except ValueError:
            raise ParseError(
                f"target column {target_column!r} not in header {header}"
            ) from None

    rows = []
    for line_number, line in lines[1:]:
        parts = line.split(delim)
        if len(parts) != width:
            raise ParseError(
                f"expected {width} fields, got {len(parts)}", line_number
            )
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise NonNumericColumn(
                f"non-numeric entry on line {line_number}: {exc}"
            ) from None
        if not all(np.isfinite(row)):
            continue  # NaN/Inf rows are rejected
        rows.append(row)
    if len(rows) < 2:
        raise EmptyDataset(f"{path} has fewer than 2 usable rows")

    data = np.array(rows, dtype=float)
    y = data[:, target_idx]
    x = np.delete(data, target_idx, axis=1)
    return standardize_split(x, y, seed, source=str(path))


def toy_raw(name, n, noise_sd=0.1, seed=0):
    """Raw (x, y) for the named toy generator, before any standardization.

    ``smooth1d``
        x ~ U[0, 6], y = sin(2x) + 0.4 cos(5x) + noise.  Smooth data that a
        stationary kernel handles with a handful of inducing points.
    ``step1d``
        x ~ U[-1, 1], y = sign(x) + noise.  The discontinuity defeats
        stationary kernels but suits order-1 arc-cosine ones.
    """
    if n < 10:
        raise ValueError(f"need n >= 10, got {n}")
    rng = np.random.default_rng(seed)
    if name == "smooth1d":
        x = rng.uniform(0.0, 6.0, size=(n, 1))
        f = np.sin(2.0 * x[:, 0]) + 0.4 * np.cos(5.0 * x[:, 0])
    elif name == "step1d":
        x = rng.uniform(-1.0, 1.0, size=(n, 1))
        f = np.sign(x[:, 0])
    else:
        raise UnknownGenerator(f"unknown toy generator {name!r}")
    y = f + noise_sd * rng.standard_normal(n)
    return x, y


def generate_toy(name, n, noise_sd=0.1, seed=0):
    """Toy data from :func:`toy_raw`, split and standardized like any dataset."""
    x, y = toy_raw(name, n, noise_sd, seed)
    return standardize_split(x, y, seed, source=f"toy:{name}")


def save_csv(path, x, y, target_name="y"):
    """Write raw (x, y) as a comma-delimited file loadable by load_dataset."""
    x = np.asarray(x, dtype=float)
    header = ",".join([f"x{d}" for d in range(x.shape[1])] + [target_name])
    body = np.column_stack([x, np.asarray(y, dtype=float)])
    with io.open(path, "w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for row in body:
            handle.write(",".join(format(v, ".17g") for v in row) + "\n")
