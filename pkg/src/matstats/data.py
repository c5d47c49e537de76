"""Matrix datasets and their on-disk manifest format.

A dataset on disk is a JSON manifest ``{"c", "r", "n", "data", "labels",
"outlier_truth"}`` whose ``data`` entry points to a CSV file with one
observation per line, ``c*r`` decimal values in row-major order.  The
optional ``labels`` file holds one integer per line and
``outlier_truth`` one 0/1 flag per line.  Values are written with 17
significant digits so a save/load round trip is lossless.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ManifestError

__all__ = ["Dataset", "load_dataset", "save_dataset"]

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of c-by-r observations plus optional labels."""

    X: np.ndarray
    labels: np.ndarray | None = None
    outlier_truth: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.X, dtype=float)
        if x.ndim != 3:
            raise DimensionError(f"observations must form an (n, c, r) array, got shape {np.shape(self.X)}")
        object.__setattr__(self, "X", x)
        for name in ("labels", "outlier_truth"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v)
            if v.shape != (x.shape[0],):
                raise DimensionError(f"{name} must have one entry per observation ({x.shape[0]}), got shape {v.shape}")
            object.__setattr__(self, name, v.astype(bool) if name == "outlier_truth" else v.astype(int))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def c(self) -> int:
        return self.X.shape[1]

    @property
    def r(self) -> int:
        return self.X.shape[2]

    def vectors(self) -> np.ndarray:
        """Row-major vectorization, shape (n, c*r); matches the CSV layout."""
        return self.X.reshape(self.n, self.c * self.r)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.X[idx],
            None if self.labels is None else self.labels[idx],
            None if self.outlier_truth is None else self.outlier_truth[idx],
        )


def as_matrix_stack(data) -> np.ndarray:
    """Accept a Dataset or an (n, c, r) array and return the raw stack."""
    if isinstance(data, Dataset):
        return data.X
    x = np.asarray(data, dtype=float)
    if x.ndim != 3:
        raise DimensionError(f"expected a Dataset or (n, c, r) array, got shape {x.shape}")
    return x


def as_vector_stack(data) -> np.ndarray:
    """Accept a Dataset (vectorized row-major) or an (n, d) array."""
    if isinstance(data, Dataset):
        return data.vectors()
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"expected a Dataset or (n, d) array, got shape {x.shape}")
    return x


def save_dataset(dataset: Dataset, manifest_path: str) -> None:
    """Write the manifest and its data/label/truth files next to it."""
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    stem = os.path.splitext(os.path.basename(manifest_path))[0]
    os.makedirs(base, exist_ok=True)

    data_name = f"{stem}_data.csv"
    manifest = {"c": dataset.c, "r": dataset.r, "n": dataset.n, "data": data_name}
    np.savetxt(os.path.join(base, data_name), dataset.vectors(), fmt=_FLOAT_FMT, delimiter=",")
    if dataset.labels is not None:
        manifest["labels"] = f"{stem}_labels.txt"
        np.savetxt(os.path.join(base, manifest["labels"]), dataset.labels, fmt="%d")
    if dataset.outlier_truth is not None:
        manifest["outlier_truth"] = f"{stem}_outliers.txt"
        np.savetxt(os.path.join(base, manifest["outlier_truth"]), dataset.outlier_truth.astype(int), fmt="%d")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_dataset(manifest_path: str, standardize: bool = False) -> Dataset:
    """Load a dataset described by a JSON manifest.

    ``standardize`` z-scores every coordinate (column of the vectorized
    data) across observations, the normalization used for wide-range
    series data.
    """
    manifest_path = os.fspath(manifest_path)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {exc}")

    for key in ("c", "r", "n", "data"):
        if key not in manifest:
            raise ManifestError(f"manifest {manifest_path} is missing required field '{key}'")
    c, r, n = (_positive_int(manifest, k) for k in ("c", "r", "n"))

    base = os.path.dirname(os.path.abspath(manifest_path))
    data_path = os.path.join(base, manifest["data"])
    rows = _read_csv_rows(data_path, expected_width=c * r)
    if len(rows) != n:
        raise ManifestError(f"manifest declares n={n} observations but {data_path} has {len(rows)} data rows")
    x = np.asarray(rows, dtype=float).reshape(n, c, r)

    labels = None
    if manifest.get("labels"):
        labels = _read_int_column(os.path.join(base, manifest["labels"]), n, "labels")
    truth = None
    if manifest.get("outlier_truth"):
        truth = _read_int_column(os.path.join(base, manifest["outlier_truth"]), n, "outlier_truth").astype(bool)

    if standardize:
        flat = x.reshape(n, c * r)
        sd = flat.std(axis=0)
        sd[sd == 0] = 1.0
        flat = (flat - flat.mean(axis=0)) / sd
        x = flat.reshape(n, c, r)
    return Dataset(x, labels=labels, outlier_truth=truth)


def _positive_int(manifest: dict, key: str) -> int:
    v = manifest[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ManifestError(f"manifest field '{key}' must be a positive integer, got {v!r}")
    return v


def _read_csv_rows(path: str, expected_width: int) -> list[list[float]]:
    if not os.path.exists(path):
        raise ManifestError(f"data file not found: {path}")
    rows: list[list[float]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != expected_width:
                raise ManifestError(
                    f"{path}, line {lineno}: expected {expected_width} values (c*r), found {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ManifestError(f"{path}, line {lineno}: {exc}")
    return rows


def _read_int_column(path: str, n: int, what: str) -> np.ndarray:
    if not os.path.exists(path):
        raise ManifestError(f"{what} file not found: {path}")
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise ManifestError(f"{path}, line {lineno}: expected an integer, got {line!r}")
    if len(values) != n:
        raise ManifestError(f"{path} has {len(values)} entries but the manifest declares n={n}")
    return np.asarray(values, dtype=int)
