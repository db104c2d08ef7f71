"""Dataset ingestion, preprocessing and synthetic data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "CsvSchema",
    "BlobSpec",
    "load_csv",
    "save_csv",
    "l2_normalize",
    "standardize",
    "drop_columns",
    "filter_min_class_size",
    "split",
    "synth_blobs",
    "DatasetEntry",
    "load_manifest",
]


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray  # (m, n)
    y: np.ndarray  # (m,) dense labels 0..C-1
    class_names: list[str]

    def __post_init__(self):
        self.X = np.array(self.X, dtype=float)
        self.y = np.array(self.y, dtype=np.int64)
        self.class_names = [str(c) for c in self.class_names]
        if self.X.ndim != 2 or self.X.shape[0] == 0:
            raise DataError("dataset needs a non-empty (m, n) feature matrix")
        if self.y.shape != (self.X.shape[0],):
            raise DataError("need one label per sample")
        if not np.all(np.isfinite(self.X)):
            raise DataError("features must be finite")
        if self.y.min() < 0 or self.y.max() >= len(self.class_names):
            raise DataError("labels must index class_names")

    def __len__(self) -> int:
        return self.X.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, idx) -> Dataset:
        return Dataset(self.X[idx], self.y[idx], self.class_names)


@dataclass(frozen=True)
class CsvSchema:
    label_column: int | str = -1
    delimiter: str = ","
    has_header: bool = False
    feature_columns: Sequence[int] | None = None  # None: every column but the label

    @classmethod
    def from_dict(cls, d: dict) -> CsvSchema:
        fc = d.get("feature_columns")
        return cls(
            label_column=d.get("label_column", -1),
            delimiter=d.get("delimiter", ","),
            has_header=bool(d.get("has_header", False)),
            feature_columns=None if fc is None else tuple(fc),
        )


def _resolve_columns(schema: CsvSchema, header: list[str] | None, width: int) -> tuple[int, list[int]]:
    lc = schema.label_column
    if isinstance(lc, str):
        if header is None or lc not in header:
            raise DataError(f"unknown label column {lc!r}")
        lc = header.index(lc)
    if not -width <= lc < width:
        raise DataError(f"label column {lc} out of range for {width} columns")
    lc %= width
    if schema.feature_columns is None:
        features = [j for j in range(width) if j != lc]
    else:
        features = [j % width for j in schema.feature_columns]
        if any(not -width <= j < width for j in schema.feature_columns):
            raise DataError("feature column out of range")
        if lc in features:
            raise DataError("label column listed among feature columns")
    if not features:
        raise DataError("no feature columns")
    return lc, features


def load_csv(path, schema: CsvSchema = CsvSchema()) -> Dataset:
    """Read a delimited text file; labels are densified in order of first appearance."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=schema.delimiter) if r and any(c.strip() for c in r)]
    header = None
    first_line = 1
    if schema.has_header and rows:
        header = [c.strip() for c in rows.pop(0)]
        first_line = 2
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    lc, features = _resolve_columns(schema, header, width)

    X = np.empty((len(rows), len(features)))
    labels: list[int] = []
    names: dict[str, int] = {}
    for i, row in enumerate(rows):
        lineno = i + first_line
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        for k, j in enumerate(features):
            try:
                X[i, k] = float(row[j])
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {j + 1}: non-numeric value {row[j]!r}") from None
            if not math.isfinite(X[i, k]):
                raise DataError(f"{path}:{lineno}: column {j + 1}: non-finite value {row[j]!r}")
        name = row[lc].strip()
        labels.append(names.setdefault(name, len(names)))
    return Dataset(X, labels, list(names))


def save_csv(dataset: Dataset, path, header: Sequence[str] | None = None) -> None:
    """Write features plus a trailing label column (class names)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for x, c in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in x] + [dataset.class_names[c]])


def l2_normalize(dataset: Dataset) -> Dataset:
    norms = np.linalg.norm(dataset.X, axis=1)
    if np.any(norms == 0):
        raise DataError(f"zero-norm sample at row {int(np.argmax(norms == 0))}")
    return Dataset(dataset.X / norms[:, None], dataset.y, dataset.class_names)


def standardize(dataset: Dataset) -> Dataset:
    """Z-score every feature; constant features are only centered."""
    mean = dataset.X.mean(axis=0)
    std = dataset.X.std(axis=0)
    std[std == 0] = 1.0
    return Dataset((dataset.X - mean) / std, dataset.y, dataset.class_names)


def drop_columns(dataset: Dataset, columns: Sequence[int]) -> Dataset:
    keep = np.setdiff1d(np.arange(dataset.dim), np.asarray(columns, dtype=int) % dataset.dim)
    if keep.size == 0:
        raise DataError("all feature columns dropped")
    return Dataset(dataset.X[:, keep], dataset.y, dataset.class_names)


def filter_min_class_size(dataset: Dataset, min_samples: int) -> Dataset:
    if min_samples < 1:
        raise DataError("min_samples must be >= 1")
    counts = dataset.class_counts()
    kept = np.flatnonzero(counts >= min_samples)
    if kept.size < 2:
        raise DataError(f"fewer than 2 classes have >= {min_samples} samples")
    remap = np.full(dataset.n_classes, -1)
    remap[kept] = np.arange(kept.size)
    mask = remap[dataset.y] >= 0
    return Dataset(dataset.X[mask], remap[dataset.y[mask]], [dataset.class_names[c] for c in kept])


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split; each class sends round(fraction * size) samples to test."""
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(dataset.y == c)
        if members.size == 0:
            continue
        if members.size < 2:
            raise DataError(f"class {dataset.class_names[c]!r} has too few samples to stratify")
        k = min(max(int(round(test_fraction * members.size)), 1), members.size - 1)
        test_idx.append(rng.permutation(members)[:k])
    test = np.sort(np.concatenate(test_idx))
    train = np.setdiff1d(np.arange(len(dataset)), test)
    return dataset.subset(train), dataset.subset(test)


@dataclass(frozen=True)
class BlobSpec:
    classes: int = 2
    dim: int = 2
    samples_per_class: int = 100
    center_separation: float = 6.0
    noise_std: float = 1.0

    def __post_init__(self):
        if self.classes < 2 or self.dim < 1 or self.samples_per_class < 1:
            raise DataError("blob spec needs classes >= 2, dim >= 1, samples_per_class >= 1")
        if not self.center_separation > 0 or not self.noise_std >= 0:
            raise DataError("blob spec needs center_separation > 0 and noise_std >= 0")


def synth_blobs(spec: BlobSpec, seed: int) -> Dataset:
    """Isotropic Gaussian blobs; class c is centered at c * separation along the first axis."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(spec.classes * spec.samples_per_class, spec.dim)) * spec.noise_std
    y = np.repeat(np.arange(spec.classes), spec.samples_per_class)
    X[:, 0] += y * spec.center_separation
    return Dataset(X, y, [f"c{c}" for c in range(spec.classes)])


# ---------------------------------------------------------------------------
# fixture manifest

FIXTURE_DIR = Path(__file__).with_name("fixtures")
DEFAULT_MANIFEST = FIXTURE_DIR / "manifest.json"


@dataclass
class DatasetEntry:
    """One manifest record: a CSV file or a synthetic blob generator plus preprocessing."""

    name: str
    path: Path | None = None
    schema: CsvSchema = CsvSchema()
    blobs: BlobSpec | None = None
    blob_seed: int = 0
    preprocessing: list[dict] = field(default_factory=list)

    def load(self) -> Dataset:
        if self.blobs is not None:
            ds = synth_blobs(self.blobs, self.blob_seed)
        else:
            ds = load_csv(self.path, self.schema)
        return apply_preprocessing(ds, self.preprocessing)


def apply_preprocessing(dataset: Dataset, steps: Sequence[dict]) -> Dataset:
    for step in steps:
        op = step.get("op")
        if op == "l2_normalize":
            dataset = l2_normalize(dataset)
        elif op == "standardize":
            dataset = standardize(dataset)
        elif op == "drop_columns":
            dataset = drop_columns(dataset, step["columns"])
        elif op == "filter_min_class_size":
            dataset = filter_min_class_size(dataset, int(step["min_samples"]))
        else:
            raise DataError(f"unknown preprocessing step {op!r}")
    return dataset


def load_manifest(path=DEFAULT_MANIFEST) -> dict[str, DatasetEntry]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    entries = {}
    for rec in doc.get("datasets", []):
        name = rec["name"]
        if "blobs" in rec:
            entry = DatasetEntry(
                name,
                blobs=BlobSpec(**rec["blobs"]),
                blob_seed=int(rec.get("seed", 0)),
                preprocessing=list(rec.get("preprocessing", [])),
            )
        else:
            entry = DatasetEntry(
                name,
                path=(path.parent / rec["path"]).resolve(),
                schema=CsvSchema.from_dict(rec.get("schema", {})),
                preprocessing=list(rec.get("preprocessing", [])),
            )
        entries[name] = entry
    return entries
