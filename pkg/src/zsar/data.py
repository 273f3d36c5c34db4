"""Dataset loading, saving, split generation, and synthetic worlds.

On-disk formats:

* Binary matrix: magic ``ZSAR`` (4 bytes), format version u16 LE, rows u32 LE,
  cols u32 LE, then rows*cols IEEE-754 binary64 LE values, row-major, no
  padding.
* Labels: CSV, one integer per line; line i is the class of feature row i.
* Attributes: CSV with row c holding the attribute vector of class c, or a
  binary matrix file with one row per class (sniffed by magic).
* Splits: CSV with columns split_id, class_id, role in {seen, unseen}.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .gaussians import VARIANCE_FLOOR, ClassGaussian, standard_normal

MAGIC = b"ZSAR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHII")


class LoadError(ValueError):
    """A data file failed to parse or validate.

    Carries the offending path and a byte offset (binary files) or line
    number (CSV files) alongside the message.
    """

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: {message} (offset {offset})")
        self.path = str(path)
        self.offset = offset


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent."""


@dataclass(frozen=True)
class Split:
    """A disjoint partition of class ids into seen and unseen groups."""

    seen_classes: tuple[int, ...]
    unseen_classes: tuple[int, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        seen = tuple(int(c) for c in self.seen_classes)
        unseen = tuple(int(c) for c in self.unseen_classes)
        if not seen or not unseen:
            raise ValueError("both class groups must be non-empty")
        if len(set(seen)) != len(seen) or len(set(unseen)) != len(unseen):
            raise ValueError("duplicate class ids within a split group")
        overlap = set(seen) & set(unseen)
        if overlap:
            raise ValueError(f"seen and unseen classes overlap: {sorted(overlap)}")
        object.__setattr__(self, "seen_classes", seen)
        object.__setattr__(self, "unseen_classes", unseen)

    @property
    def all_classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.seen_classes + self.unseen_classes))


@dataclass(frozen=True)
class Dataset:
    """Feature rows, per-row class labels, and per-class attribute vectors."""

    features: np.ndarray
    labels: np.ndarray
    attributes: np.ndarray
    class_names: tuple[str, ...] | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        attributes = np.asarray(self.attributes, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError("features must be a non-empty 2-d matrix")
        if attributes.ndim != 2 or attributes.shape[0] < 1:
            raise ValueError("attributes must be a non-empty 2-d matrix")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must hold one class index per feature row")
        if labels.min() < 0 or labels.max() >= attributes.shape[0]:
            raise ValueError("labels reference classes outside the attribute table")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        if not np.all(np.isfinite(attributes)):
            raise ValueError("attributes contain non-finite values")
        if self.class_names is not None and len(self.class_names) != attributes.shape[0]:
            raise ValueError("class_names length must match the class count")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "attributes", attributes)

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class SyntheticWorldSpec:
    """Planted world: class means are a fixed linear function of attributes.

    attribute_scheme is "random_unit" (seeded unit-norm rows) or "one_hot"
    (row c is basis vector c mod dim_k, so worlds with duplicated attributes
    are constructible by choosing dim_k < n_classes).
    examples_per_class is a single count or one count per class.
    """

    n_classes: int
    dim_d: int
    dim_k: int
    w_true: np.ndarray
    noise_scale: float
    examples_per_class: int | Sequence[int]
    attribute_scheme: str = "random_unit"
    seed: int = 0

    def __post_init__(self) -> None:
        w = np.asarray(self.w_true, dtype=np.float64)
        if self.n_classes < 1 or self.dim_d < 1 or self.dim_k < 1:
            raise ValueError("n_classes, dim_d, and dim_k must be positive")
        if w.shape != (self.dim_d, self.dim_k):
            raise ValueError(f"w_true must have shape {(self.dim_d, self.dim_k)}, got {w.shape}")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be positive")
        if self.attribute_scheme not in ("random_unit", "one_hot"):
            raise ValueError(f"unknown attribute scheme: {self.attribute_scheme!r}")
        counts = self.counts()
        if counts.shape != (self.n_classes,) or counts.min() < 1:
            raise ValueError("examples_per_class must give at least one example per class")
        object.__setattr__(self, "w_true", w)

    def counts(self) -> np.ndarray:
        if np.ndim(self.examples_per_class) == 0:
            return np.full(self.n_classes, int(self.examples_per_class), dtype=np.int64)
        return np.asarray(self.examples_per_class, dtype=np.int64)


def _pack_matrix(matrix) -> bytes:
    arr = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    if arr.ndim != 2:
        raise ValueError(f"can only save 2-d matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to save non-finite values")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, arr.shape[0], arr.shape[1]) \
        + arr.tobytes(order="C")


def _unpack_matrix(data: bytes, offset: int, path) -> tuple[np.ndarray, int]:
    if len(data) - offset < _HEADER.size:
        raise LoadError(path, offset, f"truncated header: {len(data) - offset} bytes")
    magic, version, rows, cols = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise LoadError(path, offset, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise LoadError(path, offset + 4, f"unsupported format version {version}")
    start = offset + _HEADER.size
    end = start + rows * cols * 8
    if len(data) < end:
        raise LoadError(path, start,
                        f"expected {end - start} payload bytes, found {len(data) - start}")
    arr = np.frombuffer(data[start:end], dtype="<f8").reshape(rows, cols).copy()
    bad = np.flatnonzero(~np.isfinite(arr.ravel()))
    if bad.size:
        raise LoadError(path, start + int(bad[0]) * 8,
                        f"non-finite value at element {int(bad[0])}")
    return arr, end


def save_matrix(path, matrix) -> None:
    Path(path).write_bytes(_pack_matrix(matrix))


def load_matrix(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise LoadError(path, 0, f"cannot read file: {exc}") from exc
    arr, end = _unpack_matrix(data, 0, path)
    if end != len(data):
        raise LoadError(path, end, f"{len(data) - end} trailing bytes after payload")
    return arr


def save_labels(path, labels) -> None:
    arr = np.asarray(labels, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        for value in arr:
            fh.write(f"{int(value)}\n")


def load_labels(path) -> np.ndarray:
    values = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise LoadError(path, 0, f"cannot read file: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(int(text))
        except ValueError as exc:
            raise LoadError(path, lineno, f"not an integer label: {text!r}") from exc
    if not values:
        raise LoadError(path, 0, "labels file is empty")
    return np.asarray(values, dtype=np.int64)


def save_attributes_csv(path, attributes) -> None:
    arr = np.asarray(attributes, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in arr:
            # repr round-trips float64 exactly
            writer.writerow([repr(float(v)) for v in row])


def load_attributes(path) -> np.ndarray:
    """Load a per-class attribute matrix, sniffing binary vs CSV by magic."""
    try:
        head = Path(path).open("rb").read(4)
    except OSError as exc:
        raise LoadError(path, 0, f"cannot read file: {exc}") from exc
    if head == MAGIC:
        return load_matrix(path)
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                parsed = [float(v) for v in row]
            except ValueError as exc:
                raise LoadError(path, lineno, f"not a numeric row: {row!r}") from exc
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise LoadError(path, lineno,
                                f"ragged row: {len(parsed)} values, expected {width}")
            rows.append(parsed)
    if not rows:
        raise LoadError(path, 0, "attributes file is empty")
    arr = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise LoadError(path, 0, "attributes contain non-finite values")
    return arr


def load_dataset(features_path, labels_path, attrs_path, standardize: bool = False) -> Dataset:
    """Load and fully validate a dataset from its three files.

    With standardize=True, features are shifted and scaled per dimension and
    the flag is recorded in the dataset metadata.
    """
    features = load_matrix(features_path)
    labels = load_labels(labels_path)
    attributes = load_attributes(attrs_path)
    if labels.shape[0] != features.shape[0]:
        raise LoadError(labels_path, 0,
                        f"{labels.shape[0]} labels for {features.shape[0]} feature rows")
    n_classes = attributes.shape[0]
    bad = np.flatnonzero((labels < 0) | (labels >= n_classes))
    if bad.size:
        line = int(bad[0]) + 1
        raise LoadError(labels_path, line,
                        f"label {int(labels[bad[0]])} out of range [0, {n_classes})")
    metadata = {"standardized": "false"}
    if standardize:
        mean = features.mean(axis=0)
        std = np.maximum(features.std(axis=0), 1e-12)
        features = (features - mean) / std
        metadata["standardized"] = "true"
    return Dataset(features, labels, attributes, metadata=metadata)


def save_dataset(dataset: Dataset, features_path, labels_path, attrs_path) -> None:
    save_matrix(features_path, dataset.features)
    save_labels(labels_path, dataset.labels)
    save_attributes_csv(attrs_path, dataset.attributes)


def generate_splits(n_classes: int, n_seen: int, n_splits: int, seed: int) -> list[Split]:
    """Seeded uniform-random seen/unseen partitions, each internally sorted.

    Split i carries seed + i so downstream per-split randomness derives from
    the same base seed.
    """
    if not 0 < n_seen < n_classes:
        raise ConfigError(f"n_seen must lie strictly between 0 and {n_classes}, got {n_seen}")
    if n_splits < 1:
        raise ConfigError("n_splits must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    splits = []
    for i in range(n_splits):
        perm = rng.permutation(n_classes)
        seen = tuple(sorted(int(c) for c in perm[:n_seen]))
        unseen = tuple(sorted(int(c) for c in perm[n_seen:]))
        splits.append(Split(seen, unseen, seed=seed + i))
    return splits


def save_splits(path, splits: Sequence[Split]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split_id", "class_id", "role"])
        for i, split in enumerate(splits):
            for c in split.seen_classes:
                writer.writerow([i, c, "seen"])
            for c in split.unseen_classes:
                writer.writerow([i, c, "unseen"])


def load_splits(path) -> list[Split]:
    groups: dict[int, dict[str, list[int]]] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0] == "split_id":
                continue
            if len(row) != 3:
                raise LoadError(path, lineno, f"expected 3 columns, got {len(row)}")
            try:
                split_id, class_id = int(row[0]), int(row[1])
            except ValueError as exc:
                raise LoadError(path, lineno, f"non-integer id in row {row!r}") from exc
            role = row[2].strip()
            if role not in ("seen", "unseen"):
                raise LoadError(path, lineno, f"unknown role {role!r}")
            groups.setdefault(split_id, {"seen": [], "unseen": []})[role].append(class_id)
    if not groups:
        raise LoadError(path, 0, "splits file is empty")
    splits = []
    for split_id in sorted(groups):
        entry = groups[split_id]
        try:
            splits.append(Split(tuple(sorted(entry["seen"])),
                                tuple(sorted(entry["unseen"])), seed=split_id))
        except ValueError as exc:
            raise LoadError(path, 0, f"invalid split {split_id}: {exc}") from exc
    return splits


def save_param_map(path, param_map) -> None:
    """Write a fitted map: one JSON header line, then binary matrix blocks
    for the mean weights, log-variance weights, and seen attributes."""
    header = {
        "format": "zsar-param-map",
        "version": 1,
        "kernel": None if param_map.kernel is None else
                  {"kind": param_map.kernel.kind, "bandwidth": param_map.kernel.bandwidth},
        "hyper": {"lambda_mu": param_map.hyper.lambda_mu,
                  "lambda_1": param_map.hyper.lambda_1,
                  "lambda_sigma": param_map.hyper.lambda_sigma,
                  "lambda_2": param_map.hyper.lambda_2},
    }
    blob = json.dumps(header, sort_keys=True).encode() + b"\n"
    for arr in (param_map.w_mu, param_map.w_sigma, param_map.seen_attrs):
        blob += _pack_matrix(arr)
    Path(path).write_bytes(blob)


def load_param_map(path):
    from .linalg import KernelSpec
    from .regression import HyperParams, ParamMap

    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise LoadError(path, 0, f"cannot read file: {exc}") from exc
    newline = data.find(b"\n")
    if newline < 0:
        raise LoadError(path, 0, "missing header line")
    try:
        header = json.loads(data[:newline].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(path, 0, f"bad header: {exc}") from exc
    if header.get("format") != "zsar-param-map" or header.get("version") != 1:
        raise LoadError(path, 0, f"unrecognized header {header!r}")
    offset = newline + 1
    w_mu, offset = _unpack_matrix(data, offset, path)
    w_sigma, offset = _unpack_matrix(data, offset, path)
    seen_attrs, offset = _unpack_matrix(data, offset, path)
    if offset != len(data):
        raise LoadError(path, offset, f"{len(data) - offset} trailing bytes")
    kernel = header["kernel"]
    spec = None if kernel is None else KernelSpec(kernel["kind"], kernel["bandwidth"])
    return ParamMap(w_mu, w_sigma, seen_attrs, spec, HyperParams(**header["hyper"]))


def _make_attributes(spec: SyntheticWorldSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.attribute_scheme == "one_hot":
        attrs = np.zeros((spec.n_classes, spec.dim_k))
        attrs[np.arange(spec.n_classes), np.arange(spec.n_classes) % spec.dim_k] = 1.0
        return attrs
    attrs = standard_normal(rng, (spec.n_classes, spec.dim_k))
    norms = np.linalg.norm(attrs, axis=1, keepdims=True)
    # Zero-norm rows have probability zero under the continuous draw.
    return attrs / np.maximum(norms, 1e-12)


def generate_synthetic(spec: SyntheticWorldSpec) -> tuple[Dataset, list[ClassGaussian]]:
    """Generate a planted dataset plus its ground-truth class Gaussians.

    Features are drawn directly as mean + noise_scale * z so that vanishing
    noise scales below the ground-truth Gaussians' variance floor still
    produce rows arbitrarily close to the class means. Identical specs yield
    bit-identical datasets.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    attrs = _make_attributes(spec, rng)
    means = attrs @ spec.w_true.T
    counts = spec.counts()
    labels = np.repeat(np.arange(spec.n_classes, dtype=np.int64), counts)
    noise = standard_normal(rng, (int(counts.sum()), spec.dim_d))
    features = means[labels] + spec.noise_scale * noise
    dataset = Dataset(features, labels, attrs,
                      metadata={"synthetic": "true", "seed": str(spec.seed)})
    log_var = np.log(max(spec.noise_scale ** 2, VARIANCE_FLOOR))
    truths = [ClassGaussian(means[c], np.full(spec.dim_d, log_var))
              for c in range(spec.n_classes)]
    return dataset, truths
