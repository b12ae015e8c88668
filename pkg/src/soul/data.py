"""Datasets for the simulator: synthetic Gaussian blobs, IDX/CSV ingestion,
client partitioning, unlearn-set selection and the random-relabel/combine
step used to build the unlearning training set.

Labels are 0-indexed everywhere (classes ``0..C-1``).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for malformed IDX files."""


class BadMagicError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1) if inputs.size else inputs.reshape(0, 0)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if inputs.shape[0] != labels.size:
            raise ValueError(f"{inputs.shape[0]} input rows but {labels.size} labels")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def dims(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.inputs, labels, self.num_classes)

    @classmethod
    def empty(cls, dims: int, num_classes: int) -> "Dataset":
        return cls(np.zeros((0, dims)), np.zeros(0, dtype=np.int64), num_classes)


@dataclass(frozen=True)
class ClientSplit:
    remain: Dataset
    unlearn: Dataset
    unlearn_indices: np.ndarray

    @property
    def full_size(self) -> int:
        return len(self.remain) + len(self.unlearn)


@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int = 10
    scheme: str = "iid_uniform"
    dirichlet_alpha: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.scheme not in ("iid_uniform", "label_skew"):
            raise ValueError(f"unknown partition scheme {self.scheme!r}")
        if self.scheme == "label_skew" and self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")


def generate_blobs(n: int, dims: int, classes: int, spread: float, seed: int) -> Dataset:
    """Isotropic Gaussian clusters around standard-normal class centroids.

    Class counts differ by at most one; rows come out shuffled.
    """
    if n < classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    centroids = rng.standard_normal((classes, dims))
    counts = np.full(classes, n // classes)
    counts[: n % classes] += 1
    labels = np.repeat(np.arange(classes), counts)
    inputs = centroids[labels] + spread * rng.standard_normal((n, dims))
    order = rng.permutation(n)
    return Dataset(inputs[order], labels[order], classes)


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(np.sort(order[n_test:])), ds.subset(np.sort(order[:n_test]))


def _read_idx(path: Path, magic: int) -> tuple[tuple[int, ...], np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise TruncatedFileError(f"{path}: truncated header")
    shape = struct.unpack(f">{ndim}I", raw[4:header_len])
    expected = int(np.prod(shape, dtype=np.int64))
    body = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    if body.size < expected:
        raise TruncatedFileError(f"{path}: expected {expected} data bytes, found {body.size}")
    return shape, body[:expected]


def load_idx(images_path, labels_path, num_classes: int | None = None) -> Dataset:
    """Read an MNIST-layout IDX image/label pair; pixels are scaled by 1/255."""
    img_shape, pixels = _read_idx(Path(images_path), IDX_IMAGES_MAGIC)
    (n_labels,), labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC)
    if img_shape[0] != n_labels:
        raise CountMismatchError(f"{img_shape[0]} images but {n_labels} labels")
    inputs = pixels.reshape(img_shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if num_classes is None:
        num_classes = max(int(labels.max()) + 1 if labels.size else 0, 2)
    return Dataset(inputs, labels, num_classes)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


def load_csv(path, num_classes: int | None = None) -> Dataset:
    """Tabular import; header must be ``feature_0,...,feature_{d-1},label``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        expected = [f"feature_{i}" for i in range(len(header) - 1)] + ["label"]
        if header != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}")
        rows = [r for r in reader if r]
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    labels = arr[:, -1].astype(np.int64)
    if num_classes is None:
        num_classes = max(int(labels.max()) + 1 if labels.size else 0, 2)
    return Dataset(arr[:, :-1], labels, num_classes)


def write_csv(path, ds: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"feature_{i}" for i in range(ds.dims)] + ["label"])
        for x, y in zip(ds.inputs, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def partition_indices(n: int, spec: PartitionSpec, labels: np.ndarray | None = None) -> list[np.ndarray]:
    """Disjoint sorted index arrays, one per client, covering ``range(n)``."""
    k = spec.num_clients
    if n == 0:
        raise ValueError("cannot partition an empty dataset")
    if k > n:
        raise ValueError(f"{k} clients but only {n} samples")
    rng = np.random.default_rng(spec.seed)
    if spec.scheme == "iid_uniform":
        return [np.sort(part) for part in np.array_split(rng.permutation(n), k)]

    if labels is None:
        raise ValueError("label_skew partitioning needs labels")
    labels = np.asarray(labels)
    for _ in range(100):
        parts: list[list[int]] = [[] for _ in range(k)]
        for c in np.unique(labels):
            idx = rng.permutation(np.flatnonzero(labels == c))
            props = rng.dirichlet(np.full(k, spec.dirichlet_alpha))
            cuts = (np.cumsum(props)[:-1] * idx.size).astype(int)
            for client, chunk in enumerate(np.split(idx, cuts)):
                parts[client].extend(chunk.tolist())
        if min(len(p) for p in parts) >= 1:
            break
    # small n relative to k: hand one sample from the largest client to each empty one
    for p in parts:
        if not p:
            p.append(max(parts, key=len).pop())
    return [np.sort(np.array(p, dtype=np.int64)) for p in parts]


def partition(ds: Dataset, spec: PartitionSpec) -> list[Dataset]:
    return [ds.subset(idx) for idx in partition_indices(len(ds), spec, ds.labels)]


def select_unlearn(
    client_ds: Dataset,
    ratio: float,
    seed: int,
    mode: str = "sample",
    target_class: int | None = None,
) -> ClientSplit:
    """Split a client's data into remaining and to-be-forgotten parts.

    ``mode="sample"`` draws ``floor(ratio * n)`` rows uniformly without
    replacement. ``mode="class"`` forgets every row of ``target_class``
    (drawn at random among present classes when not given); ``ratio`` is
    ignored.
    """
    n = len(client_ds)
    rng = np.random.default_rng(seed)
    if mode == "sample":
        if not 0 < ratio < 1:
            raise ValueError("unlearn ratio must be in (0, 1)")
        m = math.floor(ratio * n + 1e-9)
        if m == 0:
            raise ValueError(f"ratio {ratio} of {n} samples selects nothing to unlearn")
        chosen = np.sort(rng.choice(n, size=m, replace=False))
    elif mode == "class":
        if target_class is None:
            target_class = int(rng.choice(np.unique(client_ds.labels)))
        chosen = np.flatnonzero(client_ds.labels == target_class)
        if chosen.size == 0:
            raise ValueError(f"client holds no samples of class {target_class}")
        if chosen.size == n:
            raise ValueError("class-targeted unlearning would remove the whole client dataset")
    else:
        raise ValueError(f"unknown unlearn selection mode {mode!r}")
    keep = np.setdiff1d(np.arange(n), chosen)
    return ClientSplit(client_ds.subset(keep), client_ds.subset(chosen), chosen)


def relabel_random(unlearn: Dataset, seed: int, exclude_original: bool = False) -> Dataset:
    """Redraw every label uniformly over all classes; inputs are untouched."""
    rng = np.random.default_rng(seed)
    c = unlearn.num_classes
    if exclude_original and c > 1:
        labels = (unlearn.labels + 1 + rng.integers(0, c - 1, size=len(unlearn))) % c
    else:
        labels = rng.integers(0, c, size=len(unlearn))
    return unlearn.with_labels(labels)


def combine(relabeled: Dataset, remain: Dataset) -> Dataset:
    """Concatenate, relabeled rows first."""
    if relabeled.num_classes != remain.num_classes:
        raise ValueError("datasets disagree on the number of classes")
    if len(relabeled) and len(remain) and relabeled.dims != remain.dims:
        raise ValueError(f"dimension mismatch: {relabeled.dims} vs {remain.dims}")
    if not len(remain):
        return relabeled
    if not len(relabeled):
        return remain
    return Dataset(
        np.concatenate([relabeled.inputs, remain.inputs]),
        np.concatenate([relabeled.labels, remain.labels]),
        remain.num_classes,
    )


def concat(parts: list[Dataset]) -> Dataset:
    parts = [p for p in parts if len(p)]
    if not parts:
        raise ValueError("nothing to concatenate")
    return Dataset(
        np.concatenate([p.inputs for p in parts]),
        np.concatenate([p.labels for p in parts]),
        parts[0].num_classes,
    )
