"""Dataset ingestion and deterministic mini-batch streaming.

Loaders parse the standard CIFAR-10 binary batches and MNIST IDX files
bit-exactly (no network access here; the CLI prints fetch instructions
when files are missing). Pixel values are divided by 255, with no mean or
std normalization. Epoch shuffles are a pure function of
(epoch_seed_base, epoch) via the fixed Fisher-Yates of :mod:`walab.rng`,
so any reader can regenerate any batch.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import FormatError, RangeError, SpecError
from .nn import Batch
from .rng import mix64, permutation

_CIFAR_RECORD = 3073  # 1 label byte + 3*32*32 pixel bytes
_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Immutable array-backed dataset with inputs scaled to [0, 1]."""

    name: str
    split: str
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        x = np.ascontiguousarray(self.inputs, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if len(x) < 1 or y.shape != (len(x),):
            raise SpecError(f"bad dataset shapes: inputs {x.shape}, labels {y.shape}")
        if y.min() < 0 or y.max() >= self.class_count:
            raise FormatError(
                f"{self.name}/{self.split}: labels outside [0, {self.class_count})"
            )
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.inputs)


def _cifar_files(directory: Path, split: str) -> list[Path]:
    # Accept either the dataset dir itself or its parent.
    for base in (directory, directory / "cifar-10-batches-bin"):
        names = (
            [f"data_batch_{i}.bin" for i in range(1, 6)]
            if split == "train"
            else ["test_batch.bin"]
        )
        paths = [base / n for n in names]
        if all(p.exists() for p in paths):
            return paths
    raise FormatError(
        f"CIFAR-10 binary batches not found under {directory}; expected "
        "cifar-10-batches-bin/data_batch_*.bin and test_batch.bin"
    )


def load_cifar10(directory: str | Path, split: str) -> Dataset:
    """Parse the CIFAR-10 binary format: 3073-byte records, row-major RGB planes."""
    if split not in ("train", "test"):
        raise SpecError(f"split must be train or test, got {split!r}")
    records = []
    for path in _cifar_files(Path(directory), split):
        raw = path.read_bytes()
        if len(raw) % _CIFAR_RECORD != 0:
            raise FormatError(
                f"{path}: size {len(raw)} is not a multiple of {_CIFAR_RECORD}",
                offset=len(raw) - len(raw) % _CIFAR_RECORD,
            )
        records.append(np.frombuffer(raw, dtype=np.uint8).reshape(-1, _CIFAR_RECORD))
    block = np.concatenate(records)
    labels = block[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise FormatError(f"CIFAR-10 label byte > 9 in {split} split")
    images = block[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return Dataset("cifar10", split, images, labels, class_count=10)


def _read_idx(path: Path, expect_magic: int, expect_dims: int) -> np.ndarray:
    gz = path.with_name(path.name + ".gz")
    if path.exists():
        raw = path.read_bytes()
    elif gz.exists():
        raw = gzip.decompress(gz.read_bytes())
    else:
        raise FormatError(f"IDX file not found: {path} (or .gz)")
    if len(raw) < 4 * (1 + expect_dims):
        raise FormatError(f"{path}: truncated IDX header", offset=len(raw))
    magic = int.from_bytes(raw[:4], "big")
    if magic != expect_magic:
        raise FormatError(
            f"{path}: IDX magic {magic:#010x}, expected {expect_magic:#010x}", offset=0
        )
    dims = [
        int.from_bytes(raw[4 + 4 * i:8 + 4 * i], "big") for i in range(expect_dims)
    ]
    start = 4 + 4 * expect_dims
    count = int(np.prod(dims))
    if len(raw) != start + count:
        raise FormatError(
            f"{path}: expected {start + count} bytes for dims {dims}, got {len(raw)}",
            offset=min(len(raw), start + count),
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=start).reshape(dims)


def load_mnist(directory: str | Path, split: str) -> Dataset:
    """Parse MNIST IDX files (big-endian magics 0x803 images / 0x801 labels)."""
    if split not in ("train", "test"):
        raise SpecError(f"split must be train or test, got {split!r}")
    directory = Path(directory)
    prefix = "train" if split == "train" else "t10k"
    images = _read_idx(directory / f"{prefix}-images-idx3-ubyte", _IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(directory / f"{prefix}-labels-idx1-ubyte", _IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise FormatError(
            f"MNIST {split}: {len(images)} images but {len(labels)} labels"
        )
    x = images.astype(np.float64)[:, None, :, :] / 255.0  # (N, 1, 28, 28)
    return Dataset("mnist", split, x, labels.astype(np.int64), class_count=10)


def synthetic_blobs(
    classes: int,
    per_class: int,
    dim: int,
    seed: int,
    separation: float = 3.0,
    shape: tuple[int, ...] | None = None,
) -> Dataset:
    """Gaussian clusters with unit covariance, centers on a scaled simplex.

    Centers are ``s * e_i`` on the first ``classes`` axes with s chosen so
    every pair of centers is ``separation`` apart. Values are raw
    Gaussians (not squashed into [0, 1]); this is the one dataset whose
    documented scaling is "standard normal noise around unit-scale
    centers". ``shape`` optionally reshapes inputs, e.g. to (C, H, W) for
    conv models.
    """
    if classes < 1 or per_class < 1 or dim < 1:
        raise SpecError("classes, per_class, dim must all be >= 1")
    if dim < classes:
        raise SpecError(f"dim {dim} must be >= classes {classes} for simplex centers")
    if shape is not None and int(np.prod(shape)) != dim:
        raise SpecError(f"shape {shape} does not hold dim {dim}")
    rng = np.random.Generator(np.random.PCG64(mix64(seed)))
    scale = separation / np.sqrt(2.0)
    n = classes * per_class
    inputs = rng.standard_normal((n, dim))
    labels = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    inputs[np.arange(n), labels] += scale
    if shape is not None:
        inputs = inputs.reshape((n,) + tuple(shape))
    return Dataset("blobs", "train", inputs, labels, class_count=classes)


def subset_balanced(dataset: Dataset, per_class: int, seed: int = 0) -> Dataset:
    """Class-balanced subset: first ``per_class`` of each class in seeded order.

    The scan order is a fixed permutation of the dataset, so the subset is
    deterministic in (dataset, seed); chosen indices are re-sorted so the
    subset preserves the original sample order.
    """
    order = permutation(len(dataset), mix64(seed ^ 0x5B5E1))
    taken: dict[int, int] = {}
    chosen = []
    for i in order:
        label = int(dataset.labels[i])
        if taken.get(label, 0) < per_class:
            taken[label] = taken.get(label, 0) + 1
            chosen.append(int(i))
    want = per_class * dataset.class_count
    if len(chosen) != want:
        raise SpecError(
            f"{dataset.name}/{dataset.split}: cannot draw {per_class} per class"
        )
    idx = np.sort(np.asarray(chosen))
    return Dataset(
        dataset.name,
        dataset.split,
        dataset.inputs[idx],
        dataset.labels[idx],
        dataset.class_count,
    )


@dataclass(frozen=True)
class BatchStream:
    """Deterministic shuffled batches: epoch e's order depends only on
    (epoch_seed_base, e)."""

    dataset: Dataset
    batch_size: int
    epoch_seed_base: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def steps_per_epoch(self) -> int:
        return -(-len(self.dataset) // self.batch_size)


@lru_cache(maxsize=8)
def _epoch_perm(seed_base: int, epoch: int, n: int) -> np.ndarray:
    perm = permutation(n, mix64(seed_base ^ mix64(epoch)))
    perm.setflags(write=False)  # cached and shared across calls
    return perm


def next_batch(stream: BatchStream, epoch: int, step: int) -> Batch:
    """Slice [step*B, (step+1)*B) of epoch's permutation; last batch may be short."""
    if step < 0 or step >= stream.steps_per_epoch:
        raise RangeError(
            f"step {step} outside [0, {stream.steps_per_epoch}) for this stream"
        )
    perm = _epoch_perm(stream.epoch_seed_base, epoch, len(stream.dataset))
    idx = perm[step * stream.batch_size:(step + 1) * stream.batch_size]
    return Batch(stream.dataset.inputs[idx], stream.dataset.labels[idx])
