"""Flat parameter vectors, their arithmetic, and incremental means.

Everything here is 64-bit and immutable: operations return fresh vectors
and never touch their inputs. A :class:`WeightVector` is bound to a model
architecture through ``layout_id``; mixing vectors from different layouts
raises :class:`~walab.errors.LayoutError`.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, LayoutError, NumericError

_MASK64 = (1 << 64) - 1

_MAGIC = b"WAV1"
_HEADER = struct.Struct("<4sQQ")


def layout_hash(descriptor) -> int:
    """Stable 64-bit hash of a layout descriptor (any repr-stable object).

    Models hash their ordered (layer kind, parameter shape) list through
    this, so two models with identical architecture share a layout_id.
    """
    digest = hashlib.blake2b(repr(descriptor).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class WeightVector:
    """Dense 1-D float64 vector of all trainable parameters of a model.

    The constructor takes ownership of the buffer: when the input array is
    already contiguous float64 it is frozen in place (no copy), so callers
    must not hold a writable reference to it afterwards.
    """

    values: np.ndarray
    layout_id: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.base is not None and getattr(v.base, "flags", None) is not None \
                and v.base.flags.writeable:
            v = v.copy()  # views of writable arrays could mutate under us
        if v.ndim != 1 or v.size == 0:
            raise LayoutError(f"weight vector must be 1-D and non-empty, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise NumericError("weight vector contains NaN/Inf")
        if not 0 <= self.layout_id <= _MASK64:
            raise LayoutError(f"layout_id must be a 64-bit value, got {self.layout_id}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def same_layout(self, other: "WeightVector") -> bool:
        return self.layout_id == other.layout_id and len(self) == len(other)


def _check_layout(a: WeightVector, b: WeightVector, op: str) -> None:
    if not a.same_layout(b):
        raise LayoutError(
            f"{op}: layout mismatch "
            f"({a.layout_id:#x}/{len(a)} vs {b.layout_id:#x}/{len(b)})"
        )


def zeros_like(w: WeightVector) -> WeightVector:
    return WeightVector(np.zeros(len(w)), w.layout_id)


def axpy(a: float, x: WeightVector, y: WeightVector) -> WeightVector:
    """Return ``a*x + y`` elementwise; inputs are unmodified."""
    _check_layout(x, y, "axpy")
    return WeightVector(a * x.values + y.values, x.layout_id)


def interpolate(w_a: WeightVector, w_b: WeightVector, t: float) -> WeightVector:
    """Point ``(1-t)*w_a + t*w_b`` on the line through two vectors.

    ``t`` is unrestricted: probing past the endpoints is allowed.
    """
    _check_layout(w_a, w_b, "interpolate")
    return WeightVector((1.0 - t) * w_a.values + t * w_b.values, w_a.layout_id)


def l2_norm(w: WeightVector) -> float:
    return float(np.linalg.norm(w.values))


def dot(w_a: WeightVector, w_b: WeightVector) -> float:
    _check_layout(w_a, w_b, "dot")
    return float(np.dot(w_a.values, w_b.values))


@dataclass(frozen=True)
class RunningAverage:
    """Incremental mean of weight vectors: the mean itself plus a count.

    Stores the mean rather than the sum, so the state never outgrows the
    magnitude of its inputs.
    """

    mean: WeightVector
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")


def running_average_start(w: WeightVector, count: int = 1) -> RunningAverage:
    """Average seeded with ``w`` counted ``count`` times (0 for an empty state)."""
    return RunningAverage(mean=w, count=count)


def running_average_update(state: RunningAverage, w: WeightVector) -> RunningAverage:
    """Fold one more vector into the mean.

    new mean = (mean * count + w) / (count + 1), the literal running-average
    update; with count = 0 the mean is replaced by ``w``.
    """
    _check_layout(state.mean, w, "running_average_update")
    if not np.isfinite(w.values).all():  # pragma: no cover - WeightVector already guards
        raise NumericError("running_average_update: non-finite input")
    new_mean = (state.mean.values * state.count + w.values) / (state.count + 1)
    return RunningAverage(WeightVector(new_mean, w.layout_id), state.count + 1)


def save_checkpoint(path: str | Path, w: WeightVector) -> None:
    """Write ``w`` to the binary checkpoint format.

    Little-endian: magic "WAV1", u64 length, u64 layout hash, then
    length float64 values. Round-trips bit-exactly.
    """
    data = _HEADER.pack(_MAGIC, len(w), w.layout_id) + w.values.astype("<f8").tobytes()
    Path(path).write_bytes(data)


def load_checkpoint(path: str | Path) -> WeightVector:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise FormatError(f"checkpoint not found: {path}") from None
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header", offset=len(raw))
    magic, length, layout_id = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
    expected = _HEADER.size + 8 * length
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {length} values, got {len(raw)}",
            offset=min(len(raw), expected),
        )
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return WeightVector(values, layout_id)
