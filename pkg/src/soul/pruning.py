"""Magnitude pruning: L1 upload compression, top-fraction masks and the
selective-pruning mask algebra, plus a sparse index/value payload used for
byte accounting.

Functions accept either a :class:`~soul.nn.ParamVector` or a bare 1-D array
and return the same kind. Masks are per-scalar by default; ``granularity=
"neuron"`` scores each output unit of a weight matrix by the L1 norm of its
incoming weights and keeps or drops the whole column.

Selection is always deterministic: among equal magnitudes the lower flat
index ranks higher (kept first, pruned last).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .nn import ParamVector

SCOPES = ("layer", "global")
GRANULARITIES = ("weight", "neuron")

PAYLOAD_MAGIC = b"SPRS"
PAYLOAD_VERSION = 1
# magic, version byte, total_len (u32), nnz (u32)
HEADER_BYTES = 4 + 1 + 4 + 4
BYTES_PER_ENTRY = 4 + 4


@dataclass(frozen=True)
class PruneMask:
    """Boolean vector aligned with a parameter vector (``True`` = selected)."""

    bits: np.ndarray
    names: tuple[str, ...] = ()
    shapes: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool).reshape(-1))

    @property
    def kept_count(self) -> int:
        return int(self.bits.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __and__(self, other: "PruneMask") -> "PruneMask":
        return PruneMask(self.bits & other.bits, self.names, self.shapes)

    def __invert__(self) -> "PruneMask":
        return PruneMask(~self.bits, self.names, self.shapes)

    def difference(self, other: "PruneMask") -> "PruneMask":
        """Positions selected here but not in ``other``."""
        return PruneMask(self.bits & ~other.bits, self.names, self.shapes)


def _flat(theta) -> np.ndarray:
    return theta.flat if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64).reshape(-1)


def _rewrap(template, flat: np.ndarray):
    return template.with_flat(flat) if isinstance(template, ParamVector) else flat


def _directory(theta) -> tuple[tuple[str, ...], tuple[tuple[int, ...], ...]]:
    if isinstance(theta, ParamVector):
        return theta.names, theta.shapes
    n = _flat(theta).size
    return ("flat",), ((n,),)


def _keep_count(n: int, beta: float) -> int:
    return max(1, math.floor(beta * n + 1e-9))


def l1_magnitudes(theta) -> np.ndarray:
    """Per-scalar absolute values in flat layer order."""
    return np.abs(_flat(theta))


def top_fraction_mask(mags, beta: float) -> PruneMask:
    """Select the ``max(1, floor(beta * n))`` largest entries of ``mags``."""
    mags = np.asarray(mags, dtype=np.float64).reshape(-1)
    if mags.size == 0:
        raise ValueError("cannot build a mask over an empty vector")
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    k = _keep_count(mags.size, beta)
    # stable sort on negated magnitudes keeps lower indices ahead among ties
    order = np.argsort(-mags, kind="stable")
    bits = np.zeros(mags.size, dtype=bool)
    bits[order[:k]] = True
    return PruneMask(bits)


def _bottom_indices(mags: np.ndarray, count: int) -> np.ndarray:
    return np.argsort(mags, kind="stable")[:count]


def _units(theta, granularity: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split into (scores, scalar-index groups) per layer.

    Each score covers the flat indices in the matching row of the group
    array; for per-weight granularity the groups are single scalars.
    """
    names, shapes = _directory(theta)
    flat = _flat(theta)
    out = []
    start = 0
    for shape in shapes:
        size = int(np.prod(shape, dtype=np.int64))
        idx = np.arange(start, start + size)
        values = np.abs(flat[start:start + size])
        if granularity == "neuron" and len(shape) == 2:
            groups = idx.reshape(shape).T
            scores = values.reshape(shape).sum(axis=0)
        else:
            groups = idx.reshape(-1, 1)
            scores = values
        out.append((scores, groups))
        start += size
    return out


def _pooled(units) -> tuple[np.ndarray, list[np.ndarray]]:
    return np.concatenate([s for s, _ in units]), [g for _, gs in units for g in gs]


def _check_options(scope: str, granularity: str) -> None:
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}")


def magnitude_mask(theta, beta: float, scope: str = "layer", granularity: str = "weight") -> PruneMask:
    """Top-``beta`` mask of ``theta`` by magnitude, per layer or over all layers."""
    _check_options(scope, granularity)
    names, shapes = _directory(theta)
    units = _units(theta, granularity)
    bits = np.zeros(_flat(theta).size, dtype=bool)
    if scope == "global":
        scores, groups = _pooled(units)
        for i in top_fraction_mask(scores, beta).indices:
            bits[groups[i]] = True
        return PruneMask(bits, names, shapes)
    for scores, groups in units:
        chosen = top_fraction_mask(scores, beta).indices
        bits[groups[chosen].ravel()] = True
    return PruneMask(bits, names, shapes)


def selective_prune(
    theta_l,
    theta_ul,
    beta: float,
    scope: str = "layer",
    granularity: str = "weight",
):
    """Zero the learning parameters that rank top-``beta`` in the unlearning
    model but not in the learning model.

    Returns ``(pruned, mask)`` where ``mask`` marks the zeroed positions.
    Every other coordinate of ``theta_l`` is returned bit-identical.
    """
    if isinstance(theta_l, ParamVector) and isinstance(theta_ul, ParamVector):
        theta_l.check_aligned(theta_ul)
    elif _flat(theta_l).shape != _flat(theta_ul).shape:
        raise ValueError("learning and unlearning parameters are misaligned")
    keep_ul = magnitude_mask(theta_ul, beta, scope, granularity)
    keep_l = magnitude_mask(theta_l, beta, scope, granularity)
    drop = keep_ul.difference(keep_l)
    pruned = np.where(drop.bits, 0.0, _flat(theta_l))
    return _rewrap(theta_l, pruned), drop


def l1_prune(theta, fraction: float, scope: str = "layer", granularity: str = "weight"):
    """Zero the ``floor(fraction * n)`` smallest-magnitude entries (per scope unit)."""
    if not 0 <= fraction < 1:
        raise ValueError(f"prune fraction must be in [0, 1), got {fraction}")
    _check_options(scope, granularity)
    flat = _flat(theta).copy()
    units = _units(theta, granularity)
    if scope == "global":
        scores, groups = _pooled(units)
        for i in _bottom_indices(scores, math.floor(fraction * scores.size + 1e-9)):
            flat[groups[i]] = 0.0
    else:
        for scores, groups in units:
            drop = _bottom_indices(scores, math.floor(fraction * scores.size + 1e-9))
            flat[groups[drop].ravel()] = 0.0
    return _rewrap(theta, flat)


@dataclass(frozen=True)
class SparsePayload:
    """Nonzero coordinates of a parameter vector.

    In memory, values keep full float64 precision so that densifying is an
    exact inverse. The wire encoding (:meth:`encode`) stores uint32 indices
    and float32 values, little-endian, after a 13-byte header.
    """

    indices: np.ndarray
    values: np.ndarray
    total_len: int
    names: tuple[str, ...] = ()
    shapes: tuple[tuple[int, ...], ...] = ()
    activation: str = "relu"

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.size != vals.size:
            raise ValueError("indices and values differ in length")
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def payload_bytes(self) -> int:
        return HEADER_BYTES + BYTES_PER_ENTRY * self.nnz

    def encode(self) -> bytes:
        header = PAYLOAD_MAGIC + struct.pack("<BII", PAYLOAD_VERSION, self.total_len, self.nnz)
        return (
            header
            + self.indices.astype("<u4").tobytes()
            + self.values.astype("<f4").tobytes()
        )

    @classmethod
    def decode(cls, blob: bytes) -> "SparsePayload":
        if len(blob) < HEADER_BYTES or blob[:4] != PAYLOAD_MAGIC:
            raise ValueError("not a sparse payload (bad magic)")
        version, total_len, nnz = struct.unpack("<BII", blob[4:HEADER_BYTES])
        if version != PAYLOAD_VERSION:
            raise ValueError(f"unsupported payload version {version}")
        if len(blob) != HEADER_BYTES + BYTES_PER_ENTRY * nnz:
            raise ValueError("payload length does not match its header")
        body = HEADER_BYTES + 4 * nnz
        idx = np.frombuffer(blob[HEADER_BYTES:body], dtype="<u4").astype(np.int64)
        vals = np.frombuffer(blob[body:], dtype="<f4").astype(np.float64)
        return cls(idx, vals, total_len)


def dense_payload_bytes(total_len: int) -> int:
    """Bytes for an unpruned upload in the same index/value framing."""
    return HEADER_BYTES + BYTES_PER_ENTRY * int(total_len)


def to_sparse(theta) -> SparsePayload:
    flat = _flat(theta)
    idx = np.flatnonzero(flat)
    names, shapes = _directory(theta)
    activation = theta.activation if isinstance(theta, ParamVector) else "relu"
    return SparsePayload(idx, flat[idx], flat.size, names, shapes, activation)


def from_sparse(payload: SparsePayload):
    if payload.nnz and (payload.indices[0] < 0 or payload.indices[-1] >= payload.total_len):
        raise IndexError("sparse payload index out of bounds")
    flat = np.zeros(payload.total_len)
    flat[payload.indices] = payload.values
    if payload.names and payload.names != ("flat",):
        return ParamVector(payload.names, payload.shapes, flat, payload.activation)
    return flat
